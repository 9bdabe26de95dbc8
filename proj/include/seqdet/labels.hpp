// Copyright 2026 The seqdet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SEQDET_LABELS_HPP
#define SEQDET_LABELS_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "seqdet/error.hpp"

namespace seqdet {

/// The six event classes. The integer codes are fixed and used by every
/// serialized artifact; they also double as the epoch-label priority order
/// (lower code wins).
enum class EventLabel : std::uint8_t { SPSW = 0, PLED = 1, GPED = 2, EYEM = 3, ARTF = 4, BCKG = 5 };

inline constexpr std::size_t kNumClasses = 6;

inline constexpr std::array<EventLabel, kNumClasses> kAllLabels = {
    EventLabel::SPSW, EventLabel::PLED, EventLabel::GPED,
    EventLabel::EYEM, EventLabel::ARTF, EventLabel::BCKG};

using ClassVector = std::array<double, kNumClasses>;

constexpr std::size_t index_of(EventLabel label) { return static_cast<std::size_t>(label); }

inline EventLabel label_from_index(std::size_t index) {
  if (index >= kNumClasses) throw DataError("label index out of range: " + std::to_string(index));
  return static_cast<EventLabel>(index);
}

constexpr std::string_view to_string(EventLabel label) {
  constexpr std::array<std::string_view, kNumClasses> names = {"SPSW", "PLED", "GPED",
                                                               "EYEM", "ARTF", "BCKG"};
  return names[index_of(label)];
}

inline EventLabel parse_label(std::string_view text) {
  for (EventLabel l : kAllLabels)
    if (to_string(l) == text) return l;
  throw DataError("unknown event label '" + std::string(text) + "'");
}

/// SPSW, PLED and GPED: the target super-class in two-way scoring.
constexpr bool is_epileptiform(EventLabel label) {
  return label == EventLabel::SPSW || label == EventLabel::PLED || label == EventLabel::GPED;
}

inline std::size_t argmax(const ClassVector& p) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumClasses; ++k)
    if (p[k] > p[best]) best = k;
  return best;
}

}  // namespace seqdet

#endif  // SEQDET_LABELS_HPP
