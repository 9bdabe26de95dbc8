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

#ifndef SEQDET_ANNOTATIONS_HPP
#define SEQDET_ANNOTATIONS_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "seqdet/error.hpp"
#include "seqdet/labels.hpp"

namespace seqdet {

struct Event {
  std::optional<int> channel;  // nullopt: applies to every channel
  double start_s = 0.0;
  double stop_s = 0.0;
  EventLabel label = EventLabel::BCKG;

  bool operator==(const Event&) const = default;
};

struct AnnotationSet {
  std::vector<Event> events;

  bool operator==(const AnnotationSet&) const = default;
};

/// Checks interval sanity and rejects overlapping events with different
/// labels on the same channel (an all-channel event overlaps every channel).
inline void validate(const AnnotationSet& set, std::optional<double> duration_s = std::nullopt) {
  for (const auto& e : set.events) {
    if (!(e.start_s >= 0.0) || !(e.start_s < e.stop_s))
      throw DataError("annotation: invalid interval [" + std::to_string(e.start_s) + ", " +
                      std::to_string(e.stop_s) + ")");
    if (duration_s && e.stop_s > *duration_s + 1e-9)
      throw DataError("annotation: event ends at " + std::to_string(e.stop_s) +
                      " s, beyond recording duration " + std::to_string(*duration_s) + " s");
    if (e.channel && *e.channel < 0) throw DataError("annotation: negative channel index");
  }
  std::vector<const Event*> sorted;
  for (const auto& e : set.events) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(), [](auto a, auto b) { return a->start_s < b->start_s; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    for (std::size_t j = i + 1; j < sorted.size() && sorted[j]->start_s < sorted[i]->stop_s; ++j) {
      const Event& a = *sorted[i];
      const Event& b = *sorted[j];
      const bool same_channel = !a.channel || !b.channel || *a.channel == *b.channel;
      if (same_channel && a.label != b.label) {
        auto chan = [](const Event& e) { return e.channel ? std::to_string(*e.channel) : std::string("*"); };
        throw DataError("annotation: conflicting overlapping events on channel " + chan(a) + "/" +
                        chan(b) + ": " + std::string(to_string(a.label)) + " [" +
                        std::to_string(a.start_s) + ", " + std::to_string(a.stop_s) + ") vs " +
                        std::string(to_string(b.label)) + " [" + std::to_string(b.start_s) + ", " +
                        std::to_string(b.stop_s) + ")");
      }
    }
  }
}

/// Shortest representation that round-trips, padded to at least four
/// decimal places.
inline std::string format_seconds(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
  std::string s(buf, end);
  auto dot = s.find('.');
  if (dot == std::string::npos) {
    s += ".0000";
  } else {
    const std::size_t decimals = s.size() - dot - 1;
    if (decimals < 4) s.append(4 - decimals, '0');
  }
  return s;
}

inline void write_annotations(const AnnotationSet& set, std::ostream& out) {
  out << "channel,start_s,stop_s,label\n";
  for (const auto& e : set.events) {
    out << (e.channel ? std::to_string(*e.channel) : std::string("*")) << ','
        << format_seconds(e.start_s) << ',' << format_seconds(e.stop_s) << ','
        << to_string(e.label) << '\n';
  }
}

inline void write_annotations(const AnnotationSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot create '" + path + "'");
  write_annotations(set, out);
}

namespace detail {

inline double parse_double_field(const std::string& s, const std::string& ctx) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw DataError(ctx + ": bad number '" + s + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace detail

inline AnnotationSet read_annotations(std::istream& in, const std::string& name = "annotations") {
  std::string line;
  if (!std::getline(in, line) || detail::strip_cr(line) != "channel,start_s,stop_s,label")
    throw DataError(name + ": missing header 'channel,start_s,stop_s,label'");
  AnnotationSet set;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    const std::string ctx = name + ":" + std::to_string(line_no);
    auto f = detail::split(line, ',');
    if (f.size() != 4) throw DataError(ctx + ": expected 4 fields");
    Event e;
    if (f[0] != "*") {
      int ch = 0;
      auto [p, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), ch);
      if (ec != std::errc() || p != f[0].data() + f[0].size()) throw DataError(ctx + ": bad channel '" + f[0] + "'");
      e.channel = ch;
    }
    e.start_s = detail::parse_double_field(f[1], ctx);
    e.stop_s = detail::parse_double_field(f[2], ctx);
    e.label = parse_label(f[3]);
    set.events.push_back(e);
  }
  validate(set);
  return set;
}

inline AnnotationSet read_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_annotations(in, path);
}

/// Label of every (channel, epoch) cell: the label with the largest overlap,
/// with unannotated time counted as BCKG. Ties go to the lower label code.
/// Result is indexed [epoch][channel].
inline std::vector<std::vector<EventLabel>> cell_labels(const AnnotationSet& set, std::size_t num_channels,
                                                        std::size_t num_epochs, double epoch_s = 1.0) {
  std::vector<std::vector<ClassVector>> overlap(num_epochs,
                                                std::vector<ClassVector>(num_channels, ClassVector{}));
  for (const auto& e : set.events) {
    if (e.channel && static_cast<std::size_t>(*e.channel) >= num_channels)
      throw DataError("annotation references channel " + std::to_string(*e.channel) + " but recording has " +
                      std::to_string(num_channels));
    const auto first = static_cast<std::size_t>(std::max(0.0, std::floor(e.start_s / epoch_s)));
    for (std::size_t ep = first; ep < num_epochs && ep * epoch_s < e.stop_s; ++ep) {
      const double lo = std::max(e.start_s, ep * epoch_s);
      const double hi = std::min(e.stop_s, (ep + 1) * epoch_s);
      if (hi <= lo) continue;
      for (std::size_t c = 0; c < num_channels; ++c)
        if (!e.channel || static_cast<std::size_t>(*e.channel) == c) overlap[ep][c][index_of(e.label)] += hi - lo;
    }
  }
  std::vector<std::vector<EventLabel>> labels(num_epochs, std::vector<EventLabel>(num_channels));
  for (std::size_t ep = 0; ep < num_epochs; ++ep) {
    for (std::size_t c = 0; c < num_channels; ++c) {
      ClassVector& o = overlap[ep][c];
      double covered = 0.0;
      for (std::size_t k = 0; k + 1 < kNumClasses; ++k) covered += o[k];
      o[index_of(EventLabel::BCKG)] = std::max(o[index_of(EventLabel::BCKG)], epoch_s - covered);
      labels[ep][c] = label_from_index(argmax(o));
    }
  }
  return labels;
}

/// Epoch-level reference label: the highest-priority channel label, with
/// priority SPSW > PLED > GPED > EYEM > ARTF > BCKG.
inline std::vector<EventLabel> epoch_labels(const std::vector<std::vector<EventLabel>>& cells) {
  std::vector<EventLabel> out;
  out.reserve(cells.size());
  for (const auto& row : cells) {
    EventLabel best = EventLabel::BCKG;
    for (EventLabel l : row)
      if (index_of(l) < index_of(best)) best = l;
    out.push_back(best);
  }
  return out;
}

/// Run-length encode per-epoch labels into all-channel (or single-channel)
/// events.
inline void append_runs(AnnotationSet& set, const std::vector<EventLabel>& labels, std::optional<int> channel,
                        double epoch_s = 1.0) {
  std::size_t i = 0;
  while (i < labels.size()) {
    std::size_t j = i + 1;
    while (j < labels.size() && labels[j] == labels[i]) ++j;
    set.events.push_back({channel, static_cast<double>(i) * epoch_s, static_cast<double>(j) * epoch_s, labels[i]});
    i = j;
  }
}

}  // namespace seqdet

#endif  // SEQDET_ANNOTATIONS_HPP
