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

#ifndef SEQDET_EVAL_HPP
#define SEQDET_EVAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "seqdet/error.hpp"
#include "seqdet/labels.hpp"

namespace seqdet {

enum class ScoringMode { six_way, four_way, two_way };
enum class ScoringBasis { per_channel_event, per_epoch };

inline std::string_view to_string(ScoringMode m) {
  switch (m) {
    case ScoringMode::six_way: return "six_way";
    case ScoringMode::four_way: return "four_way";
    case ScoringMode::two_way: return "two_way";
  }
  return "?";
}

inline std::string_view to_string(ScoringBasis b) {
  return b == ScoringBasis::per_epoch ? "per_epoch" : "per_channel_event";
}

inline std::size_t num_mode_labels(ScoringMode m) {
  return m == ScoringMode::six_way ? 6 : m == ScoringMode::four_way ? 4 : 2;
}

/// Collapsed label names in index order.
inline std::vector<std::string> mode_labels(ScoringMode m) {
  switch (m) {
    case ScoringMode::six_way: return {"SPSW", "PLED", "GPED", "EYEM", "ARTF", "BCKG"};
    case ScoringMode::four_way: return {"SPSW", "PLED", "GPED", "BCKG"};
    case ScoringMode::two_way: return {"TARG", "BCKG"};
  }
  return {};
}

/// Index of `label` in the mode's label set. Four-way folds ARTF, EYEM and
/// BCKG into BCKG; two-way maps SPSW, PLED, GPED to TARG and the rest to BCKG.
inline std::size_t collapse(EventLabel label, ScoringMode mode) {
  switch (mode) {
    case ScoringMode::six_way: return index_of(label);
    case ScoringMode::four_way: return is_epileptiform(label) ? index_of(label) : 3;
    case ScoringMode::two_way: return is_epileptiform(label) ? 0 : 1;
  }
  return 0;
}

/// Same mapping applied to an already-collapsed index (used to collapse
/// matrices between modes).
inline std::size_t collapse_index(std::size_t index, ScoringMode from, ScoringMode to) {
  if (from == to) return index;
  if (from == ScoringMode::six_way) return collapse(label_from_index(index), to);
  if (from == ScoringMode::four_way && to == ScoringMode::two_way) return index < 3 ? 0 : 1;
  throw UsageError("cannot expand a " + std::string(to_string(from)) + " matrix to " + std::string(to_string(to)));
}

struct ConfusionMatrix {
  ScoringMode mode = ScoringMode::six_way;
  ScoringBasis basis = ScoringBasis::per_epoch;
  std::size_t size = 6;
  std::vector<std::uint64_t> counts;  // [ref][hyp]

  ConfusionMatrix() : counts(36, 0) {}
  ConfusionMatrix(ScoringMode m, ScoringBasis b)
      : mode(m), basis(b), size(num_mode_labels(m)), counts(size * size, 0) {}

  std::uint64_t& at(std::size_t ref, std::size_t hyp) { return counts[ref * size + hyp]; }
  std::uint64_t at(std::size_t ref, std::size_t hyp) const { return counts[ref * size + hyp]; }

  std::uint64_t row_total(std::size_t ref) const {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < size; ++j) s += at(ref, j);
    return s;
  }
  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }
  std::uint64_t correct() const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < size; ++i) s += at(i, i);
    return s;
  }
  /// Row-normalized percentage; nullopt for an empty reference row.
  std::optional<double> percent(std::size_t ref, std::size_t hyp) const {
    const auto row = row_total(ref);
    if (row == 0) return std::nullopt;
    return 100.0 * static_cast<double>(at(ref, hyp)) / static_cast<double>(row);
  }
  double accuracy() const {
    return total() ? static_cast<double>(correct()) / static_cast<double>(total()) : 0.0;
  }

  /// A matrix whose rows reproduce the given percentages at `row_count`
  /// items per reference class.
  static ConfusionMatrix from_percentages(ScoringMode m, ScoringBasis b, const std::vector<std::vector<double>>& pct,
                                          std::uint64_t row_count = 10000) {
    ConfusionMatrix cm(m, b);
    if (pct.size() != cm.size) throw DataError("percentage table has the wrong number of rows");
    for (std::size_t i = 0; i < cm.size; ++i) {
      if (pct[i].size() != cm.size) throw DataError("percentage table has the wrong number of columns");
      for (std::size_t j = 0; j < cm.size; ++j)
        cm.at(i, j) = static_cast<std::uint64_t>(std::llround(pct[i][j] / 100.0 * static_cast<double>(row_count)));
    }
    return cm;
  }
};

inline ConfusionMatrix collapse_matrix(const ConfusionMatrix& m, ScoringMode to) {
  ConfusionMatrix out(to, m.basis);
  for (std::size_t i = 0; i < m.size; ++i)
    for (std::size_t j = 0; j < m.size; ++j)
      out.at(collapse_index(i, m.mode, to), collapse_index(j, m.mode, to)) += m.at(i, j);
  return out;
}

inline ConfusionMatrix confusion(const std::vector<EventLabel>& ref, const std::vector<EventLabel>& hyp,
                                 ScoringMode mode, ScoringBasis basis) {
  if (ref.size() != hyp.size())
    throw DataError("reference has " + std::to_string(ref.size()) + " items but hypothesis has " +
                    std::to_string(hyp.size()));
  ConfusionMatrix m(mode, basis);
  for (std::size_t i = 0; i < ref.size(); ++i) ++m.at(collapse(ref[i], mode), collapse(hyp[i], mode));
  return m;
}

struct SensSpec {
  std::optional<double> sensitivity;  // % of TARG references detected
  std::optional<double> false_alarm;  // % of BCKG references labelled TARG (reported as "specificity" in the clinical tables)
  std::optional<double> specificity;  // conventional: 100 - false_alarm
};

inline SensSpec sens_spec(const ConfusionMatrix& m) {
  const ConfusionMatrix two = m.mode == ScoringMode::two_way ? m : collapse_matrix(m, ScoringMode::two_way);
  SensSpec s;
  s.sensitivity = two.percent(0, 0);
  s.false_alarm = two.percent(1, 0);
  if (s.false_alarm) s.specificity = 100.0 - *s.false_alarm;
  return s;
}

struct DetPoint {
  double offset = 0.0;
  double false_alarm = 0.0;  // fraction of BCKG items classified TARG
  double miss = 0.0;         // fraction of TARG items classified BCKG
};

struct DetCurve {
  std::vector<DetPoint> points;  // sorted by offset

  const DetPoint* at_offset(double offset) const {
    for (const auto& p : points)
      if (p.offset == offset) return &p;
    return nullptr;
  }
};

/// `count` offsets spanning both always-BCKG and always-TARG corners, plus 0.
inline std::vector<double> default_offsets(std::size_t count = 50) {
  std::vector<double> out;
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(-0.55 + 1.1 * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(count - 1, 1)));
  return out;
}

/// Item i is classified TARG iff scores[i] + offset > 0.5.
inline DetCurve det_curve(const std::vector<double>& scores, const std::vector<bool>& is_target,
                          std::vector<double> offsets) {
  if (scores.size() != is_target.size()) throw DataError("DET: score and reference counts differ");
  offsets.push_back(0.0);
  std::sort(offsets.begin(), offsets.end());
  offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());
  std::size_t targets = 0;
  for (bool t : is_target) targets += t;
  const std::size_t nontargets = is_target.size() - targets;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  DetCurve curve;
  for (double off : offsets) {
    std::size_t fa = 0, miss = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const bool hyp = scores[i] + off > 0.5;
      if (is_target[i] && !hyp) ++miss;
      if (!is_target[i] && hyp) ++fa;
    }
    curve.points.push_back({off, nontargets ? static_cast<double>(fa) / static_cast<double>(nontargets) : nan,
                            targets ? static_cast<double>(miss) / static_cast<double>(targets) : nan});
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Reports

inline std::string format_percent(std::optional<double> v) {
  if (!v) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << *v;
  return os.str();
}

/// Plain-text table: one row per reference class, row-normalized percentages.
inline void write_report(const ConfusionMatrix& m, std::ostream& out) {
  const auto names = mode_labels(m.mode);
  out << "mode: " << to_string(m.mode) << "  basis: " << to_string(m.basis) << "  items: " << m.total() << '\n';
  if (m.basis == ScoringBasis::per_epoch)
    out << "epoch reference: highest-priority channel label (SPSW > PLED > GPED > EYEM > ARTF > BCKG)\n";
  out << std::left << std::setw(8) << "Event";
  for (const auto& n : names) out << std::right << std::setw(9) << n;
  out << '\n';
  for (std::size_t i = 0; i < m.size; ++i) {
    out << std::left << std::setw(8) << names[i];
    for (std::size_t j = 0; j < m.size; ++j) out << std::right << std::setw(9) << format_percent(m.percent(i, j));
    out << '\n';
  }
  out << "accuracy: " << format_percent(100.0 * m.accuracy()) << '\n';
  const auto s = sens_spec(m);
  out << "sensitivity: " << format_percent(s.sensitivity) << "  false_alarm: " << format_percent(s.false_alarm)
      << "  specificity(1-FA): " << format_percent(s.specificity) << '\n';
}

inline void write_report_csv(const ConfusionMatrix& m, std::ostream& out) {
  const auto names = mode_labels(m.mode);
  out << "ref,hyp,count,percent\n";
  for (std::size_t i = 0; i < m.size; ++i)
    for (std::size_t j = 0; j < m.size; ++j)
      out << names[i] << ',' << names[j] << ',' << m.at(i, j) << ',' << format_percent(m.percent(i, j)) << '\n';
}

inline void write_det_csv(const DetCurve& c, std::ostream& out) {
  out << "offset,false_alarm,miss\n";
  out.precision(10);
  for (const auto& p : c.points) out << p.offset << ',' << p.false_alarm << ',' << p.miss << '\n';
}

}  // namespace seqdet

#endif  // SEQDET_EVAL_HPP
