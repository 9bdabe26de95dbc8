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

#ifndef SEQDET_GRAMMAR_HPP
#define SEQDET_GRAMMAR_HPP

#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "seqdet/annotations.hpp"
#include "seqdet/error.hpp"
#include "seqdet/labels.hpp"

namespace seqdet {

/// prob[i][j]: probability of moving from label i to label j.
struct BigramTable {
  std::array<ClassVector, kNumClasses> prob{};

  double operator()(EventLabel from, EventLabel to) const { return prob[index_of(from)][index_of(to)]; }
  bool operator==(const BigramTable&) const = default;
};

/// Rescales rows to sum to one and returns a note for each row that needed it.
inline std::vector<std::string> normalize_rows(BigramTable& t) {
  std::vector<std::string> notes;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      if (!(t.prob[i][j] >= 0.0)) throw DataError("bigram table has a negative or NaN entry");
      sum += t.prob[i][j];
    }
    if (!(sum > 0.0)) throw DataError("bigram row " + std::string(to_string(label_from_index(i))) + " sums to zero");
    if (std::abs(sum - 1.0) > 1e-9) {
      std::ostringstream os;
      os << "bigram row " << to_string(label_from_index(i)) << " sums to " << sum << "; renormalized";
      notes.push_back(os.str());
      for (auto& v : t.prob[i]) v /= sum;
    }
  }
  return notes;
}

/// The clinical transition table exactly as published (ARTF and BCKG rows
/// sum to 1.02).
inline BigramTable clinical_bigram_raw() {
  BigramTable t;
  //         SPSW  PLED  GPED  EYEM  ARTF  BCKG
  t.prob = {{{0.40, 0.00, 0.00, 0.10, 0.20, 0.30},
             {0.00, 0.90, 0.00, 0.00, 0.05, 0.05},
             {0.00, 0.00, 0.60, 0.00, 0.20, 0.20},
             {0.10, 0.00, 0.00, 0.40, 0.10, 0.40},
             {0.23, 0.05, 0.05, 0.23, 0.23, 0.23},
             {0.33, 0.05, 0.05, 0.23, 0.13, 0.23}}};
  return t;
}

/// The published table with rows renormalized; the adjustment is logged once.
inline BigramTable default_bigram() {
  BigramTable t = clinical_bigram_raw();
  const auto notes = normalize_rows(t);
  static bool logged = false;
  if (!logged) {
    for (const auto& n : notes) std::clog << "warning: " << n << '\n';
    logged = true;
  }
  return t;
}

/// Row-normalized transition counts with add-k smoothing.
inline BigramTable estimate_bigram(const std::vector<std::vector<EventLabel>>& sequences, double smoothing = 0.1) {
  BigramTable t;
  std::size_t transitions = 0;
  for (const auto& seq : sequences)
    for (std::size_t i = 1; i < seq.size(); ++i, ++transitions) t.prob[index_of(seq[i - 1])][index_of(seq[i])] += 1.0;
  if (transitions == 0) throw DataError("cannot estimate a bigram table: no label transitions observed");
  for (auto& row : t.prob)
    for (auto& v : row) v += smoothing;
  normalize_rows(t);
  return t;
}

inline void write_bigram(const BigramTable& t, std::ostream& out) {
  out << "from";
  for (EventLabel l : kAllLabels) out << ',' << to_string(l);
  out << '\n';
  out.precision(17);
  for (EventLabel from : kAllLabels) {
    out << to_string(from);
    for (EventLabel to : kAllLabels) out << ',' << t(from, to);
    out << '\n';
  }
}

inline BigramTable read_bigram(std::istream& in, const std::string& name = "bigram") {
  std::string line;
  if (!std::getline(in, line) || detail::strip_cr(line) != "from,SPSW,PLED,GPED,EYEM,ARTF,BCKG")
    throw DataError(name + ": header must be 'from,SPSW,PLED,GPED,EYEM,ARTF,BCKG'");
  BigramTable t;
  for (EventLabel from : kAllLabels) {
    if (!std::getline(in, line)) throw DataError(name + ": missing row " + std::string(to_string(from)));
    auto f = detail::split(detail::strip_cr(line), ',');
    if (f.size() != kNumClasses + 1 || f[0] != to_string(from))
      throw DataError(name + ": row for " + std::string(to_string(from)) + " malformed or out of order");
    for (std::size_t j = 0; j < kNumClasses; ++j) t.prob[index_of(from)][j] = detail::parse_double_field(f[j + 1], name);
  }
  for (const auto& n : normalize_rows(t)) std::clog << "warning: " << name << ": " << n << '\n';
  return t;
}

struct GrammarParams {
  double epsilon_prior = 0.1;  // broadcast over the six classes
  double prior_weight = 1.0;   // M
  double decay = 0.2;          // lambda
  double prior_blend = 0.1;    // alpha
  double grammar_weight = 1.0; // gamma
  std::size_t iterations = 20;
  std::size_t window = 10;

  void validate() const {
    if (epsilon_prior < 0 || prior_weight < 0 || decay < 0 || prior_blend < 0 || grammar_weight < 0)
      throw UsageError("grammar weights must be non-negative");
    if (window < 1) throw UsageError("grammar context window must be >= 1");
    if (iterations < 1) throw UsageError("grammar needs at least one iteration");
  }
};

using PosteriorSequence = std::vector<ClassVector>;

inline ClassVector normalized(ClassVector p) {
  double s = 0.0;
  for (double v : p) s += v;
  if (s > 0.0)
    for (double& v : p) v /= s;
  return p;
}

/// (sum_i P_i + eps M) / (L + M), renormalized.
inline ClassVector global_prior(const PosteriorSequence& seq, const GrammarParams& params) {
  ClassVector g{};
  for (const auto& p : seq)
    for (std::size_t k = 0; k < kNumClasses; ++k) g[k] += p[k];
  const double denom = static_cast<double>(seq.size()) + params.prior_weight;
  for (auto& v : g) v = (v + params.epsilon_prior * params.prior_weight) / denom;
  return normalized(g);
}

enum class ContextSide { left, right };

/// Exponentially decayed average of up to `window` neighbours on one side,
/// blended with alpha * global prior. Missing neighbours are skipped and the
/// decay weights renormalized; with no neighbours the global prior is used.
inline ClassVector context_probs(const PosteriorSequence& seq, std::size_t k, ContextSide side,
                                 const GrammarParams& params, const ClassVector& gprior) {
  ClassVector acc{};
  double wsum = 0.0;
  for (std::size_t i = 1; i <= params.window; ++i) {
    std::size_t idx;
    if (side == ContextSide::left) {
      if (i > k) break;
      idx = k - i;
    } else {
      idx = k + i;
      if (idx >= seq.size()) break;
    }
    const double w = std::exp(-static_cast<double>(i) * params.decay);
    wsum += w;
    for (std::size_t c = 0; c < kNumClasses; ++c) acc[c] += w * seq[idx][c];
  }
  if (wsum == 0.0) return gprior;
  ClassVector out;
  for (std::size_t c = 0; c < kNumClasses; ++c)
    out[c] = (acc[c] / wsum + params.prior_blend * gprior[c]) / (1.0 + params.prior_blend);
  return normalized(out);
}

inline ClassVector context_probs(const PosteriorSequence& seq, std::size_t k, ContextSide side,
                                 const GrammarParams& params) {
  return context_probs(seq, k, side, params, global_prior(seq, params));
}

/// One Bayesian context update at iteration `iteration` (1-based):
/// P'_k ∝ P_k (sum_i sum_j LPP(i) RPP(j) Prob(i,k) Prob(k,j))^(gamma/n).
inline PosteriorSequence grammar_update(const PosteriorSequence& seq, const BigramTable& table,
                                        const GrammarParams& params, std::size_t iteration = 1) {
  if (iteration == 0) throw UsageError("grammar iterations are counted from 1");
  const ClassVector gprior = global_prior(seq, params);
  const double exponent = params.grammar_weight / static_cast<double>(iteration);
  PosteriorSequence out(seq.size());
  for (std::size_t e = 0; e < seq.size(); ++e) {
    const ClassVector lpp = context_probs(seq, e, ContextSide::left, params, gprior);
    const ClassVector rpp = context_probs(seq, e, ContextSide::right, params, gprior);
    ClassVector p{};
    double sum = 0.0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      double left = 0.0, right = 0.0;
      for (std::size_t i = 0; i < kNumClasses; ++i) left += lpp[i] * table.prob[i][k];
      for (std::size_t j = 0; j < kNumClasses; ++j) right += table.prob[k][j] * rpp[j];
      p[k] = seq[e][k] * std::pow(left * right, exponent);
      sum += p[k];
    }
    // A context that rules out every class with prior mass leaves the epoch unchanged.
    out[e] = sum > 0.0 ? normalized(p) : seq[e];
  }
  return out;
}

inline std::vector<EventLabel> argmax_labels(const PosteriorSequence& seq) {
  std::vector<EventLabel> labels;
  labels.reserve(seq.size());
  for (const auto& p : seq) labels.push_back(label_from_index(argmax(p)));
  return labels;
}

struct Pass3Result {
  PosteriorSequence posteriors;
  std::vector<EventLabel> labels;
  std::size_t iterations = 0;
};

/// Iterates grammar_update until no argmax label changes or the iteration
/// limit is reached.
inline Pass3Result decode_pass3(const PosteriorSequence& seq, const BigramTable& table, const GrammarParams& params) {
  params.validate();
  Pass3Result r{seq, argmax_labels(seq), 0};
  if (seq.empty()) return r;
  for (std::size_t n = 1; n <= params.iterations; ++n) {
    r.posteriors = grammar_update(r.posteriors, table, params, n);
    r.iterations = n;
    auto labels = argmax_labels(r.posteriors);
    const bool converged = labels == r.labels;
    r.labels = std::move(labels);
    if (converged) break;
  }
  return r;
}

}  // namespace seqdet

#endif  // SEQDET_GRAMMAR_HPP
