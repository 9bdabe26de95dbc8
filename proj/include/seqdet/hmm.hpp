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

#ifndef SEQDET_HMM_HPP
#define SEQDET_HMM_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqdet/container.hpp"
#include "seqdet/error.hpp"
#include "seqdet/features.hpp"
#include "seqdet/labels.hpp"
#include "seqdet/rng.hpp"

namespace seqdet {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kMinVariance = 1e-6;

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

inline double log_sum_exp(std::span<const double> v) {
  double mx = kNegInf;
  for (double x : v) mx = std::max(mx, x);
  if (mx == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

inline double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

/// A read-only view of T consecutive feature vectors of dimension `dim`.
class ObservationView {
 public:
  ObservationView(std::span<const double> data, std::size_t dim) : data_(data), dim_(dim) {
    if (dim == 0 || data.size() % dim != 0 || data.empty())
      throw DataError("observation sequence length is not a positive multiple of the feature dimension");
  }
  std::size_t length() const { return data_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> frame(std::size_t t) const { return data_.subspan(t * dim_, dim_); }

 private:
  std::span<const double> data_;
  std::size_t dim_;
};

/// Diagonal-covariance Gaussian mixture.
struct GaussianMixture {
  std::size_t dim = 0;
  std::vector<double> weights;    // L
  std::vector<double> means;      // L x dim
  std::vector<double> variances;  // L x dim
  std::vector<double> log_norm;   // log w_m - 0.5 (dim log 2pi + sum log var)

  std::size_t num_components() const { return weights.size(); }

  void refresh() {
    log_norm.assign(weights.size(), 0.0);
    const double c = static_cast<double>(dim) * std::log(2.0 * std::numbers::pi);
    for (std::size_t m = 0; m < weights.size(); ++m) {
      double logdet = 0.0;
      for (std::size_t d = 0; d < dim; ++d) logdet += std::log(variances[m * dim + d]);
      log_norm[m] = safe_log(weights[m]) - 0.5 * (c + logdet);
    }
  }

  /// log(w_m N(x; mu_m, var_m)).
  double weighted_component_log_density(std::size_t m, std::span<const double> x) const {
    if (log_norm[m] == kNegInf) return kNegInf;
    const double* mu = means.data() + m * dim;
    const double* var = variances.data() + m * dim;
    double q = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = x[d] - mu[d];
      q += diff * diff / var[d];
    }
    return log_norm[m] - 0.5 * q;
  }

  double log_density(std::span<const double> x) const {
    double acc = kNegInf;
    for (std::size_t m = 0; m < weights.size(); ++m) acc = log_sum_exp(acc, weighted_component_log_density(m, x));
    return acc;
  }
};

/// Left-to-right GMM-HMM with state emissions. The chain starts in state 0
/// and may end in any state; a_ij = 0 unless j is i or i + 1.
struct GmmHmmModel {
  EventLabel label = EventLabel::BCKG;
  std::size_t num_states = 0;
  std::size_t dim = 0;
  std::vector<double> transitions;  // num_states x num_states, row-stochastic
  std::vector<GaussianMixture> states;
  std::vector<double> variance_floor;  // dim

  double transition(std::size_t i, std::size_t j) const { return transitions[i * num_states + j]; }
  double log_transition(std::size_t i, std::size_t j) const { return safe_log(transition(i, j)); }

  bool operator==(const GmmHmmModel& o) const {
    if (label != o.label || num_states != o.num_states || dim != o.dim || transitions != o.transitions ||
        variance_floor != o.variance_floor || states.size() != o.states.size())
      return false;
    for (std::size_t s = 0; s < states.size(); ++s)
      if (states[s].weights != o.states[s].weights || states[s].means != o.states[s].means ||
          states[s].variances != o.states[s].variances)
        return false;
    return true;
  }
};

/// log b_j(o_t), T x N.
inline std::vector<double> emission_log_likelihoods(const GmmHmmModel& model, const ObservationView& obs) {
  if (obs.dim() != model.dim)
    throw DataError("observation dimension " + std::to_string(obs.dim()) + " does not match model dimension " +
                    std::to_string(model.dim));
  const std::size_t n = model.num_states;
  std::vector<double> out(obs.length() * n);
  for (std::size_t t = 0; t < obs.length(); ++t)
    for (std::size_t j = 0; j < n; ++j) out[t * n + j] = model.states[j].log_density(obs.frame(t));
  return out;
}

struct ForwardBackwardResult {
  std::vector<double> log_alpha;  // T x N
  std::vector<double> log_beta;   // T x N
  std::vector<double> log_emission;
  double log_likelihood = kNegInf;
};

inline ForwardBackwardResult forward_backward(const GmmHmmModel& model, const ObservationView& obs) {
  const std::size_t n = model.num_states;
  const std::size_t len = obs.length();
  ForwardBackwardResult r;
  r.log_emission = emission_log_likelihoods(model, obs);
  const auto& lb = r.log_emission;
  r.log_alpha.assign(len * n, kNegInf);
  r.log_beta.assign(len * n, kNegInf);

  r.log_alpha[0] = lb[0];
  for (std::size_t t = 1; t < len; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = kNegInf;
      for (std::size_t i = (j == 0 ? 0 : j - 1); i <= j; ++i)
        acc = log_sum_exp(acc, r.log_alpha[(t - 1) * n + i] + model.log_transition(i, j));
      r.log_alpha[t * n + j] = acc + lb[t * n + j];
    }
  }
  for (std::size_t j = 0; j < n; ++j) r.log_beta[(len - 1) * n + j] = 0.0;
  for (std::size_t t = len - 1; t-- > 0;) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = kNegInf;
      for (std::size_t j = i; j < std::min(n, i + 2); ++j)
        acc = log_sum_exp(acc, model.log_transition(i, j) + lb[(t + 1) * n + j] + r.log_beta[(t + 1) * n + j]);
      r.log_beta[t * n + i] = acc;
    }
  }
  r.log_likelihood = log_sum_exp(std::span<const double>(r.log_alpha).subspan((len - 1) * n, n));
  return r;
}

inline double log_likelihood(const GmmHmmModel& model, const ObservationView& obs) {
  return forward_backward(model, obs).log_likelihood;
}

struct ViterbiResult {
  std::vector<std::size_t> path;
  double log_score = kNegInf;
};

inline ViterbiResult viterbi(const GmmHmmModel& model, const ObservationView& obs) {
  const std::size_t n = model.num_states;
  const std::size_t len = obs.length();
  const auto lb = emission_log_likelihoods(model, obs);
  std::vector<double> delta(len * n, kNegInf);
  std::vector<std::size_t> back(len * n, 0);
  delta[0] = lb[0];
  for (std::size_t t = 1; t < len; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      double best = kNegInf;
      std::size_t arg = j;
      for (std::size_t i = (j == 0 ? 0 : j - 1); i <= j; ++i) {
        const double v = delta[(t - 1) * n + i] + model.log_transition(i, j);
        if (v > best) {
          best = v;
          arg = i;
        }
      }
      delta[t * n + j] = best + lb[t * n + j];
      back[t * n + j] = arg;
    }
  }
  ViterbiResult r;
  std::size_t last = 0;
  for (std::size_t j = 0; j < n; ++j)
    if (delta[(len - 1) * n + j] > delta[(len - 1) * n + last]) last = j;
  r.log_score = delta[(len - 1) * n + last];
  r.path.assign(len, 0);
  r.path[len - 1] = last;
  for (std::size_t t = len - 1; t > 0; --t) r.path[t - 1] = back[t * n + r.path[t]];
  return r;
}

// ---------------------------------------------------------------------------
// Baum-Welch

/// Sufficient statistics for one model. Accumulators over disjoint data can
/// be merged; merging in a fixed order keeps results reproducible.
struct HmmAccumulator {
  std::size_t num_states = 0, num_components = 0, dim = 0;
  std::vector<double> transition_counts;  // N x N
  std::vector<double> occupancy;          // N x L
  std::vector<double> sum_x;              // N x L x D
  std::vector<double> sum_xx;             // N x L x D
  double log_likelihood = 0.0;
  std::size_t frames = 0;
  std::size_t sequences = 0;

  HmmAccumulator() = default;
  explicit HmmAccumulator(const GmmHmmModel& m)
      : num_states(m.num_states), num_components(m.states.front().num_components()), dim(m.dim),
        transition_counts(num_states * num_states, 0.0), occupancy(num_states * num_components, 0.0),
        sum_x(num_states * num_components * dim, 0.0), sum_xx(num_states * num_components * dim, 0.0) {}

  void merge(const HmmAccumulator& o) {
    for (std::size_t i = 0; i < transition_counts.size(); ++i) transition_counts[i] += o.transition_counts[i];
    for (std::size_t i = 0; i < occupancy.size(); ++i) occupancy[i] += o.occupancy[i];
    for (std::size_t i = 0; i < sum_x.size(); ++i) {
      sum_x[i] += o.sum_x[i];
      sum_xx[i] += o.sum_xx[i];
    }
    log_likelihood += o.log_likelihood;
    frames += o.frames;
    sequences += o.sequences;
  }
};

/// E-step for one sequence.
inline void accumulate(const GmmHmmModel& model, const ObservationView& obs, HmmAccumulator& acc) {
  const auto fb = forward_backward(model, obs);
  if (!std::isfinite(fb.log_likelihood))
    throw NumericError("non-finite sequence likelihood while training " + std::string(to_string(model.label)));
  const std::size_t n = model.num_states;
  const std::size_t len = obs.length();
  const std::size_t nm = acc.num_components;
  const std::size_t dim = model.dim;
  std::vector<double> comp(nm);
  for (std::size_t t = 0; t < len; ++t) {
    const auto x = obs.frame(t);
    for (std::size_t j = 0; j < n; ++j) {
      const double log_gamma = fb.log_alpha[t * n + j] + fb.log_beta[t * n + j] - fb.log_likelihood;
      if (log_gamma == kNegInf) continue;
      const double gamma = std::exp(log_gamma);
      const auto& gmm = model.states[j];
      const double lb = fb.log_emission[t * n + j];
      for (std::size_t m = 0; m < nm; ++m) {
        const double lc = gmm.weighted_component_log_density(m, x);
        if (lc == kNegInf) continue;
        const double r = gamma * std::exp(lc - lb);
        acc.occupancy[j * nm + m] += r;
        double* sx = acc.sum_x.data() + (j * nm + m) * dim;
        double* sxx = acc.sum_xx.data() + (j * nm + m) * dim;
        for (std::size_t d = 0; d < dim; ++d) {
          sx[d] += r * x[d];
          sxx[d] += r * x[d] * x[d];
        }
      }
    }
    if (t + 1 < len) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < std::min(n, i + 2); ++j) {
          const double lx = fb.log_alpha[t * n + i] + model.log_transition(i, j) +
                            fb.log_emission[(t + 1) * n + j] + fb.log_beta[(t + 1) * n + j] - fb.log_likelihood;
          if (lx != kNegInf) acc.transition_counts[i * n + j] += std::exp(lx);
        }
      }
    }
  }
  acc.log_likelihood += fb.log_likelihood;
  acc.frames += len;
  acc.sequences += 1;
}

/// M-step. Rows, mixtures or components that received no occupancy keep
/// their previous parameters.
inline GmmHmmModel maximize(const GmmHmmModel& model, const HmmAccumulator& acc) {
  GmmHmmModel out = model;
  const std::size_t n = model.num_states;
  const std::size_t nm = acc.num_components;
  const std::size_t dim = model.dim;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += acc.transition_counts[i * n + j];
    if (row > 0.0)
      for (std::size_t j = 0; j < n; ++j) out.transitions[i * n + j] = acc.transition_counts[i * n + j] / row;
  }
  for (std::size_t j = 0; j < n; ++j) {
    auto& gmm = out.states[j];
    double state_occ = 0.0;
    for (std::size_t m = 0; m < nm; ++m) state_occ += acc.occupancy[j * nm + m];
    if (!(state_occ > 0.0)) continue;
    for (std::size_t m = 0; m < nm; ++m) {
      const double occ = acc.occupancy[j * nm + m];
      gmm.weights[m] = occ / state_occ;
      if (!(occ > 0.0)) continue;
      const double* sx = acc.sum_x.data() + (j * nm + m) * dim;
      const double* sxx = acc.sum_xx.data() + (j * nm + m) * dim;
      for (std::size_t d = 0; d < dim; ++d) {
        const double mu = sx[d] / occ;
        gmm.means[m * dim + d] = mu;
        gmm.variances[m * dim + d] = std::max(sxx[d] / occ - mu * mu, model.variance_floor[d]);
      }
    }
    gmm.refresh();
  }
  return out;
}

struct ReestimateResult {
  GmmHmmModel model;
  double log_likelihood = 0.0;  // corpus log-likelihood under the input model
  std::size_t frames = 0;
};

/// One Baum-Welch iteration of one model over its training sequences.
inline ReestimateResult reestimate(const GmmHmmModel& model, const std::vector<ObservationView>& corpus) {
  if (corpus.empty())
    throw DataError("cannot reestimate " + std::string(to_string(model.label)) + ": no training epochs");
  HmmAccumulator acc(model);
  for (const auto& obs : corpus) accumulate(model, obs, acc);
  return {maximize(model, acc), acc.log_likelihood, acc.frames};
}

/// One Baum-Welch iteration over all class models; corpus[k] holds the
/// epochs labelled with class k.
template <std::size_t K>
std::array<ReestimateResult, K> reestimate(const std::array<GmmHmmModel, K>& models,
                                           const std::array<std::vector<ObservationView>, K>& corpus) {
  std::array<ReestimateResult, K> out;
  for (std::size_t k = 0; k < K; ++k) out[k] = reestimate(models[k], corpus[k]);
  return out;
}

// ---------------------------------------------------------------------------
// Initialization

struct KMeansResult {
  std::vector<double> centroids;  // k x dim
  std::vector<std::size_t> assignment;
  std::vector<std::size_t> counts;
};

inline double squared_distance(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t d = 0; d < dim; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return s;
}

/// k-means++ seeding followed by Lloyd iterations. `points` is n x dim.
inline KMeansResult kmeans(const std::vector<double>& points, std::size_t dim, std::size_t k, Rng& rng,
                           std::size_t max_iterations = 50) {
  const std::size_t n = points.size() / dim;
  if (n == 0 || k == 0) throw DataError("k-means needs at least one point and one cluster");
  KMeansResult r;
  r.centroids.assign(k * dim, 0.0);
  r.assignment.assign(n, 0);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t pick = 0;
    if (c == 0) {
      pick = uniform_index(rng, n);
    } else {
      double total = 0.0;
      for (double d : nearest) total += d;
      if (total > 0.0) {
        double u = uniform01(rng) * total;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          u -= nearest[i];
          if (u < 0.0) {
            pick = i;
            break;
          }
        }
      } else {
        pick = uniform_index(rng, n);
      }
    }
    std::copy_n(points.begin() + static_cast<long>(pick * dim), dim, r.centroids.begin() + static_cast<long>(c * dim));
    for (std::size_t i = 0; i < n; ++i)
      nearest[i] = std::min(nearest[i], squared_distance(&points[i * dim], &r.centroids[c * dim], dim));
  }

  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    bool changed = iter == 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(&points[i * dim], &r.centroids[c * dim], dim);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (r.assignment[i] != best) changed = true;
      r.assignment[i] = best;
    }
    if (!changed) break;
    std::vector<double> sums(k * dim, 0.0);
    r.counts.assign(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++r.counts[r.assignment[i]];
      for (std::size_t d = 0; d < dim; ++d) sums[r.assignment[i] * dim + d] += points[i * dim + d];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (r.counts[c] > 0)
        for (std::size_t d = 0; d < dim; ++d) r.centroids[c * dim + d] = sums[c * dim + d] / static_cast<double>(r.counts[c]);
  }
  r.counts.assign(k, 0);
  for (std::size_t i = 0; i < n; ++i) ++r.counts[r.assignment[i]];
  return r;
}

struct HmmConfig {
  std::size_t num_states = 3;
  std::size_t num_mixtures = 8;
  std::size_t max_iterations = 20;
  double tolerance_per_frame = 1e-4;
  double variance_floor_scale = 1e-3;
  std::uint64_t seed = 1;
};

/// Uniform left-to-right transitions, uniform temporal segmentation of the
/// training epochs into states, and k-means mixtures per state.
inline GmmHmmModel init_model(EventLabel label, std::size_t num_states, std::size_t num_mixtures,
                              const std::vector<ObservationView>& corpus, std::uint64_t seed,
                              double variance_floor_scale = 1e-3) {
  if (num_states == 0 || num_mixtures == 0) throw UsageError("HMM needs at least one state and one mixture");
  if (corpus.empty()) throw DataError("no training data for " + std::string(to_string(label)));
  const std::size_t dim = corpus.front().dim();
  std::size_t total = 0;
  for (const auto& o : corpus) total += o.length();
  if (total < num_states * num_mixtures)
    throw DataError("insufficient data for " + std::string(to_string(label)) + ": " + std::to_string(total) +
                    " vectors, need at least " + std::to_string(num_states * num_mixtures));

  GmmHmmModel model;
  model.label = label;
  model.num_states = num_states;
  model.dim = dim;
  model.transitions.assign(num_states * num_states, 0.0);
  for (std::size_t i = 0; i < num_states; ++i) {
    if (i + 1 < num_states) {
      model.transitions[i * num_states + i] = 0.5;
      model.transitions[i * num_states + i + 1] = 0.5;
    } else {
      model.transitions[i * num_states + i] = 1.0;
    }
  }

  std::vector<double> mean(dim, 0.0), var(dim, 0.0);
  for (const auto& o : corpus)
    for (std::size_t t = 0; t < o.length(); ++t)
      for (std::size_t d = 0; d < dim; ++d) mean[d] += o.frame(t)[d];
  for (auto& m : mean) m /= static_cast<double>(total);
  for (const auto& o : corpus)
    for (std::size_t t = 0; t < o.length(); ++t)
      for (std::size_t d = 0; d < dim; ++d) var[d] += (o.frame(t)[d] - mean[d]) * (o.frame(t)[d] - mean[d]);
  model.variance_floor.resize(dim);
  for (std::size_t d = 0; d < dim; ++d)
    model.variance_floor[d] = std::max(variance_floor_scale * var[d] / static_cast<double>(total), kMinVariance);

  std::vector<std::vector<double>> pools(num_states);
  for (const auto& o : corpus) {
    const std::size_t len = o.length();
    for (std::size_t t = 0; t < len; ++t) {
      const std::size_t s = std::min(num_states - 1, t * num_states / len);
      const auto f = o.frame(t);
      pools[s].insert(pools[s].end(), f.begin(), f.end());
    }
  }

  Rng rng(seed);
  model.states.resize(num_states);
  for (std::size_t s = 0; s < num_states; ++s) {
    // Sequences shorter than the state count leave trailing states empty;
    // they borrow the previous state's frames.
    const std::vector<double>* pool = &pools[s];
    for (std::size_t back = s; pool->empty() && back > 0; --back) pool = &pools[back - 1];
    const std::size_t n = pool->size() / dim;
    auto km = kmeans(*pool, dim, num_mixtures, rng);
    GaussianMixture& g = model.states[s];
    g.dim = dim;
    g.weights.assign(num_mixtures, 0.0);
    g.means = km.centroids;
    g.variances.assign(num_mixtures * dim, 0.0);
    std::vector<double> mvar(num_mixtures * dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = km.assignment[i];
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = (*pool)[i * dim + d] - km.centroids[c * dim + d];
        mvar[c * dim + d] += diff * diff;
      }
    }
    // Empty clusters get a small weight so they stay trainable.
    constexpr double kEmptyWeight = 1e-5;
    double wsum = 0.0;
    for (std::size_t c = 0; c < num_mixtures; ++c) {
      g.weights[c] = km.counts[c] > 0 ? static_cast<double>(km.counts[c]) / static_cast<double>(n) : kEmptyWeight;
      wsum += g.weights[c];
      for (std::size_t d = 0; d < dim; ++d) {
        const double v = km.counts[c] > 0 ? mvar[c * dim + d] / static_cast<double>(km.counts[c]) : 0.0;
        g.variances[c * dim + d] = std::max(v, model.variance_floor[d]);
      }
    }
    for (auto& w : g.weights) w /= wsum;
    g.refresh();
  }
  return model;
}

struct TrainingHistory {
  std::vector<double> log_likelihoods;  // corpus log-likelihood before each M-step
  std::size_t frames = 0;
};

/// init_model followed by Baum-Welch until the per-frame gain drops below
/// the tolerance or the iteration limit is reached.
inline GmmHmmModel train_model(EventLabel label, const std::vector<ObservationView>& corpus,
                               const HmmConfig& config, TrainingHistory* history = nullptr) {
  GmmHmmModel model = init_model(label, config.num_states, config.num_mixtures, corpus,
                                 config.seed + 0x9e3779b97f4a7c15ull * (index_of(label) + 1),
                                 config.variance_floor_scale);
  std::optional<double> previous;
  for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
    auto step = reestimate(model, corpus);
    if (history) {
      history->log_likelihoods.push_back(step.log_likelihood);
      history->frames = step.frames;
    }
    const bool converged =
        previous && (step.log_likelihood - *previous) / static_cast<double>(step.frames) < config.tolerance_per_frame;
    previous = step.log_likelihood;
    model = std::move(step.model);
    if (converged) break;
  }
  return model;
}

using HmmSet = std::array<GmmHmmModel, kNumClasses>;
using EpochCorpus = std::array<std::vector<ObservationView>, kNumClasses>;

inline HmmSet train(const EpochCorpus& corpus, const HmmConfig& config) {
  std::string missing;
  for (EventLabel l : kAllLabels)
    if (corpus[index_of(l)].empty()) missing += (missing.empty() ? "" : ", ") + std::string(to_string(l));
  if (!missing.empty()) throw DataError("training data lacks classes: " + missing);
  HmmSet models;
  for (EventLabel l : kAllLabels) models[index_of(l)] = train_model(l, corpus[index_of(l)], config);
  return models;
}

// ---------------------------------------------------------------------------
// Scoring

inline ClassVector uniform_priors() {
  ClassVector p;
  p.fill(1.0 / kNumClasses);
  return p;
}

/// Normalized exp of log scores; invariant to adding a constant.
inline ClassVector softmax(const ClassVector& log_scores) {
  double mx = kNegInf;
  for (double v : log_scores) mx = std::max(mx, v);
  ClassVector p{};
  if (mx == kNegInf) return uniform_priors();
  double sum = 0.0;
  for (std::size_t k = 0; k < kNumClasses; ++k) sum += p[k] = std::exp(log_scores[k] - mx);
  for (auto& v : p) v /= sum;
  return p;
}

inline ClassVector score_epoch(const HmmSet& models, const ObservationView& obs,
                               const ClassVector& priors = uniform_priors()) {
  ClassVector scores;
  for (std::size_t k = 0; k < kNumClasses; ++k) scores[k] = log_likelihood(models[k], obs) + safe_log(priors[k]);
  return softmax(scores);
}

/// Epochs x channels x 6 posteriors.
class PosteriorGrid {
 public:
  PosteriorGrid() = default;
  PosteriorGrid(std::size_t epochs, std::size_t channels)
      : epochs_(epochs), channels_(channels), data_(epochs * channels, uniform_priors()) {}

  std::size_t num_epochs() const { return epochs_; }
  std::size_t num_channels() const { return channels_; }
  ClassVector& at(std::size_t e, std::size_t c) { return data_[e * channels_ + c]; }
  const ClassVector& at(std::size_t e, std::size_t c) const { return data_[e * channels_ + c]; }
  EventLabel label(std::size_t e, std::size_t c) const { return label_from_index(argmax(at(e, c))); }

  bool operator==(const PosteriorGrid&) const = default;

 private:
  std::size_t epochs_ = 0;
  std::size_t channels_ = 0;
  std::vector<ClassVector> data_;
};

inline PosteriorGrid decode_pass1(const FeatureGrid& grid, const HmmSet& models,
                                  const ClassVector& priors = uniform_priors()) {
  PosteriorGrid out(grid.num_epochs(), grid.num_channels());
  for (std::size_t e = 0; e < grid.num_epochs(); ++e)
    for (std::size_t c = 0; c < grid.num_channels(); ++c)
      out.at(e, c) = score_epoch(models, ObservationView(grid.epoch(c, e), kFeatureDim), priors);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline void serialize(const GmmHmmModel& m, ByteWriter& w) {
  w.put_u8(static_cast<std::uint8_t>(m.label));
  w.put_u64(m.num_states);
  w.put_u64(m.dim);
  w.put_u64(m.states.front().num_components());
  w.put_f64s(m.transitions);
  w.put_f64s(m.variance_floor);
  for (const auto& g : m.states) {
    w.put_f64s(g.weights);
    w.put_f64s(g.means);
    w.put_f64s(g.variances);
  }
}

inline GmmHmmModel deserialize_hmm(ByteReader& r) {
  GmmHmmModel m;
  m.label = label_from_index(r.get_u8());
  m.num_states = r.get_u64();
  m.dim = r.get_u64();
  const std::size_t nm = r.get_u64();
  if (m.num_states == 0 || m.num_states > 64 || m.dim == 0 || nm == 0) r.fail("implausible HMM dimensions");
  m.transitions = r.get_f64s(m.num_states * m.num_states, "transitions");
  m.variance_floor = r.get_f64s(m.dim, "variance floor");
  m.states.resize(m.num_states);
  for (auto& g : m.states) {
    g.dim = m.dim;
    g.weights = r.get_f64s(nm, "mixture weights");
    g.means = r.get_f64s(nm * m.dim, "means");
    g.variances = r.get_f64s(nm * m.dim, "variances");
    g.refresh();
  }
  return m;
}

}  // namespace seqdet

#endif  // SEQDET_HMM_HPP
