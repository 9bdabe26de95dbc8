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

#ifndef SEQDET_PASS2_HPP
#define SEQDET_PASS2_HPP

#include <algorithm>
#include <array>
#include <vector>

#include "seqdet/hmm.hpp"
#include "seqdet/labels.hpp"
#include "seqdet/pca.hpp"
#include "seqdet/sda.hpp"

namespace seqdet {

inline constexpr std::size_t kMontageChannels = 22;
inline constexpr std::size_t kSupervectorDim = kMontageChannels * kNumClasses;

using EpochPosteriorSequence = std::vector<ClassVector>;

/// Channel-major concatenation of the six posteriors of every channel.
inline Vector build_supervector(const PosteriorGrid& grid, std::size_t epoch) {
  if (grid.num_channels() != kMontageChannels)
    throw DataError("supervector expects " + std::to_string(kMontageChannels) + " channels, got " +
                    std::to_string(grid.num_channels()));
  Vector v(static_cast<Eigen::Index>(kSupervectorDim));
  for (std::size_t c = 0; c < kMontageChannels; ++c)
    for (std::size_t k = 0; k < kNumClasses; ++k)
      v(static_cast<Eigen::Index>(c * kNumClasses + k)) = grid.at(epoch, c)[k];
  return v;
}

/// 132 x epochs.
inline Matrix build_supervectors(const PosteriorGrid& grid) {
  Matrix m(static_cast<Eigen::Index>(kSupervectorDim), static_cast<Eigen::Index>(grid.num_epochs()));
  for (std::size_t e = 0; e < grid.num_epochs(); ++e) m.col(static_cast<Eigen::Index>(e)) = build_supervector(grid, e);
  return m;
}

/// Inverse of build_supervector for one epoch: channel c, class k.
inline std::vector<ClassVector> unflatten_supervector(const Vector& v) {
  if (v.size() % static_cast<Eigen::Index>(kNumClasses) != 0) throw DataError("supervector length not a multiple of 6");
  std::vector<ClassVector> out(static_cast<std::size_t>(v.size()) / kNumClasses);
  for (std::size_t c = 0; c < out.size(); ++c)
    for (std::size_t k = 0; k < kNumClasses; ++k) out[c][k] = v(static_cast<Eigen::Index>(c * kNumClasses + k));
  return out;
}

/// Output t is the mean of inputs t-1, t, t+1 (edge-replicated); one epoch
/// per column.
inline Matrix reduce_sequence_for_detectors(const Matrix& seq) {
  const Eigen::Index n = seq.cols();
  Matrix out(seq.rows(), n);
  for (Eigen::Index t = 0; t < n; ++t)
    out.col(t) = (seq.col(std::max<Eigen::Index>(t - 1, 0)) + seq.col(t) + seq.col(std::min(t + 1, n - 1))) / 3.0;
  return out;
}

/// Concatenation of `window` columns centred on t, edge-replicated.
inline Vector window_input(const Matrix& seq, std::size_t t, std::size_t window) {
  const auto n = static_cast<long>(seq.cols());
  const long half = static_cast<long>(window / 2);
  Vector v(seq.rows() * static_cast<Eigen::Index>(window));
  for (long i = 0; i < static_cast<long>(window); ++i) {
    const long src = std::clamp(static_cast<long>(t) - half + i, 0L, n - 1);
    v.segment(i * seq.rows(), seq.rows()) = seq.col(src);
  }
  return v;
}

inline Matrix window_inputs(const Matrix& seq, std::size_t window) {
  Matrix m(seq.rows() * static_cast<Eigen::Index>(window), seq.cols());
  for (Eigen::Index t = 0; t < seq.cols(); ++t) m.col(t) = window_input(seq, static_cast<std::size_t>(t), window);
  return m;
}

inline Vector sda_predict(const SdaModel& model, std::size_t epoch, const Matrix& reduced_sequence) {
  if (static_cast<std::size_t>(reduced_sequence.rows()) != model.reduced_dim)
    throw DataError(model.name + " SdA expects " + std::to_string(model.reduced_dim) + "-dimensional inputs");
  return model.predict_proba(window_input(reduced_sequence, epoch, model.window_length)).col(0);
}

/// Two-way detector outputs are ordered (target, other).
using DetectorOutput = std::array<double, 2>;

/// Start from the six-way output; when a detector is confident (> 0.5) in
/// its target and the current argmax is outside the target set, blend
/// towards uniform mass over the target set with the detector's confidence.
inline ClassVector enhance(const ClassVector& p6, const DetectorOutput& p_spsw, const DetectorOutput& p_eyem) {
  ClassVector p = p6;
  auto blend = [&p](double confidence, std::initializer_list<EventLabel> targets) {
    ClassVector u{};
    for (EventLabel l : targets) u[index_of(l)] = 1.0 / static_cast<double>(targets.size());
    for (std::size_t k = 0; k < kNumClasses; ++k) p[k] = (1.0 - confidence) * p[k] + confidence * u[k];
  };
  if (p_spsw[0] > 0.5 && !is_epileptiform(label_from_index(argmax(p))))
    blend(p_spsw[0], {EventLabel::SPSW, EventLabel::PLED, EventLabel::GPED});
  if (p_eyem[0] > 0.5 && label_from_index(argmax(p)) != EventLabel::EYEM) blend(p_eyem[0], {EventLabel::EYEM});
  double sum = 0.0;
  for (double v : p) sum += v;
  for (double& v : p) v /= sum;
  return p;
}

struct Pass2Models {
  PcaModel detector_pca;  // 132 -> 13
  PcaModel sixway_pca;    // 132 -> 20
  SdaModel spsw;
  SdaModel eyem;
  SdaModel sixway;
};

struct Pass2Outputs {
  Matrix spsw;    // 2 x epochs
  Matrix eyem;    // 2 x epochs
  Matrix sixway;  // 6 x epochs
  EpochPosteriorSequence enhanced;
};

inline Pass2Outputs run_pass2(const PosteriorGrid& grid, const Pass2Models& models) {
  const Matrix sv = build_supervectors(grid);
  const Matrix det = reduce_sequence_for_detectors(models.detector_pca.project_all(sv));
  const Matrix six = models.sixway_pca.project_all(sv);
  if (static_cast<std::size_t>(det.rows()) != models.spsw.reduced_dim ||
      static_cast<std::size_t>(det.rows()) != models.eyem.reduced_dim ||
      static_cast<std::size_t>(six.rows()) != models.sixway.reduced_dim)
    throw DataError("pass-2 PCA output dimensions do not match the SdA inputs");
  Pass2Outputs out;
  out.spsw = models.spsw.predict_proba(window_inputs(det, models.spsw.window_length));
  out.eyem = models.eyem.predict_proba(window_inputs(det, models.eyem.window_length));
  out.sixway = models.sixway.predict_proba(window_inputs(six, models.sixway.window_length));
  for (Eigen::Index e = 0; e < sv.cols(); ++e) {
    ClassVector p6;
    for (std::size_t k = 0; k < kNumClasses; ++k) p6[k] = out.sixway(static_cast<Eigen::Index>(k), e);
    out.enhanced.push_back(enhance(p6, {out.spsw(0, e), out.spsw(1, e)}, {out.eyem(0, e), out.eyem(1, e)}));
  }
  return out;
}

inline EpochPosteriorSequence decode_pass2(const PosteriorGrid& grid, const Pass2Models& models) {
  return run_pass2(grid, models).enhanced;
}

struct Pass2Config {
  SdaConfig spsw = spsw_sda_config();
  SdaConfig eyem = eyem_sda_config();
  SdaConfig sixway = sixway_sda_config();
  /// Minority class of each detector is augmented up to this fraction of
  /// the majority count.
  double augment_fraction = 0.5;
};

/// One training file: pass-1 posteriors and per-epoch reference labels.
struct Pass2TrainingFile {
  PosteriorGrid grid;
  std::vector<EventLabel> labels;
};

namespace detail {

inline SdaModel train_detector(const std::vector<Matrix>& reduced, const std::vector<std::vector<EventLabel>>& labels,
                               const SdaConfig& config, double augment_fraction, bool (*is_target)(EventLabel),
                               Rng& rng) {
  std::vector<Vector> pos, neg;
  for (std::size_t f = 0; f < reduced.size(); ++f) {
    const Matrix w = window_inputs(reduced[f], config.window_length);
    for (Eigen::Index e = 0; e < w.cols(); ++e)
      (is_target(labels[f][static_cast<std::size_t>(e)]) ? pos : neg).push_back(w.col(e));
  }
  if (pos.empty() || neg.empty())
    throw DataError(config.name + " detector needs both target and non-target training epochs");
  auto to_matrix = [&](const std::vector<Vector>& cols) {
    Matrix m(static_cast<Eigen::Index>(config.input_dim()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = cols[i];
    return m;
  };
  Matrix p = to_matrix(pos), q = to_matrix(neg);
  const auto target = static_cast<std::size_t>(augment_fraction * static_cast<double>(std::max(pos.size(), neg.size())));
  if (pos.size() < neg.size() && pos.size() >= 2) p = augment_rare(p, target, rng);
  if (neg.size() < pos.size() && neg.size() >= 2) q = augment_rare(q, target, rng);
  Matrix x(p.rows(), p.cols() + q.cols());
  x << p, q;
  std::vector<int> y(static_cast<std::size_t>(p.cols()), 0);
  y.resize(static_cast<std::size_t>(x.cols()), 1);
  return train_sda(x, y, config, rng);
}

inline bool eyem_target(EventLabel l) { return l == EventLabel::EYEM; }
inline bool epileptiform_target(EventLabel l) { return is_epileptiform(l); }

}  // namespace detail

inline Pass2Models train_pass2(const std::vector<Pass2TrainingFile>& files, const Pass2Config& config,
                               std::uint64_t seed) {
  if (files.empty()) throw DataError("pass-2 training needs at least one file");
  std::vector<Matrix> supervectors;
  Eigen::Index total = 0;
  std::vector<std::vector<EventLabel>> labels;
  for (const auto& f : files) {
    if (f.labels.size() != f.grid.num_epochs()) throw DataError("pass-2 training: label count differs from epochs");
    supervectors.push_back(build_supervectors(f.grid));
    labels.push_back(f.labels);
    total += supervectors.back().cols();
  }
  Matrix all(static_cast<Eigen::Index>(kSupervectorDim), total);
  for (Eigen::Index off = 0; const auto& s : supervectors) {
    all.middleCols(off, s.cols()) = s;
    off += s.cols();
  }

  Pass2Models models;
  models.detector_pca = fit_pca(all, static_cast<Eigen::Index>(config.spsw.reduced_dim));
  models.sixway_pca = fit_pca(all, static_cast<Eigen::Index>(config.sixway.reduced_dim));
  if (config.eyem.reduced_dim != config.spsw.reduced_dim)
    throw UsageError("the two detector SdAs share one PCA and must use the same reduced dimension");

  std::vector<Matrix> det, six;
  for (const auto& s : supervectors) {
    det.push_back(reduce_sequence_for_detectors(models.detector_pca.project_all(s)));
    six.push_back(models.sixway_pca.project_all(s));
  }

  // Independent streams so the three networks can be trained in any order.
  Rng spsw_rng(seed ^ 0x5350535700000000ull), eyem_rng(seed ^ 0x4559454d00000000ull),
      six_rng(seed ^ 0x3657415900000000ull);
  models.spsw = detail::train_detector(det, labels, config.spsw, config.augment_fraction,
                                       detail::epileptiform_target, spsw_rng);
  models.eyem =
      detail::train_detector(det, labels, config.eyem, config.augment_fraction, detail::eyem_target, eyem_rng);

  Matrix x(static_cast<Eigen::Index>(config.sixway.input_dim()), total);
  std::vector<int> y;
  Eigen::Index off = 0;
  for (std::size_t f = 0; f < six.size(); ++f) {
    const Matrix w = window_inputs(six[f], config.sixway.window_length);
    x.middleCols(off, w.cols()) = w;
    off += w.cols();
    for (EventLabel l : labels[f]) y.push_back(static_cast<int>(index_of(l)));
  }
  models.sixway = train_sda(x, y, config.sixway, six_rng);
  return models;
}

}  // namespace seqdet

#endif  // SEQDET_PASS2_HPP
