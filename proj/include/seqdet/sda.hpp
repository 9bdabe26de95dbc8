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

#ifndef SEQDET_SDA_HPP
#define SEQDET_SDA_HPP

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "seqdet/container.hpp"
#include "seqdet/error.hpp"
#include "seqdet/pca.hpp"
#include "seqdet/rng.hpp"

namespace seqdet {

struct SdaConfig {
  std::string name;
  std::size_t window_length = 3;
  std::size_t reduced_dim = 13;
  std::vector<std::size_t> hidden = {100, 100, 100};
  std::size_t num_classes = 2;
  double corruption = 0.3;
  double pretrain_lr = 0.5;
  std::size_t pretrain_epochs = 200;
  std::size_t pretrain_batch = 300;
  double finetune_lr = 0.2;
  std::size_t finetune_epochs = 800;
  std::size_t finetune_batch = 100;

  std::size_t input_dim() const { return window_length * reduced_dim; }

  void validate() const {
    if (window_length == 0 || window_length % 2 == 0) throw UsageError(name + ": window length must be odd");
    if (reduced_dim == 0 || hidden.empty() || num_classes < 2) throw UsageError(name + ": invalid layer sizes");
    for (auto h : hidden)
      if (h == 0) throw UsageError(name + ": hidden layer of size 0");
    if (!(corruption >= 0.0 && corruption <= 1.0)) throw UsageError(name + ": corruption must lie in [0,1]");
    if (pretrain_batch == 0 || finetune_batch == 0) throw UsageError(name + ": batch size must be positive");
  }
};

/// Epileptiform detector: 3 x 13 inputs, two outputs.
inline SdaConfig spsw_sda_config() {
  return {"spsw", 3, 13, {100, 100, 100}, 2, 0.3, 0.5, 200, 300, 0.2, 800, 100};
}

/// Eye-movement detector: same shape, shorter fine-tuning.
inline SdaConfig eyem_sda_config() {
  return {"eyem", 3, 13, {100, 100, 100}, 2, 0.3, 0.5, 200, 300, 0.2, 100, 100};
}

/// Six-way classifier: 41 x 20 inputs.
inline SdaConfig sixway_sda_config() {
  return {"sixway", 41, 20, {800, 500, 300}, 6, 0.3, 0.5, 150, 300, 0.1, 300, 100};
}

inline Matrix sigmoid(const Matrix& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }

/// log(1 + e^a), stable for large |a|.
inline Matrix softplus(const Matrix& a) {
  return (a.array().max(0.0) + (-a.array().abs()).exp().log1p()).matrix();
}

/// One denoising autoencoder with tied weights: y = s(W x + b),
/// z = s(W^T y + b').
struct DaeLayer {
  Matrix weights;        // out x in
  Vector bias;           // out
  Vector visible_bias;   // in

  Matrix encode(const Matrix& x) const { return sigmoid((weights * x).colwise() + bias); }
  Matrix decode(const Matrix& y) const { return sigmoid((weights.transpose() * y).colwise() + visible_bias); }
};

inline DaeLayer make_layer(std::size_t in, std::size_t out, Rng& rng) {
  DaeLayer l;
  const double bound = 4.0 * std::sqrt(6.0 / static_cast<double>(in + out));
  l.weights.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  for (Eigen::Index j = 0; j < l.weights.cols(); ++j)
    for (Eigen::Index i = 0; i < l.weights.rows(); ++i) l.weights(i, j) = uniform(rng, -bound, bound);
  l.bias = Vector::Zero(static_cast<Eigen::Index>(out));
  l.visible_bias = Vector::Zero(static_cast<Eigen::Index>(in));
  return l;
}

/// Masking corruption: each coordinate is zeroed with probability `level`.
inline Matrix corrupt(const Matrix& x, double level, Rng& rng) {
  if (!(level >= 0.0 && level <= 1.0)) throw UsageError("corruption level must lie in [0,1]");
  Matrix out = x;
  if (level == 0.0) return out;
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      if (bernoulli(rng, level)) out(i, j) = 0.0;
  return out;
}

struct DaeGradient {
  Matrix weights;
  Vector bias;
  Vector visible_bias;
};

/// Reconstruction cross-entropy -[x log z + (1 - x) log(1 - z)] of the
/// corrupted input against the clean one, averaged over batch columns and
/// visible units so one learning rate suits every layer width. Fills
/// `grad` when non-null.
inline double dae_loss(const DaeLayer& layer, const Matrix& clean, const Matrix& corrupted,
                       DaeGradient* grad = nullptr) {
  const double count = static_cast<double>(clean.cols()) * static_cast<double>(clean.rows());
  const Matrix y = layer.encode(corrupted);
  const Matrix zpre = (layer.weights.transpose() * y).colwise() + layer.visible_bias;
  const double loss = (softplus(zpre).array() - clean.array() * zpre.array()).sum() / count;
  if (grad) {
    const Matrix g = (sigmoid(zpre) - clean) / count;  // d loss / d zpre
    const Matrix dy = layer.weights * g;
    const Matrix da = (dy.array() * y.array() * (1.0 - y.array())).matrix();
    grad->weights = y * g.transpose() + da * corrupted.transpose();
    grad->bias = da.rowwise().sum();
    grad->visible_bias = g.rowwise().sum();
  }
  return loss;
}

struct MinMaxScaler {
  Vector min;
  Vector range;  // max - min, 1 where constant

  static MinMaxScaler fit(const Matrix& x) {
    MinMaxScaler s;
    s.min = x.rowwise().minCoeff();
    s.range = x.rowwise().maxCoeff() - s.min;
    for (Eigen::Index i = 0; i < s.range.size(); ++i)
      if (!(s.range(i) > 0.0)) s.range(i) = 1.0;
    return s;
  }
  Matrix apply(const Matrix& x) const {
    return ((x.colwise() - min).array().colwise() / range.array()).max(0.0).min(1.0).matrix();
  }
};

/// Encoder stack with a softmax output layer.
struct SdaModel {
  std::string name;
  std::size_t window_length = 0;
  std::size_t reduced_dim = 0;
  double corruption = 0.3;
  std::vector<DaeLayer> layers;
  Matrix out_weights;  // classes x last hidden
  Vector out_bias;
  MinMaxScaler scaler;

  std::size_t input_dim() const { return window_length * reduced_dim; }
  std::size_t num_classes() const { return static_cast<std::size_t>(out_bias.size()); }

  /// Hidden activations of every layer for already-scaled columns;
  /// element 0 is the input itself.
  std::vector<Matrix> forward_hidden(const Matrix& scaled) const {
    std::vector<Matrix> h{scaled};
    for (const auto& l : layers) h.push_back(l.encode(h.back()));
    return h;
  }

  Matrix logits(const Matrix& scaled) const {
    return (out_weights * forward_hidden(scaled).back()).colwise() + out_bias;
  }

  /// Class probabilities for raw (unscaled) input columns.
  Matrix predict_proba(const Matrix& raw) const {
    if (static_cast<std::size_t>(raw.rows()) != input_dim())
      throw DataError(name + " SdA expects " + std::to_string(input_dim()) + " inputs, got " +
                      std::to_string(raw.rows()));
    return column_softmax(logits(scaler.apply(raw)));
  }

  static Matrix column_softmax(const Matrix& z) {
    Matrix p = (z.rowwise() - z.colwise().maxCoeff()).array().exp().matrix();
    p.array().rowwise() /= p.colwise().sum().array();
    return p;
  }
};

inline SdaModel make_sda(const SdaConfig& config, Rng& rng) {
  config.validate();
  SdaModel m;
  m.name = config.name;
  m.window_length = config.window_length;
  m.reduced_dim = config.reduced_dim;
  m.corruption = config.corruption;
  std::size_t in = config.input_dim();
  for (auto h : config.hidden) {
    m.layers.push_back(make_layer(in, h, rng));
    in = h;
  }
  m.out_weights = Matrix::Zero(static_cast<Eigen::Index>(config.num_classes), static_cast<Eigen::Index>(in));
  m.out_bias = Vector::Zero(static_cast<Eigen::Index>(config.num_classes));
  return m;
}

namespace detail {

inline Matrix gather_columns(const Matrix& x, const std::vector<std::size_t>& order, std::size_t begin,
                             std::size_t end) {
  Matrix out(x.rows(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i) out.col(static_cast<Eigen::Index>(i - begin)) = x.col(static_cast<Eigen::Index>(order[i]));
  return out;
}

inline void check_finite(double loss, const std::string& what, std::size_t epoch) {
  if (!std::isfinite(loss))
    throw NumericError(what + ": non-finite loss at epoch " + std::to_string(epoch + 1) +
                       "; reduce the learning rate or check input scaling");
}

}  // namespace detail

/// Greedy layer-wise pretraining. `scaled` holds inputs in [0,1], one per
/// column. Returns the mean minibatch loss per epoch for every layer.
inline std::vector<std::vector<double>> pretrain(SdaModel& model, const Matrix& scaled, const SdaConfig& config,
                                                 Rng& rng) {
  std::vector<std::vector<double>> history;
  Matrix input = scaled;
  const std::size_t n = static_cast<std::size_t>(scaled.cols());
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    DaeLayer& layer = model.layers[k];
    std::vector<double> losses;
    DaeGradient g;
    for (std::size_t epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
      const auto order = permutation(rng, n);
      double total = 0.0;
      std::size_t batches = 0;
      for (std::size_t b = 0; b < n; b += config.pretrain_batch) {
        const Matrix clean = detail::gather_columns(input, order, b, std::min(n, b + config.pretrain_batch));
        const Matrix noisy = corrupt(clean, config.corruption, rng);
        const double loss = dae_loss(layer, clean, noisy, &g);
        detail::check_finite(loss, model.name + " pretraining layer " + std::to_string(k + 1), epoch);
        layer.weights -= config.pretrain_lr * g.weights;
        layer.bias -= config.pretrain_lr * g.bias;
        layer.visible_bias -= config.pretrain_lr * g.visible_bias;
        total += loss;
        ++batches;
      }
      losses.push_back(total / static_cast<double>(batches));
    }
    history.push_back(std::move(losses));
    input = layer.encode(input);
  }
  return history;
}

struct SdaGradient {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Matrix out_weights;
  Vector out_bias;
};

/// Mean negative log-likelihood of the labels under the encoder + softmax
/// network, for scaled input columns.
inline double finetune_loss(const SdaModel& model, const Matrix& scaled, const std::vector<int>& labels,
                            SdaGradient* grad = nullptr) {
  const double batch = static_cast<double>(scaled.cols());
  const auto h = model.forward_hidden(scaled);
  const Matrix z = (model.out_weights * h.back()).colwise() + model.out_bias;
  const Matrix p = SdaModel::column_softmax(z);
  const Vector zmax = z.colwise().maxCoeff();
  double loss = 0.0;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const double lse = zmax(j) + std::log((z.col(j).array() - zmax(j)).exp().sum());
    loss -= z(labels[static_cast<std::size_t>(j)], j) - lse;
  }
  loss /= batch;
  if (grad) {
    Matrix dz = p;
    for (Eigen::Index j = 0; j < z.cols(); ++j) dz(labels[static_cast<std::size_t>(j)], j) -= 1.0;
    dz /= batch;
    grad->out_weights = dz * h.back().transpose();
    grad->out_bias = dz.rowwise().sum();
    Matrix dh = model.out_weights.transpose() * dz;
    const std::size_t nl = model.layers.size();
    grad->weights.resize(nl);
    grad->biases.resize(nl);
    for (std::size_t k = nl; k-- > 0;) {
      const Matrix& out = h[k + 1];
      const Matrix da = (dh.array() * out.array() * (1.0 - out.array())).matrix();
      grad->weights[k] = da * h[k].transpose();
      grad->biases[k] = da.rowwise().sum();
      if (k > 0) dh = model.layers[k].weights.transpose() * da;
    }
  }
  return loss;
}

/// Supervised minibatch SGD on the encoders plus the softmax layer. Returns
/// the mean minibatch loss per epoch.
inline std::vector<double> fine_tune(SdaModel& model, const Matrix& scaled, const std::vector<int>& labels,
                                     const SdaConfig& config, Rng& rng) {
  if (labels.size() != static_cast<std::size_t>(scaled.cols())) throw DataError("fine_tune: label count mismatch");
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= model.num_classes())
      throw DataError(model.name + ": label " + std::to_string(l) + " outside the " +
                      std::to_string(model.num_classes()) + "-class output set");
  const std::size_t n = labels.size();
  std::vector<double> history;
  SdaGradient g;
  for (std::size_t epoch = 0; epoch < config.finetune_epochs; ++epoch) {
    const auto order = permutation(rng, n);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < n; b += config.finetune_batch) {
      const std::size_t e = std::min(n, b + config.finetune_batch);
      const Matrix x = detail::gather_columns(scaled, order, b, e);
      std::vector<int> y;
      for (std::size_t i = b; i < e; ++i) y.push_back(labels[order[i]]);
      const double loss = finetune_loss(model, x, y, &g);
      detail::check_finite(loss, model.name + " fine-tuning", epoch);
      for (std::size_t k = 0; k < model.layers.size(); ++k) {
        model.layers[k].weights -= config.finetune_lr * g.weights[k];
        model.layers[k].bias -= config.finetune_lr * g.biases[k];
      }
      model.out_weights -= config.finetune_lr * g.out_weights;
      model.out_bias -= config.finetune_lr * g.out_bias;
      total += loss;
      ++batches;
    }
    history.push_back(total / static_cast<double>(batches));
  }
  return history;
}

/// Fit the scaler on `raw`, pretrain, then fine-tune.
inline SdaModel train_sda(const Matrix& raw, const std::vector<int>& labels, const SdaConfig& config, Rng& rng) {
  if (static_cast<std::size_t>(raw.rows()) != config.input_dim())
    throw DataError(config.name + ": training inputs have dimension " + std::to_string(raw.rows()) + ", expected " +
                    std::to_string(config.input_dim()));
  SdaModel model = make_sda(config, rng);
  model.scaler = MinMaxScaler::fit(raw);
  const Matrix scaled = model.scaler.apply(raw);
  pretrain(model, scaled, config, rng);
  fine_tune(model, scaled, labels, config, rng);
  return model;
}

/// Synthetic samples from convex combinations of random pairs plus
/// Gaussian jitter (jitter x per-dimension std of the seeds). Columns are
/// samples of a single class; the result holds the originals followed by
/// the synthetic ones.
inline Matrix augment_rare(const Matrix& seeds, std::size_t target_count, Rng& rng, double jitter = 0.05) {
  const auto n = static_cast<std::size_t>(seeds.cols());
  if (target_count <= n) return seeds;
  if (n < 2) throw DataError("augmentation needs at least 2 seed samples, got " + std::to_string(n));
  const Vector mean = seeds.rowwise().mean();
  const Vector sd = ((seeds.colwise() - mean).array().square().rowwise().sum() / static_cast<double>(n)).sqrt().matrix();
  Matrix out(seeds.rows(), static_cast<Eigen::Index>(target_count));
  out.leftCols(static_cast<Eigen::Index>(n)) = seeds;
  for (std::size_t c = n; c < target_count; ++c) {
    const std::size_t a = uniform_index(rng, n);
    std::size_t b = uniform_index(rng, n - 1);
    if (b >= a) ++b;
    const double t = uniform01(rng);
    Vector s = (1.0 - t) * seeds.col(static_cast<Eigen::Index>(a)) + t * seeds.col(static_cast<Eigen::Index>(b));
    if (jitter > 0.0)
      for (Eigen::Index i = 0; i < s.size(); ++i) s(i) += jitter * sd(i) * standard_normal(rng);
    out.col(static_cast<Eigen::Index>(c)) = s;
  }
  return out;
}

inline void serialize(const SdaModel& m, ByteWriter& w) {
  w.put_string(m.name);
  w.put_u64(m.window_length);
  w.put_u64(m.reduced_dim);
  w.put_f64(m.corruption);
  w.put_u64(m.layers.size());
  for (const auto& l : m.layers) {
    serialize(l.weights, w);
    serialize(l.bias, w);
    serialize(l.visible_bias, w);
  }
  serialize(m.out_weights, w);
  serialize(m.out_bias, w);
  serialize(m.scaler.min, w);
  serialize(m.scaler.range, w);
}

inline SdaModel deserialize_sda(ByteReader& r) {
  SdaModel m;
  m.name = r.get_string();
  m.window_length = r.get_u64();
  m.reduced_dim = r.get_u64();
  m.corruption = r.get_f64();
  const auto nl = r.get_u64();
  if (nl == 0 || nl > 64) r.fail("implausible SdA layer count");
  Eigen::Index in = static_cast<Eigen::Index>(m.window_length * m.reduced_dim);
  for (std::uint64_t k = 0; k < nl; ++k) {
    DaeLayer l;
    l.weights = deserialize_matrix(r);
    l.bias = deserialize_vector(r);
    l.visible_bias = deserialize_vector(r);
    if (l.weights.cols() != in || l.bias.size() != l.weights.rows() || l.visible_bias.size() != in)
      r.fail("SdA layer dimensions do not chain");
    in = l.weights.rows();
    m.layers.push_back(std::move(l));
  }
  m.out_weights = deserialize_matrix(r);
  m.out_bias = deserialize_vector(r);
  m.scaler.min = deserialize_vector(r);
  m.scaler.range = deserialize_vector(r);
  if (m.out_weights.cols() != in || m.out_bias.size() != m.out_weights.rows() ||
      m.scaler.min.size() != static_cast<Eigen::Index>(m.input_dim()) || m.scaler.range.size() != m.scaler.min.size())
    r.fail("SdA output or scaler dimensions inconsistent");
  return m;
}

}  // namespace seqdet

#endif  // SEQDET_SDA_HPP
