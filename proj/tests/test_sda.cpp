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

#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "seqdet/sda.hpp"

namespace seqdet {
namespace {

using testing::check_dae_gradient;
using testing::check_finetune_gradient;

class SdaShapes : public ::testing::TestWithParam<SdaConfig> {};

TEST_P(SdaShapes, ReconstructionGradientMatchesFiniteDifferences) {
  const SdaConfig cfg = GetParam();
  Rng rng(101);
  std::size_t in = cfg.input_dim();
  for (auto h : cfg.hidden) {
    const auto stats = check_dae_gradient(in, h, 30, rng);
    EXPECT_LT(stats.max_relative_error, 1e-4) << in << "x" << h;
    EXPECT_LT(stats.base_loss_mismatch, 1e-12);
    in = h;
  }
}

TEST_P(SdaShapes, FinetuneGradientMatchesFiniteDifferences) {
  Rng rng(102);
  const auto stats = check_finetune_gradient(GetParam(), 30, rng);
  EXPECT_EQ(stats.probes, 30 * (GetParam().hidden.size() + 1));
  EXPECT_LT(stats.max_relative_error, 1e-4);
  EXPECT_LT(stats.base_loss_mismatch, 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Configs, SdaShapes,
                         ::testing::Values(spsw_sda_config(), eyem_sda_config(), sixway_sda_config()),
                         [](const auto& info) { return info.param.name; });

TEST(GradientCheck, DetectsAWrongGradient) {
  // The oracle must reject an analytic value off by 0.1%.
  Rng rng(103);
  DaeLayer layer = make_layer(5, 4, rng);
  const Matrix x = testing::random_unit_matrix(5, 3, rng);
  DaeGradient g;
  dae_loss(layer, x, x, &g);
  testing::RealDae oracle{testing::RealMatrix(layer.weights), testing::RealMatrix(Matrix(layer.bias)),
                          testing::RealMatrix(Matrix(layer.visible_bias)), testing::RealMatrix(x),
                          testing::RealMatrix(x), {}, {}, {}};
  oracle.prepare();
  const auto f = [&](testing::Real d) { return oracle.perturbed(testing::RealDae::Param::weight, 1, 2, d); };
  const double numeric = static_cast<double>(testing::central_difference(f, testing::kDaeDifference));
  EXPECT_LT(testing::relative_error(g.weights(1, 2), numeric), 1e-6);
  EXPECT_GT(testing::relative_error(1.001 * g.weights(1, 2), numeric), 1e-4);
}

TEST(Corrupt, LevelZeroAndOne) {
  Rng rng(1);
  const Matrix x = testing::random_unit_matrix(7, 9, rng);
  EXPECT_EQ(corrupt(x, 0.0, rng), x);
  EXPECT_EQ(corrupt(x, 1.0, rng), Matrix::Zero(7, 9));
  EXPECT_THROW(corrupt(x, 1.5, rng), UsageError);
}

TEST(Corrupt, ZeroedFractionWithinBinomialBound) {
  Rng rng(2);
  const Matrix x = Matrix::Ones(1000, 100);
  const Matrix y = corrupt(x, 0.3, rng);
  const double zeroed = static_cast<double>((y.array() == 0.0).count()) / 1e5;
  EXPECT_NEAR(zeroed, 0.3, 0.01);
}

SdaConfig tiny_config(std::size_t in, std::vector<std::size_t> hidden, std::size_t classes) {
  SdaConfig c;
  c.name = "tiny";
  c.window_length = 1;
  c.reduced_dim = in;
  c.hidden = std::move(hidden);
  c.num_classes = classes;
  c.pretrain_epochs = 50;
  c.pretrain_batch = 20;
  c.finetune_epochs = 200;
  c.finetune_batch = 10;
  return c;
}

// Two Gaussian blobs in [0,1]^6 separated along a random direction.
void separable(Rng& rng, Matrix& x, std::vector<int>& y, std::size_t n = 200) {
  x.resize(6, static_cast<Eigen::Index>(n));
  y.clear();
  for (std::size_t j = 0; j < n; ++j) {
    const int label = j % 2 == 0 ? 0 : 1;
    for (Eigen::Index i = 0; i < 6; ++i)
      x(i, static_cast<Eigen::Index>(j)) = (label ? 0.7 : 0.3) + 0.05 * standard_normal(rng) * (i % 3 + 1);
    y.push_back(label);
  }
}

TEST(Pretrain, LossDoesNotIncreaseOverFiftyEpochs) {
  Rng rng(3);
  Matrix x;
  std::vector<int> y;
  separable(rng, x, y);
  auto cfg = tiny_config(6, {8, 5}, 2);
  SdaModel model = make_sda(cfg, rng);
  model.scaler = MinMaxScaler::fit(x);
  const auto history = pretrain(model, model.scaler.apply(x), cfg, rng);
  ASSERT_EQ(history.size(), 2u);
  for (const auto& layer : history) {
    ASSERT_EQ(layer.size(), 50u);
    EXPECT_LE(layer.back(), layer.front() * 1.01);
  }
}

TEST(Pretrain, OneDimensionalAutoencoderReachesEntropyBound) {
  // For constant input p the cross-entropy is minimized at z = p, where it
  // equals the binary entropy of p.
  const double p = 0.3;
  const Matrix x = Matrix::Constant(1, 10, p);
  auto cfg = tiny_config(1, {1}, 2);
  cfg.corruption = 0.0;
  cfg.pretrain_epochs = 2000;
  cfg.pretrain_batch = 10;
  Rng rng(4);
  SdaModel model = make_sda(cfg, rng);
  const auto history = pretrain(model, x, cfg, rng);
  const double entropy = -(p * std::log(p) + (1 - p) * std::log(1 - p));
  EXPECT_NEAR(history[0].back(), entropy, 1e-6);
  EXPECT_GE(history[0].back(), entropy - 1e-12);
}

TEST(FineTune, SeparableToyReachesFullTrainingAccuracy) {
  Rng rng(5);
  Matrix x;
  std::vector<int> y;
  separable(rng, x, y);
  const auto model = train_sda(x, y, tiny_config(6, {8, 5}, 2), rng);
  const Matrix p = model.predict_proba(x);
  int correct = 0;
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    Eigen::Index best = 0;
    p.col(j).maxCoeff(&best);
    correct += best == y[static_cast<std::size_t>(j)];
    EXPECT_NEAR(p.col(j).sum(), 1.0, 1e-9);
    EXPECT_GT(p.col(j).minCoeff(), 0.0);
    EXPECT_LT(p.col(j).maxCoeff(), 1.0);
  }
  EXPECT_EQ(correct, p.cols());
}

TEST(FineTune, LabelOutsideClassSetRejected) {
  Rng rng(6);
  Matrix x;
  std::vector<int> y;
  separable(rng, x, y, 20);
  y[3] = 2;
  auto cfg = tiny_config(6, {4}, 2);
  SdaModel model = make_sda(cfg, rng);
  EXPECT_THROW(fine_tune(model, x, y, cfg, rng), DataError);
  EXPECT_THROW(train_sda(Matrix::Zero(5, 20), y, cfg, rng), DataError);
}

TEST(Sda, TrainingIsBitDeterministic) {
  Matrix x;
  std::vector<int> y;
  Rng data_rng(7);
  separable(data_rng, x, y, 60);
  auto run = [&] {
    Rng rng(77);
    ByteWriter w;
    serialize(train_sda(x, y, tiny_config(6, {8, 5}, 2), rng), w);
    return w.take();
  };
  EXPECT_EQ(run(), run());
}

TEST(Sda, IdenticalInputsGiveIdenticalOutputs) {
  Rng rng(8);
  Matrix x;
  std::vector<int> y;
  separable(rng, x, y, 40);
  const auto model = train_sda(x, y, tiny_config(6, {5}, 2), rng);
  Matrix two(6, 2);
  two.col(0) = x.col(3);
  two.col(1) = x.col(3);
  const Matrix p = model.predict_proba(two);
  EXPECT_EQ(p.col(0), p.col(1));
  EXPECT_THROW(model.predict_proba(Matrix::Zero(7, 1)), DataError);
}

TEST(Sda, SerializationRoundTrip) {
  Rng rng(9);
  auto model = make_sda(spsw_sda_config(), rng);
  model.scaler = MinMaxScaler::fit(testing::random_unit_matrix(39, 10, rng));
  ByteWriter w;
  serialize(model, w);
  ByteReader r(w.bytes(), "sda");
  const auto back = deserialize_sda(r);
  EXPECT_TRUE(r.done());
  ByteWriter w2;
  serialize(back, w2);
  EXPECT_EQ(w.bytes(), w2.bytes());
  EXPECT_EQ(back.input_dim(), 39u);
  const std::string cut = w.bytes().substr(0, w.bytes().size() / 2);
  ByteReader rc(cut, "sda");
  EXPECT_THROW(deserialize_sda(rc), DataError);
}

TEST(Sda, ConfigsMatchDeclaredShapes) {
  EXPECT_EQ(spsw_sda_config().input_dim(), 39u);
  EXPECT_EQ(sixway_sda_config().input_dim(), 820u);
  EXPECT_EQ(sixway_sda_config().hidden, (std::vector<std::size_t>{800, 500, 300}));
  EXPECT_EQ(eyem_sda_config().finetune_epochs, 100u);
  Rng rng(10);
  const auto layer = make_layer(39, 100, rng);
  const double bound = 4.0 * std::sqrt(6.0 / 139.0);
  EXPECT_LE(layer.weights.cwiseAbs().maxCoeff(), bound);
  EXPECT_GT(layer.weights.cwiseAbs().maxCoeff(), 0.9 * bound);
  EXPECT_EQ(layer.bias, Vector::Zero(100));
  auto bad = spsw_sda_config();
  bad.window_length = 2;
  EXPECT_THROW(bad.validate(), UsageError);
}

TEST(MinMaxScaler, MapsTrainingRangeToUnitIntervalAndClamps) {
  Matrix x(2, 3);
  x << 1, 2, 3, 5, 5, 5;
  const auto s = MinMaxScaler::fit(x);
  const Matrix y = s.apply(x);
  EXPECT_EQ(y(0, 0), 0.0);
  EXPECT_EQ(y(0, 1), 0.5);
  EXPECT_EQ(y(0, 2), 1.0);
  EXPECT_EQ(y(1, 1), 0.0);  // constant row
  Matrix out(2, 1);
  out << 10, -3;
  EXPECT_EQ(s.apply(out), (Matrix(2, 1) << 1.0, 0.0).finished());
}

TEST(Augment, TargetEqualToCountIsUnchanged) {
  Rng rng(11);
  const Matrix seeds = testing::random_unit_matrix(4, 5, rng);
  EXPECT_EQ(augment_rare(seeds, 5, rng), seeds);
  EXPECT_EQ(augment_rare(seeds, 3, rng), seeds);
  EXPECT_THROW(augment_rare(seeds.leftCols(1), 4, rng), DataError);
}

TEST(Augment, TwoSeedsWithoutJitterStayOnSegment) {
  Rng rng(12);
  Matrix seeds(3, 2);
  seeds << 0, 1, 2, -2, 5, 5;
  const Matrix out = augment_rare(seeds, 50, rng, 0.0);
  ASSERT_EQ(out.cols(), 50);
  const Vector a = seeds.col(0), d = seeds.col(1) - seeds.col(0);
  for (Eigen::Index j = 0; j < 50; ++j) {
    const double t = (out.col(j) - a).dot(d) / d.squaredNorm();
    EXPECT_GE(t, 0.0);
    EXPECT_LE(t, 1.0);
    EXPECT_LT((a + t * d - out.col(j)).norm(), 1e-12);
  }
}

TEST(Augment, ClassMeanWithinThreeSigma) {
  Rng rng(13);
  Matrix seeds(5, 30);
  for (Eigen::Index j = 0; j < 30; ++j)
    for (Eigen::Index i = 0; i < 5; ++i) seeds(i, j) = 2.0 * double(i) + standard_normal(rng);
  const Matrix out = augment_rare(seeds, 600, rng);
  const Vector seed_mean = seeds.rowwise().mean();
  const Matrix synth = out.rightCols(570);
  const Vector mean = synth.rowwise().mean();
  for (Eigen::Index i = 0; i < 5; ++i) {
    const double sd = std::sqrt((seeds.row(i).array() - seed_mean(i)).square().sum() / 29.0);
    EXPECT_NEAR(mean(i), seed_mean(i), 3 * sd / std::sqrt(30.0)) << i;
  }
}

}  // namespace
}  // namespace seqdet
