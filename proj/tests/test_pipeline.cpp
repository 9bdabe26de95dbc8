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

#include <fstream>
#include <sstream>

#include "seqdet/cli.hpp"
#include "seqdet/pipeline.hpp"
#include "seqdet/synth.hpp"
#include "test_support.hpp"

namespace seqdet {
namespace {

using testing::TempDir;

SdaConfig shrink(SdaConfig c, std::size_t hidden) {
  c.hidden = {hidden};
  c.pretrain_epochs = 2;
  c.finetune_epochs = 30;
  return c;
}

PipelineConfig small_config(std::uint64_t seed = 5) {
  PipelineConfig c;
  c.seed = seed;
  c.hmm.num_mixtures = 2;
  c.hmm.max_iterations = 3;
  c.pass2.spsw = shrink(c.pass2.spsw, 16);
  c.pass2.eyem = shrink(c.pass2.eyem, 16);
  c.pass2.sixway = shrink(c.pass2.sixway, 32);
  return c;
}

std::string small_config_text(std::uint64_t seed = 5) { return canonical_text(small_config(seed)); }

class TrainedBundle : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    train_ = new SynthResult(generate(random_script(150.0, 31), 31));
    eval_ = new SynthResult(generate(random_script(60.0, 32), 32));
    bundle_ = new Bundle(train_bundle({{train_->recording, train_->annotations}}, small_config()));
  }
  static void TearDownTestSuite() {
    delete train_;
    delete eval_;
    delete bundle_;
  }
  static SynthResult* train_;
  static SynthResult* eval_;
  static Bundle* bundle_;
};

SynthResult* TrainedBundle::train_ = nullptr;
SynthResult* TrainedBundle::eval_ = nullptr;
Bundle* TrainedBundle::bundle_ = nullptr;

TEST(Config, ShippedDefaultsMatchBuiltInDefaults) {
  const auto cfg = read_config(std::string(SEQDET_SOURCE_DIR) + "/config/default.ini");
  PipelineConfig expect;
  expect.seed = 1;
  EXPECT_EQ(canonical_text(cfg), canonical_text(expect));
}

TEST(Config, CanonicalTextRoundTrips) {
  auto c = small_config(99);
  c.grammar.decay = 0.1 + 0.2;  // not exactly representable as typed
  c.priors = PriorSource::training;
  c.bigram = BigramSource::estimate;
  std::istringstream in(canonical_text(c));
  EXPECT_EQ(canonical_text(parse_config(in)), canonical_text(c));
}

TEST(Config, UnknownSettingsAreUsageErrors) {
  std::istringstream key("[hmm]\nstates = 3\nmixturez = 4\n");
  try {
    parse_config(key);
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("mixturez"), std::string::npos);
  }
  std::istringstream section("[hmmm]\nstates = 3\n");
  EXPECT_THROW(parse_config(section), UsageError);
  std::istringstream value("[hmm]\nstates = three\n");
  EXPECT_THROW(parse_config(value), UsageError);
  std::istringstream source("[pipeline]\nbigram = trigram\n");
  EXPECT_THROW(parse_config(source), UsageError);
}

TEST(Config, ValidationRules) {
  PipelineConfig c;
  EXPECT_THROW(c.validate(), UsageError);  // no seed
  c.seed = 1;
  c.validate();
  c.montage_path = "/nonexistent/montage.txt";
  EXPECT_THROW(c.validate(), UsageError);
  c = small_config();
  c.pass2.sixway.num_classes = 5;
  EXPECT_THROW(c.validate(), UsageError);
  c = small_config();
  c.pass2.augment_fraction = 1.5;
  EXPECT_THROW(c.validate(), UsageError);
  c = small_config();
  c.grammar.window = 0;
  EXPECT_THROW(c.validate(), UsageError);
}

TEST(Config, RelativeMontageResolvesAgainstConfigDirectory) {
  TempDir dir("cfg");
  {
    std::ofstream(dir / "m.txt") << "A = X - Y\n";
    std::ofstream(dir / "c.ini") << "[pipeline]\nseed = 3\nmontage = m.txt\n";
  }
  const auto c = read_config(dir / "c.ini");
  EXPECT_EQ(c.montage_path, dir / "m.txt");
  c.validate();
}

TEST(TrainingList, ParsesRelativePathsAndComments) {
  TempDir dir("list");
  std::ofstream(dir / "train.lst") << "# training\n\na.raw,a.csv\n/abs/b.edf,b.csv\n";
  const auto list = read_training_list(dir / "train.lst");
  ASSERT_EQ(list.size(), 2u);
  EXPECT_EQ(list[0].recording_path, dir / "a.raw");
  EXPECT_EQ(list[1].recording_path, "/abs/b.edf");
  EXPECT_EQ(list[1].annotations_path, dir / "b.csv");
  std::ofstream(dir / "bad.lst") << "only-one-field\n";
  EXPECT_THROW(read_training_list(dir / "bad.lst"), DataError);
  std::ofstream(dir / "empty.lst") << "# nothing\n";
  EXPECT_THROW(read_training_list(dir / "empty.lst"), DataError);
}

TEST_F(TrainedBundle, EncodingIsIdempotent) {
  const std::string bytes = encode_bundle(*bundle_);
  EXPECT_EQ(encode_bundle(decode_bundle(bytes)), bytes);
  EXPECT_EQ(bundle_->manifest.seed, 5u);
  ASSERT_EQ(bundle_->manifest.data_checksums.size(), 1u);
  EXPECT_EQ(bundle_->manifest.data_checksums[0].first, "synth-31");
}

TEST_F(TrainedBundle, CorruptBundlesAreRejected) {
  const std::string bytes = encode_bundle(*bundle_);
  EXPECT_THROW(decode_bundle(bytes.substr(0, bytes.size() - 10)), DataError);
  EXPECT_THROW(decode_bundle("XXXX" + bytes.substr(4)), DataError);
  // Editing the stored config without updating the manifest hash.
  std::string edited = bytes;
  const auto pos = edited.find("mixtures = 2");
  ASSERT_NE(pos, std::string::npos);
  edited[pos + 11] = '3';
  EXPECT_THROW(decode_bundle(edited), DataError);
}

TEST_F(TrainedBundle, DecodingIsDeterministicAndCoversTheRecording) {
  const auto a = decode(*bundle_, eval_->recording);
  const auto b = decode(decode_bundle(encode_bundle(*bundle_)), eval_->recording);
  EXPECT_EQ(a.epoch_labels, b.epoch_labels);
  EXPECT_EQ(a.hypothesis, b.hypothesis);
  EXPECT_EQ(a.pass1, b.pass1);
  ASSERT_EQ(a.epoch_labels.size(), 60u);
  EXPECT_EQ(epochs_covered(a.hypothesis), 60u);
  validate(a.hypothesis, 60.0);
}

TEST_F(TrainedBundle, StopAfterSelectsTheLastPass) {
  const auto one = decode(*bundle_, eval_->recording, 1);
  EXPECT_FALSE(one.pass2.has_value());
  EXPECT_TRUE(one.epoch_labels.empty());
  for (const auto& e : one.hypothesis.events) EXPECT_TRUE(e.channel.has_value());
  const auto two = decode(*bundle_, eval_->recording, 2);
  ASSERT_TRUE(two.pass2.has_value());
  EXPECT_FALSE(two.pass3.has_value());
  EXPECT_EQ(two.epoch_labels, argmax_labels(two.pass2->enhanced));
  for (const auto& e : two.hypothesis.events) EXPECT_FALSE(e.channel.has_value());
  EXPECT_THROW(decode(*bundle_, eval_->recording, 0), UsageError);
  EXPECT_THROW(decode(*bundle_, eval_->recording, 4), UsageError);
}

TEST_F(TrainedBundle, GrammarChangesLabelsOnlyWhereContextDisagrees) {
  Bundle flat = *bundle_;
  for (auto& row : flat.bigram.prob) row.fill(1.0 / 6.0);
  const auto r = decode(flat, eval_->recording);
  EXPECT_EQ(r.epoch_labels, argmax_labels(r.pass2->enhanced));
  // With the clinical table, an epoch changes only when some pass-2 label
  // inside its context window differs from its own.
  const auto c = decode(*bundle_, eval_->recording);
  const auto p2 = argmax_labels(c.pass2->enhanced);
  const std::size_t w = bundle_->config.grammar.window;
  for (std::size_t e = 0; e < p2.size(); ++e) {
    if (c.epoch_labels[e] == p2[e]) continue;
    bool disagreement = false;
    for (std::size_t j = e > w ? e - w : 0; j <= std::min(e + w, p2.size() - 1); ++j) disagreement |= p2[j] != p2[e];
    EXPECT_TRUE(disagreement) << "epoch " << e;
  }
}

TEST_F(TrainedBundle, WrongChannelCountFailsAsDataError) {
  std::vector<ChannelSignal> ch;
  for (int c = 0; c < 20; ++c) ch.push_back({"c" + std::to_string(c), std::vector<double>(2500, 0.0)});
  EXPECT_THROW(decode(*bundle_, Recording("short", 250.0, ch)), DataError);
}

TEST(Training, MissingClassIsNamed) {
  const SynthScript script = {{EventLabel::BCKG, 20.0, std::nullopt}, {EventLabel::SPSW, 5.0, std::nullopt},
                              {EventLabel::BCKG, 10.0, std::nullopt}, {EventLabel::EYEM, 6.0, std::nullopt},
                              {EventLabel::ARTF, 6.0, std::nullopt},  {EventLabel::BCKG, 10.0, std::nullopt}};
  const auto r = generate(script, 41);
  try {
    train_bundle({{r.recording, r.annotations}}, small_config());
    FAIL();
  } catch (const DataError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("PLED"), std::string::npos) << what;
    EXPECT_NE(what.find("GPED"), std::string::npos) << what;
  }
  EXPECT_THROW(train_bundle({}, small_config()), DataError);
  EXPECT_THROW(train_bundle({{r.recording, r.annotations}}, PipelineConfig{}), UsageError);
}

TEST(PosteriorCsv, RoundTripIsExact) {
  Rng rng(3);
  std::vector<ClassVector> seq(7);
  for (auto& p : seq)
    for (auto& v : p) v = uniform01(rng);
  std::stringstream ss;
  write_epoch_posteriors(seq, ss);
  EXPECT_EQ(read_epoch_posteriors(ss), seq);
  std::istringstream gap("epoch,SPSW,PLED,GPED,EYEM,ARTF,BCKG\n1,0,0,0,0,0,1\n");
  EXPECT_THROW(read_epoch_posteriors(gap), DataError);
}

// ---------------------------------------------------------------------------
// Command line

int cli(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "seqdet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

TEST(Cli, UsageErrorsExitWithOne) {
  EXPECT_EQ(cli({}), 1);
  EXPECT_EQ(cli({"frobnicate"}), 1);
  EXPECT_EQ(cli({"synth", "--seed", "1"}), 1);
  TempDir dir("cli-usage");
  EXPECT_EQ(cli({"synth", "--seed", "1", "--recording", dir / "r.raw", "--annotations", dir / "a.csv"}), 1);
  std::ofstream(dir / "bad.ini") << "[hmm]\nbogus = 1\n";
  std::ofstream(dir / "list.lst") << "r.raw,a.csv\n";
  std::string err;
  EXPECT_EQ(cli({"train", "--config", dir / "bad.ini", "--list", dir / "list.lst", "--out", dir / "b"}, nullptr, &err), 1);
  EXPECT_NE(err.find("bogus"), std::string::npos);
  std::string out;
  EXPECT_EQ(cli({"--help"}, &out), 0);
  EXPECT_NE(out.find("decode"), std::string::npos);
}

TEST(Cli, DataErrorsExitWithTwo) {
  TempDir dir("cli-data");
  std::ofstream(dir / "ref.csv") << "channel,start_s,stop_s,label\n*,0.0000,10.0000,BCKG\n";
  std::ofstream(dir / "hyp.csv") << "channel,start_s,stop_s,label\n*,0.0000,8.0000,BCKG\n";
  std::ofstream(dir / "junk.csv") << "not,an,annotation\n";
  std::string err;
  EXPECT_EQ(cli({"score", "--ref", dir / "ref.csv", "--hyp", dir / "hyp.csv"}, nullptr, &err), 2);
  EXPECT_NE(err.find("10"), std::string::npos);
  EXPECT_EQ(cli({"score", "--ref", dir / "ref.csv", "--hyp", dir / "junk.csv"}), 2);
  std::ofstream(dir / "bundle") << "not a bundle";
  std::ofstream(dir / "rec.raw") << "garbage";
  EXPECT_EQ(cli({"decode", "--bundle", dir / "bundle", dir / "rec.raw"}), 2);
}

TEST(Cli, SynthTrainDecodeScoreDet) {
  TempDir dir("cli-flow");
  std::ofstream(dir / "small.ini") << small_config_text(8);
  ASSERT_EQ(cli({"synth", "--seed", "51", "--duration", "150", "--recording", dir / "train.raw", "--annotations",
                 dir / "train.csv"}),
            0);
  ASSERT_EQ(cli({"synth", "--seed", "52", "--duration", "60", "--recording", dir / "eval.raw", "--annotations",
                 dir / "eval.csv"}),
            0);
  std::ofstream(dir / "train.lst") << "train.raw,train.csv\n";
  std::string out;
  ASSERT_EQ(cli({"train", "--config", dir / "small.ini", "--list", dir / "train.lst", "--out", dir / "model.bundle",
                 "--seed", "9"}, &out),
            0);
  EXPECT_EQ(load_bundle(dir / "model.bundle").manifest.seed, 9u);
  ASSERT_EQ(cli({"decode", "--bundle", dir / "model.bundle", "--out-dir", dir.path().string(), "--posteriors",
                 dir / "eval.raw"}),
            0);
  for (const char* f : {"eval.hyp.csv", "eval.pass1.csv", "eval.pass2.csv", "eval.pass3.csv"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  ASSERT_EQ(cli({"score", "--ref", dir / "eval.csv", "--hyp", dir / "eval.hyp.csv", "--mode", "two_way", "--out",
                 dir / "report"}, &out),
            0);
  EXPECT_NE(out.find("sensitivity"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "report.csv"));
  EXPECT_EQ(cli({"score", "--ref", dir / "eval.csv", "--hyp", dir / "eval.hyp.csv", "--mode", "nine_way"}), 1);
  ASSERT_EQ(cli({"det", "--ref", dir / "eval.csv", "--posteriors", dir / "eval.pass3.csv"}, &out), 0);
  EXPECT_EQ(out.substr(0, out.find('\n')), "offset,false_alarm,miss");
  EXPECT_EQ(static_cast<std::size_t>(std::count(out.begin(), out.end(), '\n')), 52u);
  // Pass-1 posteriors carry a channel column and are not a DET input.
  EXPECT_EQ(cli({"det", "--ref", dir / "eval.csv", "--posteriors", dir / "eval.pass1.csv"}), 2);
}

}  // namespace
}  // namespace seqdet
