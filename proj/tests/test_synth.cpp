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

#include <map>
#include <set>
#include <sstream>

#include "seqdet/annotations.hpp"
#include "seqdet/grammar.hpp"
#include "seqdet/synth.hpp"

namespace seqdet {
namespace {

TEST(Synth, BackgroundOnlyRecording) {
  const auto r = generate({{EventLabel::BCKG, 10.0, std::nullopt}}, 3);
  EXPECT_EQ(r.recording.num_channels(), 22u);
  EXPECT_EQ(r.recording.sample_rate_hz(), 250.0);
  EXPECT_EQ(r.recording.num_samples(), 2500u);
  EXPECT_EQ(r.recording.channels()[0].label, "FP1-F7");
  const auto labels = epoch_labels(cell_labels(r.annotations, 22, 10, 1.0));
  EXPECT_EQ(labels, std::vector<EventLabel>(10, EventLabel::BCKG));
  validate(r.annotations, 10.0);
}

TEST(Synth, SameSeedIsIdenticalDifferentSeedIsNot) {
  const SynthScript s = {{EventLabel::BCKG, 3.0, std::nullopt}, {EventLabel::SPSW, 4.0, std::nullopt},
                         {EventLabel::BCKG, 3.0, std::nullopt}};
  const auto a = generate(s, 5), b = generate(s, 5), c = generate(s, 6);
  EXPECT_EQ(a.recording.channels()[2].samples, b.recording.channels()[2].samples);
  EXPECT_EQ(a.annotations, b.annotations);
  EXPECT_NE(a.recording.channels()[2].samples, c.recording.channels()[2].samples);
}

TEST(Synth, EpochLabelCountsMatchScriptDurations) {
  const auto script = random_script(300.0, 17);
  std::map<EventLabel, std::size_t> expect;
  double total = 0.0;
  for (const auto& e : script) {
    expect[e.label] += static_cast<std::size_t>(e.duration_s);
    total += e.duration_s;
  }
  ASSERT_EQ(total, 300.0);
  const auto r = generate(script, 17);
  const auto labels = epoch_labels(cell_labels(r.annotations, 22, 300, 1.0));
  std::map<EventLabel, std::size_t> got;
  for (EventLabel l : labels) ++got[l];
  EXPECT_EQ(got, expect);
  EXPECT_EQ(expect.size(), kNumClasses);
}

TEST(Synth, EventsAnnotatedOnTheirChannelSubsetOnly) {
  const SynthScript s = {{EventLabel::BCKG, 2.0, std::nullopt}, {EventLabel::PLED, 5.0, std::vector<int>{3, 7}}};
  const auto r = generate(s, 9);
  const auto cells = cell_labels(r.annotations, 22, 7, 1.0);
  for (std::size_t e = 2; e < 7; ++e)
    for (std::size_t c = 0; c < 22; ++c)
      EXPECT_EQ(cells[e][c], (c == 3 || c == 7) ? EventLabel::PLED : EventLabel::BCKG) << e << "," << c;
  EXPECT_EQ(cells[1][3], EventLabel::BCKG);
}

TEST(Synth, EventChannelsCarryMoreEnergyThanBackground) {
  const SynthScript s = {{EventLabel::SPSW, 20.0, std::nullopt}};
  const auto r = generate(s, 21);
  auto power = [&](std::size_t c) {
    double p = 0.0;
    for (double v : r.recording.channels()[c].samples) p += v * v;
    return p;
  };
  for (int c : default_channels(EventLabel::SPSW, 22)) EXPECT_GT(power(static_cast<std::size_t>(c)), 1.5 * power(5));
}

TEST(Synth, InvalidScriptsRejected) {
  EXPECT_THROW(generate({}, 1), UsageError);
  EXPECT_THROW(generate({{EventLabel::SPSW, 2.0, std::vector<int>{0, 22}}}, 1), DataError);
  EXPECT_THROW(generate({{EventLabel::SPSW, 2.0, std::vector<int>{-1}}}, 1), DataError);
  EXPECT_THROW(generate({{EventLabel::SPSW, 2.0, std::vector<int>{}}}, 1), DataError);
  EXPECT_THROW(generate({{EventLabel::SPSW, 1.5, std::nullopt}}, 1), DataError);
  EXPECT_THROW(generate({{EventLabel::SPSW, 0.0, std::nullopt}}, 1), DataError);
}

TEST(Synth, DefaultChannelSubsets) {
  EXPECT_EQ(default_channels(EventLabel::SPSW, 22), (std::vector<int>{1, 2, 9, 15}));
  EXPECT_EQ(default_channels(EventLabel::GPED, 22).size(), 22u);
  EXPECT_EQ(default_channels(EventLabel::EYEM, 4), (std::vector<int>{0}));
  EXPECT_EQ(tcp_channel_labels().size(), 22u);
}

TEST(Script, RoundTripAndParseErrors) {
  const SynthScript s = {{EventLabel::EYEM, 4.0, std::vector<int>{0, 4}}, {EventLabel::BCKG, 12.0, std::nullopt}};
  std::stringstream ss;
  write_script(s, ss);
  EXPECT_EQ(ss.str(), "label,duration_s,channels\nEYEM,4,0;4\nBCKG,12,*\n");
  EXPECT_EQ(parse_script(ss), s);
  std::istringstream empty_channels("label,duration_s,channels\nGPED,3,\n");
  EXPECT_FALSE(parse_script(empty_channels)[0].channels.has_value());
  std::istringstream bad_header("label,duration\n");
  EXPECT_THROW(parse_script(bad_header), DataError);
  std::istringstream bad_label("label,duration_s,channels\nSEIZ,3,*\n");
  EXPECT_THROW(parse_script(bad_label), DataError);
  std::istringstream bad_fields("label,duration_s,channels\nSPSW,3\n");
  EXPECT_THROW(parse_script(bad_fields), DataError);
}

TEST(Script, RandomScriptsFollowAllowedTransitions) {
  const auto table = clinical_bigram_raw();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = random_script(200.0, seed);
    double total = 0.0;
    std::set<EventLabel> seen;
    for (std::size_t i = 0; i < s.size(); ++i) {
      total += s[i].duration_s;
      seen.insert(s[i].label);
      if (i > 0) {
        EXPECT_NE(s[i].label, s[i - 1].label);
        EXPECT_GT(table(s[i - 1].label, s[i].label), 0.0);
      }
    }
    EXPECT_EQ(total, 200.0);
    EXPECT_EQ(seen.size(), kNumClasses);
  }
  EXPECT_EQ(random_script(120.0, 4), random_script(120.0, 4));
  EXPECT_THROW(random_script(3.0, 1), UsageError);
}

}  // namespace
}  // namespace seqdet
