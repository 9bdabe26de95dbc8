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

// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed below.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include "gradcheck.hpp"
#include "seqdet/cli.hpp"
#include "seqdet/pipeline.hpp"
#include "seqdet/synth.hpp"
#include "test_support.hpp"

namespace seqdet {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome r;
  try {
    r = body();
  } catch (const std::exception& e) {
    r = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = s <= budget_s;
  const bool pass = r.pass && in_time;
  failures += !pass;
  std::cout << (pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << r.detail << std::fixed
            << std::setprecision(2) << " (" << s << " s, budget " << budget_s << " s"
            << (in_time ? "" : ", over budget") << ")" << std::endl;
  std::cout.unsetf(std::ios::floatfield);
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

// ---------------------------------------------------------------------------

Outcome evaluation_arithmetic() {
  auto table = [](double tt, double tb, double bt, double bb) {
    return sens_spec(ConfusionMatrix::from_percentages(ScoringMode::two_way, ScoringBasis::per_epoch,
                                                      {{tt, tb}, {bt, bb}}));
  };
  const auto third = table(90.10, 9.90, 4.89, 95.11);
  const auto first = table(86.92, 13.08, 18.20, 81.80);
  const std::string a = format_percent(third.sensitivity) + "/" + format_percent(third.false_alarm);
  const std::string b = format_percent(first.sensitivity) + "/" + format_percent(first.false_alarm);
  return {a == "90.10/4.89" && b == "86.92/18.20", "pass-3 table " + a + ", pass-1 table " + b};
}

Outcome hmm_exactness() {
  constexpr double kTol = 1e-8;
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 3), len = 1 + uniform_index(rng, 8), l = 1 + uniform_index(rng, 2);
    const std::size_t dim = 1 + uniform_index(rng, 3);
    const auto m = testing::random_model(rng, n, l, dim);
    const auto data = testing::random_observations(rng, len, dim);
    const ObservationView obs(data, dim);
    const auto brute = testing::enumerate_paths(m, obs);
    worst = std::max({worst, std::abs(forward_backward(m, obs).log_likelihood - brute.log_sum),
                      std::abs(viterbi(m, obs).log_score - brute.log_max)});
  }
  return {worst < kTol, "max |log-prob error| " + fmt(worst) + " over 200 models (tol 1e-8)"};
}

Outcome em_monotonicity() {
  constexpr double kTol = 1e-8;
  const SynthScript script = {{EventLabel::BCKG, 12.0, std::nullopt}, {EventLabel::SPSW, 6.0, std::nullopt},
                              {EventLabel::BCKG, 10.0, std::nullopt}, {EventLabel::GPED, 12.0, std::nullopt},
                              {EventLabel::BCKG, 8.0, std::nullopt},  {EventLabel::SPSW, 6.0, std::nullopt},
                              {EventLabel::BCKG, 6.0, std::nullopt}};
  const auto r = generate(script, 3);
  const auto feats = extract_features(r.recording);
  const auto cells = cell_labels(r.annotations, feats.num_channels(), feats.num_epochs());
  EpochCorpus corpus;
  for (std::size_t e = 0; e < feats.num_epochs(); ++e)
    for (std::size_t c = 0; c < feats.num_channels(); ++c)
      corpus[index_of(cells[e][c])].emplace_back(feats.epoch(c, e), kFeatureDim);
  double worst_drop = 0.0;
  std::size_t classes = 0;
  std::string totals;
  for (EventLabel label : kAllLabels) {
    const auto& data = corpus[index_of(label)];
    if (data.empty()) continue;
    ++classes;
    auto m = init_model(label, 3, 8, data, 11);
    double previous = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < 10; ++it) {
      const auto step = reestimate(m, data);
      worst_drop = std::max(worst_drop, previous - step.log_likelihood);
      previous = step.log_likelihood;
      m = step.model;
    }
    totals += std::string(totals.empty() ? "" : ", ") + std::string(to_string(label)) + " " + fmt(previous, 8);
  }
  return {classes == 3 && worst_drop <= kTol,
          std::to_string(classes) + " classes, largest decrease " + fmt(std::max(worst_drop, 0.0)) +
              " (tol 1e-8); final log-likelihoods " + totals};
}

Outcome sda_gradients() {
  constexpr double kTol = 1e-4;
  constexpr std::size_t kProbes = 50;
  Rng rng(4);
  double worst = 0.0;
  std::size_t probes = 0, shapes = 0;
  for (const SdaConfig& cfg : {spsw_sda_config(), eyem_sda_config(), sixway_sda_config()}) {
    std::size_t in = cfg.input_dim();
    for (std::size_t h : cfg.hidden) {
      const auto s = testing::check_dae_gradient(in, h, kProbes, rng);
      worst = std::max(worst, s.max_relative_error);
      probes += s.probes;
      ++shapes;
      in = h;
    }
    const auto f = testing::check_finetune_gradient(cfg, kProbes, rng);
    worst = std::max(worst, f.max_relative_error);
    probes += f.probes;
    shapes += cfg.hidden.size() + 1;
  }
  return {worst < kTol, std::to_string(probes) + " probes over " + std::to_string(shapes) +
                            " layer shapes, max relative error " + fmt(worst) + " (tol 1e-4)"};
}

Outcome pca_oracle() {
  constexpr double kTol = 1e-6;
  Rng rng(5);
  Matrix mix(132, 132), src(132, 500);
  for (Eigen::Index i = 0; i < mix.size(); ++i) mix(i) = standard_normal(rng);
  for (Eigen::Index i = 0; i < src.size(); ++i) src(i) = standard_normal(rng);
  for (Eigen::Index i = 0; i < 132; ++i) src.row(i) *= std::exp(-0.03 * static_cast<double>(i));
  const Matrix x = mix * src / std::sqrt(132.0);
  const Matrix centered = x.colwise() - x.rowwise().mean();
  const Matrix cov = centered * centered.transpose() / 500.0;
  std::vector<double> flat(132 * 132);
  for (Eigen::Index i = 0; i < 132; ++i)
    for (Eigen::Index j = 0; j < 132; ++j) flat[static_cast<std::size_t>(i * 132 + j)] = cov(i, j);
  const auto ev = testing::jacobi_eigenvalues(flat, 132);
  double worst = 0.0;
  for (Eigen::Index k : {13, 20}) {
    const auto model = fit_pca(x, k);
    double err = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      err += (x.col(j) - model.reconstruct(model.project(x.col(j)))).squaredNorm();
    double dropped = 0.0;
    for (std::size_t i = static_cast<std::size_t>(k); i < 132; ++i) dropped += ev[i];
    worst = std::max(worst, std::abs(err / 500.0 - dropped));
  }
  return {worst < kTol, "k = 13, 20 on 132-D x 500: max |error - dropped eigenvalues| " + fmt(worst) + " (tol 1e-6)"};
}

Outcome grammar_invariants() {
  Rng rng(6);
  BigramTable uniform;
  for (auto& row : uniform.prob) row.fill(1.0 / 6.0);
  auto random_distribution = [&rng] {
    ClassVector p;
    double s = 0.0;
    for (auto& v : p) s += (v = uniform01(rng) + 1e-6);
    for (auto& v : p) v /= s;
    return p;
  };
  int changed = 0;
  for (int trial = 0; trial < 100; ++trial) {
    PosteriorSequence seq;
    const auto len = 1 + uniform_index(rng, 40);
    for (std::size_t i = 0; i < len; ++i) seq.push_back(random_distribution());
    changed += decode_pass3(seq, uniform, GrammarParams{}).labels != argmax_labels(seq);
  }
  ClassVector pled{};
  pled[index_of(EventLabel::PLED)] = 1.0;
  PosteriorSequence ctx(3, pled);
  ctx[1] = {0.5, 0.3, 0.05, 0.05, 0.05, 0.05};
  GrammarParams no_blend;
  no_blend.prior_blend = 0.0;
  const double spsw = grammar_update(ctx, default_bigram(), no_blend, 1)[1][index_of(EventLabel::SPSW)];
  const auto raw = clinical_bigram_raw();
  const bool table_ok = raw(EventLabel::PLED, EventLabel::PLED) == 0.90 && raw(EventLabel::PLED, EventLabel::SPSW) == 0.0;
  return {changed == 0 && spsw < 1e-12 && table_ok,
          std::to_string(changed) + "/100 uniform-table sequences changed argmax; SPSW after certain-PLED context " +
              fmt(spsw) + " (tol 1e-12, blend 0); PLED->PLED " + fmt(raw(EventLabel::PLED, EventLabel::PLED)) +
              ", PLED->SPSW " + fmt(raw(EventLabel::PLED, EventLabel::SPSW))};
}

Outcome feature_closed_forms() {
  std::vector<double> ramp(50);
  for (std::size_t t = 0; t < ramp.size(); ++t) ramp[t] = static_cast<double>(t);
  double delta_err = 0.0;
  const auto d = deltas(ramp, 9);
  for (std::size_t t = 9; t + 9 < ramp.size(); ++t) delta_err = std::max(delta_err, std::abs(d[t] - 1.0));
  double ed_max = 0.0;
  for (double v : differential_energy(std::vector<double>(40, -2.5), 9)) ed_max = std::max(ed_max, std::abs(v));

  Rng rng(7);
  std::vector<double> x(1250);
  for (auto& v : x) v = 20.0 * standard_normal(rng);
  std::vector<double> y(x);
  for (auto& v : y) v *= 2.0;
  const auto gx = extract_features(Recording("x", 250.0, {{"a", x}}));
  const auto gy = extract_features(Recording("y", 250.0, {{"a", y}}));
  double ef_err = 0.0;
  for (std::size_t t = 0; t < gx.num_frames(); ++t)
    ef_err = std::max(ef_err, std::abs(gy.frame(0, t)[7] - gx.frame(0, t)[7] - std::log(4.0)));
  const std::size_t dim = gx.frame(0, 0).size();
  return {delta_err < 1e-12 && ed_max == 0.0 && ef_err < 1e-6 && dim == 26,
          "ramp delta error " + fmt(delta_err) + ", constant E_d " + fmt(ed_max) + ", E_f shift error " + fmt(ef_err) +
              " (tol 1e-6), feature length " + std::to_string(dim)};
}

// ---------------------------------------------------------------------------
// End to end through the command-line tool.

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "seqdet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::cerr << "seqdet " << args[1] << " failed (" << code << "): " << err.str();
  return code;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// synth (600 s train, 300 s eval) -> train -> decode, seed 7, shipped config.
bool full_run(const std::filesystem::path& dir) {
  const std::string config = std::string(SEQDET_SOURCE_DIR) + "/config/default.ini";
  std::ofstream(dir / "train.lst") << "train.raw,train.csv\n";
  return cli({"synth", "--seed", "7", "--duration", "600", "--recording", dir / "train.raw", "--annotations",
              dir / "train.csv"}) == 0 &&
         cli({"synth", "--seed", "107", "--duration", "300", "--recording", dir / "eval.raw", "--annotations",
              dir / "eval.csv"}) == 0 &&
         cli({"train", "--config", config, "--seed", "7", "--list", dir / "train.lst", "--out",
              dir / "model.bundle"}) == 0 &&
         cli({"decode", "--bundle", dir / "model.bundle", "--out-dir", dir.string(), "--posteriors",
              dir / "eval.raw"}) == 0;
}

struct EndToEnd {
  testing::TempDir first{"accept-a"};
  testing::TempDir second{"accept-b"};
  bool first_ok = false;
  bool second_ok = false;
  std::vector<EventLabel> reference;
  std::optional<DecodeResult> result;
};

std::vector<EventLabel> majority_labels(const PosteriorGrid& g) {
  std::vector<EventLabel> out;
  for (std::size_t e = 0; e < g.num_epochs(); ++e) {
    std::array<int, kNumClasses> votes{};
    for (std::size_t c = 0; c < g.num_channels(); ++c) ++votes[index_of(g.label(e, c))];
    out.push_back(label_from_index(static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin())));
  }
  return out;
}

Outcome synthetic_recovery(EndToEnd& run) {
  run.first_ok = full_run(run.first.path());
  if (!run.first_ok) return {false, "command-line run failed"};
  const auto bundle = load_bundle(run.first / "model.bundle");
  const auto ref = read_annotations(run.first / "eval.csv");
  run.reference = epoch_labels(cell_labels(ref, kMontageChannels, epochs_covered(ref)));
  run.result = decode(bundle, read_recording(run.first / "eval.raw"));
  std::ostringstream hyp;
  write_annotations(run.result->hypothesis, hyp);
  if (hyp.str() != slurp(run.first / "eval.hyp.csv")) return {false, "in-process decode differs from the tool output"};

  const auto six = confusion(run.reference, run.result->epoch_labels, ScoringMode::six_way, ScoringBasis::per_epoch);
  const auto two = collapse_matrix(six, ScoringMode::two_way);
  const auto ss = sens_spec(two);
  const auto baseline =
      confusion(run.reference, majority_labels(run.result->pass1), ScoringMode::two_way, ScoringBasis::per_epoch);
  const bool pass = six.accuracy() >= 0.90 && ss.sensitivity && *ss.sensitivity >= 95.0 && ss.false_alarm &&
                    *ss.false_alarm <= 5.0 && two.accuracy() >= baseline.accuracy();
  return {pass, "6-way accuracy " + format_percent(100 * six.accuracy()) + "% (>= 90), sensitivity " +
                    format_percent(ss.sensitivity) + "% (>= 95), false alarm " + format_percent(ss.false_alarm) +
                    "% (<= 5), pass-3 2-way accuracy " + format_percent(100 * two.accuracy()) +
                    "% vs pass-1 channel majority " + format_percent(100 * baseline.accuracy()) + "%"};
}

Outcome det_monotonicity(const EndToEnd& run) {
  if (!run.result) return {false, "no decode result"};
  const auto& post = run.result->pass3->posteriors;
  const auto curve = det_from_posteriors(post, run.reference, default_offsets(50));
  bool monotone = true;
  for (std::size_t i = 1; i < curve.points.size(); ++i)
    monotone = monotone && curve.points[i].miss <= curve.points[i - 1].miss &&
               curve.points[i].false_alarm >= curve.points[i - 1].false_alarm;
  const DetPoint* zero = curve.at_offset(0.0);
  std::size_t fa = 0, bckg = 0, miss = 0, targ = 0;
  for (std::size_t e = 0; e < post.size(); ++e) {
    const bool hyp = target_score(post[e]) > 0.5;
    if (is_epileptiform(run.reference[e])) ++targ, miss += !hyp;
    else ++bckg, fa += hyp;
  }
  const bool on_curve = zero && zero->false_alarm == static_cast<double>(fa) / static_cast<double>(bckg) &&
                        zero->miss == static_cast<double>(miss) / static_cast<double>(targ);
  return {monotone && on_curve && curve.points.size() == 51,
          std::to_string(curve.points.size()) + " points, monotone " + (monotone ? "yes" : "no") +
              ", zero-penalty point " + (zero ? "(FA " + fmt(zero->false_alarm) + ", miss " + fmt(zero->miss) + ")" : "missing")};
}

Outcome determinism(EndToEnd& run) {
  if (!run.first_ok) return {false, "first run failed"};
  run.second_ok = full_run(run.second.path());
  if (!run.second_ok) return {false, "second run failed"};
  std::string detail;
  bool same = true;
  for (const char* f : {"model.bundle", "eval.hyp.csv", "eval.pass1.csv", "eval.pass2.csv", "eval.pass3.csv"}) {
    const auto a = slurp(run.first / f), b = slurp(run.second / f);
    const bool eq = !a.empty() && a == b;
    same = same && eq;
    detail += std::string(detail.empty() ? "" : ", ") + f + (eq ? " identical" : " DIFFERS");
  }
  return {same, detail};
}

}  // namespace
}  // namespace seqdet

int main() {
  using namespace seqdet;
  criterion(1, "evaluation arithmetic", 1, evaluation_arithmetic);
  criterion(2, "HMM exactness", 30, hmm_exactness);
  criterion(3, "EM monotonicity", 120, em_monotonicity);
  criterion(4, "SdA gradients", 120, sda_gradients);
  criterion(5, "PCA oracle", 60, pca_oracle);
  criterion(6, "grammar invariants", 10, grammar_invariants);
  criterion(7, "feature closed forms", 10, feature_closed_forms);
  EndToEnd run;
  criterion(8, "end-to-end synthetic recovery", 900, [&] { return synthetic_recovery(run); });
  criterion(9, "DET monotonicity", 10, [&] { return det_monotonicity(run); });
  criterion(10, "determinism", 900, [&] { return determinism(run); });
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures;
}
