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

#ifndef SEQDET_CLI_HPP
#define SEQDET_CLI_HPP

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "seqdet/pipeline.hpp"
#include "seqdet/synth.hpp"

namespace seqdet {

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_file_bytes(path.string(), text);
}

template <typename F>
std::string to_text(F&& f) {
  std::ostringstream os;
  f(os);
  return os.str();
}

inline ScoringMode parse_mode(const std::string& s) {
  if (s == "six_way" || s == "6") return ScoringMode::six_way;
  if (s == "four_way" || s == "4") return ScoringMode::four_way;
  if (s == "two_way" || s == "2") return ScoringMode::two_way;
  throw UsageError("--mode must be six_way, four_way or two_way");
}

inline ScoringBasis parse_basis(const std::string& s) {
  if (s == "epoch") return ScoringBasis::per_epoch;
  if (s == "channel") return ScoringBasis::per_channel_event;
  throw UsageError("--basis must be epoch or channel");
}

}  // namespace detail

/// Entry point of the `seqdet` tool. Returns the process exit code:
/// 0 success, 1 usage, 2 data, 3 numeric failure.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Three-pass EEG event detection: train, decode, score"};
  app.require_subcommand(1);

  std::string config_path, list_path, bundle_path, bigram;
  std::optional<std::uint64_t> seed;

  auto* train = app.add_subcommand("train", "Train all passes and write one model bundle");
  train->add_option("--config", config_path, "INI configuration")->check(CLI::ExistingFile);
  train->add_option("--list", list_path, "Training list, one 'recording,annotations' per line")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--out", bundle_path, "Output bundle")->required();
  train->add_option("--seed", seed, "Seed (overrides the config)");
  train->add_option("--bigram", bigram, "Bigram source")->check(CLI::IsMember({"clinical", "estimate"}));

  int stop_after = 3;
  std::string out_dir = ".";
  std::vector<std::string> recordings;
  bool dump_posteriors = false;
  auto* decode_cmd = app.add_subcommand("decode", "Decode recordings with a trained bundle");
  decode_cmd->add_option("--bundle", bundle_path, "Model bundle")->required()->check(CLI::ExistingFile);
  decode_cmd->add_option("--stop-after", stop_after, "Last pass to run")->check(CLI::Range(1, 3));
  decode_cmd->add_option("--out-dir", out_dir, "Output directory");
  decode_cmd->add_flag("--posteriors", dump_posteriors, "Also write per-pass posterior CSVs");
  decode_cmd->add_option("recordings", recordings, "EDF or raw_matrix recordings")
      ->required()
      ->check(CLI::ExistingFile);

  std::string ref_path, hyp_path, mode = "six_way", basis = "epoch", out_prefix;
  std::size_t channels = kMontageChannels;
  auto* score = app.add_subcommand("score", "Confusion matrix of a hypothesis against a reference");
  score->add_option("--ref", ref_path, "Reference annotations")->required()->check(CLI::ExistingFile);
  score->add_option("--hyp", hyp_path, "Hypothesis annotations")->required()->check(CLI::ExistingFile);
  score->add_option("--mode", mode, "six_way, four_way or two_way");
  score->add_option("--basis", basis, "epoch or channel");
  score->add_option("--channels", channels, "Channel count of the recordings");
  score->add_option("--out", out_prefix, "Write <out>.txt and <out>.csv");

  std::string posteriors_path, det_out;
  auto* det = app.add_subcommand("det", "DET curve from per-epoch posteriors");
  det->add_option("--ref", ref_path, "Reference annotations")->required()->check(CLI::ExistingFile);
  det->add_option("--posteriors", posteriors_path, "Per-epoch posterior CSV")->required()->check(CLI::ExistingFile);
  det->add_option("--channels", channels, "Channel count of the recordings");
  det->add_option("--out", det_out, "Output CSV (default stdout)");

  std::string script_path, rec_out, ann_out;
  double duration = 0.0;
  auto* synth = app.add_subcommand("synth", "Generate a labelled synthetic recording");
  synth->add_option("--script", script_path, "Script CSV 'label,duration_s,channels'")->check(CLI::ExistingFile);
  synth->add_option("--duration", duration, "Random script of this many seconds");
  synth->add_option("--seed", seed, "Seed")->required();
  synth->add_option("--recording", rec_out, "Output raw_matrix recording")->required();
  synth->add_option("--annotations", ann_out, "Output annotation CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) {
      PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : read_config(config_path);
      if (seed) cfg.seed = seed;
      if (!bigram.empty()) cfg.bigram = parse_bigram_source(bigram);
      cfg.validate();
      std::vector<LabeledRecording> data;
      for (const auto& e : read_training_list(list_path))
        data.push_back({read_recording(e.recording_path), read_annotations(e.annotations_path)});
      const Bundle b = train_bundle(data, cfg, &err);
      save_bundle(b, bundle_path);
      out << "wrote " << bundle_path << " (config " << b.manifest.config_hash << ")\n";
    } else if (*decode_cmd) {
      const Bundle b = load_bundle(bundle_path);
      for (const auto& path : recordings) {
        const auto result = decode(b, read_recording(path), stop_after);
        const std::filesystem::path dir(out_dir);
        const std::string stem = stem_of(path);
        detail::write_text(dir / (stem + ".hyp.csv"),
                           detail::to_text([&](std::ostream& os) { write_annotations(result.hypothesis, os); }));
        if (dump_posteriors) {
          detail::write_text(dir / (stem + ".pass1.csv"),
                             detail::to_text([&](std::ostream& os) { write_channel_posteriors(result.pass1, os); }));
          if (result.pass2)
            detail::write_text(dir / (stem + ".pass2.csv"), detail::to_text([&](std::ostream& os) {
                                 write_epoch_posteriors(result.pass2->enhanced, os);
                               }));
          if (result.pass3)
            detail::write_text(dir / (stem + ".pass3.csv"), detail::to_text([&](std::ostream& os) {
                                 write_epoch_posteriors(result.pass3->posteriors, os);
                               }));
        }
        out << path << ": " << result.hypothesis.events.size() << " events\n";
      }
    } else if (*score) {
      const auto m = score_annotations(read_annotations(ref_path), read_annotations(hyp_path), channels,
                                       detail::parse_mode(mode), detail::parse_basis(basis));
      const std::string text = detail::to_text([&](std::ostream& os) { write_report(m, os); });
      out << text;
      if (!out_prefix.empty()) {
        detail::write_text(out_prefix + ".txt", text);
        detail::write_text(out_prefix + ".csv", detail::to_text([&](std::ostream& os) { write_report_csv(m, os); }));
      }
    } else if (*det) {
      std::ifstream in(posteriors_path);
      const auto post = read_epoch_posteriors(in, posteriors_path);
      const auto ref = read_annotations(ref_path);
      const auto labels = epoch_labels(cell_labels(ref, channels, epochs_covered(ref)));
      const auto curve = det_from_posteriors(post, labels);
      const std::string csv = detail::to_text([&](std::ostream& os) { write_det_csv(curve, os); });
      if (det_out.empty()) out << csv;
      else detail::write_text(det_out, csv);
    } else if (*synth) {
      if (script_path.empty() == (duration <= 0.0)) throw UsageError("synth needs exactly one of --script or --duration");
      const SynthScript script = script_path.empty() ? random_script(duration, *seed) : read_script(script_path);
      const auto r = generate(script, *seed);
      write_raw_matrix(r.recording, rec_out);
      write_annotations(r.annotations, ann_out);
      out << "wrote " << rec_out << " and " << ann_out << '\n';
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace seqdet

#endif  // SEQDET_CLI_HPP
