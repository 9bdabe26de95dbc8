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

#ifndef SEQDET_CONFIG_HPP
#define SEQDET_CONFIG_HPP

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "seqdet/error.hpp"
#include "seqdet/features.hpp"
#include "seqdet/grammar.hpp"
#include "seqdet/hmm.hpp"
#include "seqdet/pass2.hpp"

namespace seqdet {

enum class BigramSource { clinical, estimate };
enum class PriorSource { uniform, training };

inline BigramSource parse_bigram_source(const std::string& s) {
  if (s == "clinical") return BigramSource::clinical;
  if (s == "estimate") return BigramSource::estimate;
  throw UsageError("bigram source must be 'clinical' or 'estimate', got '" + s + "'");
}

inline std::string to_string(BigramSource s) { return s == BigramSource::clinical ? "clinical" : "estimate"; }

inline PriorSource parse_prior_source(const std::string& s) {
  if (s == "uniform") return PriorSource::uniform;
  if (s == "training") return PriorSource::training;
  throw UsageError("priors must be 'uniform' or 'training', got '" + s + "'");
}

inline std::string to_string(PriorSource s) { return s == PriorSource::uniform ? "uniform" : "training"; }

struct PipelineConfig {
  std::optional<std::uint64_t> seed;
  std::string montage_path;  // empty: recordings are already in montage order
  BigramSource bigram = BigramSource::clinical;
  std::string output_dir = ".";
  FrameSpec features;
  HmmConfig hmm;
  PriorSource priors = PriorSource::uniform;
  Pass2Config pass2;
  GrammarParams grammar;

  /// Seed is mandatory, referenced files must exist, every block must be valid.
  void validate() const {
    if (!seed) throw UsageError("a seed is required (config [pipeline] seed or --seed)");
    if (!montage_path.empty() && !std::filesystem::exists(montage_path))
      throw UsageError("montage file '" + montage_path + "' does not exist");
    features.validate();
    if (hmm.num_states == 0 || hmm.num_mixtures == 0 || hmm.max_iterations == 0)
      throw UsageError("hmm: states, mixtures and iterations must be positive");
    pass2.spsw.validate();
    pass2.eyem.validate();
    pass2.sixway.validate();
    if (pass2.spsw.num_classes != 2 || pass2.eyem.num_classes != 2 || pass2.sixway.num_classes != kNumClasses)
      throw UsageError("sda: detectors need 2 outputs and the six-way network 6");
    if (!(pass2.augment_fraction >= 0.0 && pass2.augment_fraction <= 1.0))
      throw UsageError("sda: augment_fraction must lie in [0,1]");
    grammar.validate();
  }
};

namespace detail {

using Ptree = boost::property_tree::ptree;

/// Shortest text that parses back to the same double.
inline std::string shortest_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

/// Ordered (section, key, value) view of a config; the single source for
/// both the schema and the canonical text.
inline std::vector<std::tuple<std::string, std::string, std::string>> config_entries(const PipelineConfig& c) {
  std::vector<std::tuple<std::string, std::string, std::string>> e;
  auto add = [&e](const std::string& s, const std::string& k, std::string v) { e.emplace_back(s, k, std::move(v)); };
  add("pipeline", "seed", c.seed ? std::to_string(*c.seed) : "");
  add("pipeline", "montage", c.montage_path);
  add("pipeline", "bigram", to_string(c.bigram));
  add("pipeline", "output_dir", c.output_dir);
  const auto& f = c.features;
  add("features", "sample_rate_hz", shortest_double(f.sample_rate_hz));
  add("features", "frame_s", shortest_double(f.frame_s));
  add("features", "window_s", shortest_double(f.window_s));
  add("features", "fft_size", std::to_string(f.fft_size));
  add("features", "num_filters", std::to_string(f.num_filters));
  add("features", "diff_energy_window", std::to_string(f.diff_energy_window));
  add("features", "delta_width_first", std::to_string(f.delta_width_first));
  add("features", "delta_width_second", std::to_string(f.delta_width_second));
  add("hmm", "states", std::to_string(c.hmm.num_states));
  add("hmm", "mixtures", std::to_string(c.hmm.num_mixtures));
  add("hmm", "iterations", std::to_string(c.hmm.max_iterations));
  add("hmm", "tolerance_per_frame", shortest_double(c.hmm.tolerance_per_frame));
  add("hmm", "variance_floor_scale", shortest_double(c.hmm.variance_floor_scale));
  add("hmm", "priors", to_string(c.priors));
  for (const SdaConfig* s : {&c.pass2.spsw, &c.pass2.eyem, &c.pass2.sixway}) {
    const std::string sec = "sda." + s->name;
    add(sec, "window_length", std::to_string(s->window_length));
    add(sec, "reduced_dim", std::to_string(s->reduced_dim));
    add(sec, "hidden", join_sizes(s->hidden));
    add(sec, "outputs", std::to_string(s->num_classes));
    add(sec, "corruption", shortest_double(s->corruption));
    add(sec, "pretrain_lr", shortest_double(s->pretrain_lr));
    add(sec, "pretrain_epochs", std::to_string(s->pretrain_epochs));
    add(sec, "pretrain_batch", std::to_string(s->pretrain_batch));
    add(sec, "finetune_lr", shortest_double(s->finetune_lr));
    add(sec, "finetune_epochs", std::to_string(s->finetune_epochs));
    add(sec, "finetune_batch", std::to_string(s->finetune_batch));
  }
  add("sda", "augment_fraction", shortest_double(c.pass2.augment_fraction));
  const auto& g = c.grammar;
  add("grammar", "epsilon_prior", shortest_double(g.epsilon_prior));
  add("grammar", "prior_weight", shortest_double(g.prior_weight));
  add("grammar", "decay", shortest_double(g.decay));
  add("grammar", "prior_blend", shortest_double(g.prior_blend));
  add("grammar", "grammar_weight", shortest_double(g.grammar_weight));
  add("grammar", "iterations", std::to_string(g.iterations));
  add("grammar", "window", std::to_string(g.window));
  return e;
}

inline double to_double(const std::string& v, const std::string& where) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size() || !std::isfinite(d)) throw UsageError(where + ": expected a number, got '" + v + "'");
  return d;
}

inline std::uint64_t to_uint(const std::string& v, const std::string& where) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    throw UsageError(where + ": expected a non-negative integer, got '" + v + "'");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw UsageError(where + ": integer out of range: '" + v + "'");
  }
}

inline std::vector<std::size_t> to_sizes(const std::string& v, const std::string& where) {
  std::vector<std::size_t> out;
  for (const auto& part : split(v, ',')) out.push_back(static_cast<std::size_t>(to_uint(part, where)));
  return out;
}

inline void assign(PipelineConfig& c, const std::string& sec, const std::string& key, const std::string& v) {
  const std::string where = "config [" + sec + "] " + key;
  auto sz = [&] { return static_cast<std::size_t>(to_uint(v, where)); };
  auto dbl = [&] { return to_double(v, where); };
  if (sec == "pipeline") {
    if (key == "seed") c.seed = v.empty() ? std::nullopt : std::optional(to_uint(v, where));
    else if (key == "montage") c.montage_path = v;
    else if (key == "bigram") c.bigram = parse_bigram_source(v);
    else if (key == "output_dir") c.output_dir = v;
  } else if (sec == "features") {
    auto& f = c.features;
    if (key == "sample_rate_hz") f.sample_rate_hz = dbl();
    else if (key == "frame_s") f.frame_s = dbl();
    else if (key == "window_s") f.window_s = dbl();
    else if (key == "fft_size") f.fft_size = sz();
    else if (key == "num_filters") f.num_filters = sz();
    else if (key == "diff_energy_window") f.diff_energy_window = sz();
    else if (key == "delta_width_first") f.delta_width_first = sz();
    else if (key == "delta_width_second") f.delta_width_second = sz();
  } else if (sec == "hmm") {
    if (key == "states") c.hmm.num_states = sz();
    else if (key == "mixtures") c.hmm.num_mixtures = sz();
    else if (key == "iterations") c.hmm.max_iterations = sz();
    else if (key == "tolerance_per_frame") c.hmm.tolerance_per_frame = dbl();
    else if (key == "variance_floor_scale") c.hmm.variance_floor_scale = dbl();
    else if (key == "priors") c.priors = parse_prior_source(v);
  } else if (sec == "sda") {
    if (key == "augment_fraction") c.pass2.augment_fraction = dbl();
  } else if (sec.starts_with("sda.")) {
    SdaConfig& s = sec == "sda.spsw" ? c.pass2.spsw : sec == "sda.eyem" ? c.pass2.eyem : c.pass2.sixway;
    if (key == "window_length") s.window_length = sz();
    else if (key == "reduced_dim") s.reduced_dim = sz();
    else if (key == "hidden") s.hidden = to_sizes(v, where);
    else if (key == "outputs") s.num_classes = sz();
    else if (key == "corruption") s.corruption = dbl();
    else if (key == "pretrain_lr") s.pretrain_lr = dbl();
    else if (key == "pretrain_epochs") s.pretrain_epochs = sz();
    else if (key == "pretrain_batch") s.pretrain_batch = sz();
    else if (key == "finetune_lr") s.finetune_lr = dbl();
    else if (key == "finetune_epochs") s.finetune_epochs = sz();
    else if (key == "finetune_batch") s.finetune_batch = sz();
  } else if (sec == "grammar") {
    auto& g = c.grammar;
    if (key == "epsilon_prior") g.epsilon_prior = dbl();
    else if (key == "prior_weight") g.prior_weight = dbl();
    else if (key == "decay") g.decay = dbl();
    else if (key == "prior_blend") g.prior_blend = dbl();
    else if (key == "grammar_weight") g.grammar_weight = dbl();
    else if (key == "iterations") g.iterations = sz();
    else if (key == "window") g.window = sz();
  }
}

}  // namespace detail

/// Parses an INI config over the built-in defaults. Unknown sections or keys
/// are usage errors. Relative file paths resolve against `base_dir`.
inline PipelineConfig parse_config(std::istream& in, const std::string& name = "config",
                                   const std::filesystem::path& base_dir = {}) {
  detail::Ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw UsageError(name + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  PipelineConfig cfg;
  std::set<std::pair<std::string, std::string>> schema;
  for (const auto& [s, k, v] : detail::config_entries(cfg)) schema.emplace(s, k);
  for (const auto& [sec, body] : tree) {
    if (body.empty() && !body.data().empty()) throw UsageError(name + ": key '" + sec + "' outside any section");
    for (const auto& [key, val] : body) {
      if (!schema.contains({sec, key})) throw UsageError(name + ": unknown setting [" + sec + "] " + key);
      detail::assign(cfg, sec, key, val.data());
    }
  }
  if (!cfg.montage_path.empty() && std::filesystem::path(cfg.montage_path).is_relative() && !base_dir.empty())
    cfg.montage_path = (base_dir / cfg.montage_path).lexically_normal().string();
  return cfg;
}

inline PipelineConfig read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path + "'");
  return parse_config(in, path, std::filesystem::path(path).parent_path());
}

/// Canonical INI text: every setting, fixed order, round-trip precision.
/// Used for the bundle manifest and its hash.
inline std::string canonical_text(const PipelineConfig& c) {
  std::ostringstream os;
  std::string current;
  for (const auto& [s, k, v] : detail::config_entries(c)) {
    if (s != current) {
      os << (current.empty() ? "" : "\n") << '[' << s << "]\n";
      current = s;
    }
    os << k << " = " << v << '\n';
  }
  return os.str();
}

}  // namespace seqdet

#endif  // SEQDET_CONFIG_HPP
