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

#ifndef SEQDET_PIPELINE_HPP
#define SEQDET_PIPELINE_HPP

#include <charconv>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "seqdet/annotations.hpp"
#include "seqdet/config.hpp"
#include "seqdet/container.hpp"
#include "seqdet/eval.hpp"
#include "seqdet/features.hpp"
#include "seqdet/grammar.hpp"
#include "seqdet/hmm.hpp"
#include "seqdet/pass2.hpp"
#include "seqdet/signal_io.hpp"

namespace seqdet {

struct LabeledRecording {
  Recording recording;
  AnnotationSet annotations;
};

/// One `recording,annotations` pair from a training list file.
struct TrainingEntry {
  std::string recording_path;
  std::string annotations_path;
};

/// Reads a training list: one `recording,annotations` pair per line, `#`
/// comments, paths relative to the list file.
inline std::vector<TrainingEntry> read_training_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open training list '" + path + "'");
  const auto base = std::filesystem::path(path).parent_path();
  auto resolve = [&base](const std::string& p) {
    std::filesystem::path q(p);
    return (q.is_relative() ? base / q : q).lexically_normal().string();
  };
  std::vector<TrainingEntry> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty() || line.front() == '#') continue;
    const auto f = detail::split(line, ',');
    if (f.size() != 2 || f[0].empty() || f[1].empty())
      throw DataError(path + ":" + std::to_string(line_no) + ": expected 'recording,annotations'");
    out.push_back({resolve(f[0]), resolve(f[1])});
  }
  if (out.empty()) throw DataError("training list '" + path + "' is empty");
  return out;
}

struct Manifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> data_checksums;  // (recording id, fnv1a64)

  bool operator==(const Manifest&) const = default;
};

struct Bundle {
  PipelineConfig config;
  std::string montage_text;  // empty: no montage applied
  HmmSet hmms;
  ClassVector priors = uniform_priors();
  Pass2Models pass2;
  BigramTable bigram;
  Manifest manifest;
};

namespace detail {

/// Re-throws a library error with the stage name prepended, keeping its type.
template <typename F>
auto run_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const UsageError& e) {
    throw UsageError(stage + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(stage + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(stage + ": " + e.what());
  }
}

inline std::string double_text(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string recording_checksum(const Recording& rec) {
  ByteWriter w;
  w.put_f64(rec.sample_rate_hz());
  for (const auto& ch : rec.channels()) {
    w.put_string(ch.label);
    w.put_f64s(ch.samples);
  }
  return hex64(fnv1a64(w.take()));
}

inline std::string annotations_checksum(const AnnotationSet& a) {
  std::ostringstream os;
  write_annotations(a, os);
  return hex64(fnv1a64(os.str()));
}

inline std::string manifest_text(const Manifest& m) {
  std::ostringstream os;
  os << "format = seqdet-bundle\n";
  os << "seed = " << m.seed << '\n';
  os << "config_hash = " << m.config_hash << '\n';
  for (const auto& [id, sum] : m.data_checksums) os << "data = " << id << ' ' << sum << '\n';
  return os.str();
}

inline Manifest parse_manifest(const std::string& text, const std::string& context) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  bool format = false;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw DataError(context + ": malformed manifest line '" + line + "'");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 3);
    if (key == "format") {
      if (value != "seqdet-bundle") throw DataError(context + ": not a seqdet bundle manifest");
      format = true;
    } else if (key == "seed") {
      m.seed = std::stoull(value);
    } else if (key == "config_hash") {
      m.config_hash = value;
    } else if (key == "data") {
      const auto sp = value.rfind(' ');
      if (sp == std::string::npos) throw DataError(context + ": malformed data checksum");
      m.data_checksums.emplace_back(value.substr(0, sp), value.substr(sp + 1));
    } else {
      throw DataError(context + ": unknown manifest key '" + key + "'");
    }
  }
  if (!format) throw DataError(context + ": manifest lacks a format line");
  return m;
}

}  // namespace detail

/// Applies the optional montage, then resamples to the feature rate.
inline Recording prepare_signal(const Recording& raw, const PipelineConfig& cfg, const std::string& montage_text) {
  Recording rec = raw;
  if (!montage_text.empty()) {
    std::istringstream in(montage_text);
    rec = apply_montage(rec, parse_montage(in));
  }
  return resample(rec, cfg.features.sample_rate_hz);
}

/// Features plus reference labels of one training recording.
struct PreparedFile {
  std::string id;
  FeatureGrid features;
  std::vector<std::vector<EventLabel>> cells;  // [epoch][channel]
  std::vector<EventLabel> epochs;
};

inline PreparedFile prepare_file(const LabeledRecording& item, const PipelineConfig& cfg,
                                 const std::string& montage_text) {
  PreparedFile f;
  f.id = item.recording.id();
  const Recording rec = prepare_signal(item.recording, cfg, montage_text);
  validate(item.annotations, rec.duration_s());
  f.features = extract_features(rec, cfg.features);
  f.cells = cell_labels(item.annotations, rec.num_channels(), f.features.num_epochs(),
                        cfg.features.frame_s * static_cast<double>(cfg.features.frames_per_epoch));
  f.epochs = epoch_labels(f.cells);
  return f;
}

/// Runs all three training stages. `log` receives one line per stage.
inline Bundle train_bundle(const std::vector<LabeledRecording>& data, const PipelineConfig& config,
                           std::ostream* log = nullptr) {
  config.validate();
  if (data.empty()) throw DataError("no training recordings");
  auto note = [log](const std::string& s) {
    if (log) *log << s << '\n';
  };
  Bundle b;
  b.config = config;
  const std::uint64_t seed = *config.seed;
  b.config.hmm.seed = seed;
  if (!config.montage_path.empty()) {
    std::ifstream in(config.montage_path);
    b.montage_text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    std::istringstream check(b.montage_text);
    detail::run_stage("montage", [&] { return parse_montage(check); });
  }

  b.manifest.seed = seed;
  b.manifest.config_hash = hex64(fnv1a64(canonical_text(b.config)));
  std::vector<PreparedFile> files;
  for (const auto& item : data) {
    b.manifest.data_checksums.emplace_back(
        item.recording.id(), hex64(fnv1a64(detail::recording_checksum(item.recording) +
                                           detail::annotations_checksum(item.annotations))));
    files.push_back(detail::run_stage("features (" + item.recording.id() + ")",
                                      [&] { return prepare_file(item, config, b.montage_text); }));
  }

  note("pass 1: training HMMs");
  EpochCorpus corpus;
  std::array<double, kNumClasses> counts{};
  for (const auto& f : files)
    for (std::size_t e = 0; e < f.features.num_epochs(); ++e)
      for (std::size_t c = 0; c < f.features.num_channels(); ++c) {
        const auto k = index_of(f.cells[e][c]);
        corpus[k].emplace_back(f.features.epoch(c, e), kFeatureDim);
        counts[k] += 1.0;
      }
  b.hmms = detail::run_stage("pass 1 training", [&] { return train(corpus, b.config.hmm); });
  if (config.priors == PriorSource::training) {
    double total = 0.0;
    for (double v : counts) total += v;
    for (std::size_t k = 0; k < kNumClasses; ++k) b.priors[k] = counts[k] / total;
  }

  note("pass 1: decoding training data");
  std::vector<Pass2TrainingFile> p2;
  for (const auto& f : files) p2.push_back({decode_pass1(f.features, b.hmms, b.priors), f.epochs});

  note("pass 2: fitting PCA and SdA networks");
  b.pass2 = detail::run_stage("pass 2 training", [&] { return train_pass2(p2, config.pass2, seed); });

  note("pass 3: bigram table");
  if (config.bigram == BigramSource::clinical) {
    b.bigram = default_bigram();
  } else {
    std::vector<std::vector<EventLabel>> seqs;
    for (const auto& f : files) seqs.push_back(f.epochs);
    b.bigram = detail::run_stage("pass 3 bigram", [&] { return estimate_bigram(seqs); });
  }
  return b;
}

// ---------------------------------------------------------------------------
// Bundle persistence

inline std::string encode_bundle(const Bundle& b) {
  std::vector<Section> s;
  s.push_back({"manifest", detail::manifest_text(b.manifest)});
  s.push_back({"config", canonical_text(b.config)});
  s.push_back({"montage", b.montage_text});
  for (EventLabel l : kAllLabels) {
    ByteWriter w;
    serialize(b.hmms[index_of(l)], w);
    s.push_back({"hmm/" + std::string(to_string(l)), w.take()});
  }
  {
    ByteWriter w;
    for (double p : b.priors) w.put_f64(p);
    s.push_back({"priors", w.take()});
  }
  auto put = [&s](const std::string& name, const auto& model) {
    ByteWriter w;
    serialize(model, w);
    s.push_back({name, w.take()});
  };
  put("pca/detector", b.pass2.detector_pca);
  put("pca/sixway", b.pass2.sixway_pca);
  put("sda/spsw", b.pass2.spsw);
  put("sda/eyem", b.pass2.eyem);
  put("sda/sixway", b.pass2.sixway);
  std::ostringstream bigram;
  write_bigram(b.bigram, bigram);
  s.push_back({"bigram", bigram.str()});
  return encode_container(s);
}

inline Bundle decode_bundle(const std::string& bytes, const std::string& context = "bundle") {
  const auto sections = decode_container(bytes, context);
  auto section = [&](const std::string& name) -> const std::string& {
    return find_section(sections, name, context).payload;
  };
  Bundle b;
  b.manifest = detail::parse_manifest(section("manifest"), context);
  std::istringstream cfg(section("config"));
  b.config = parse_config(cfg, context + " config");
  if (hex64(fnv1a64(canonical_text(b.config))) != b.manifest.config_hash)
    throw DataError(context + ": config does not match the manifest hash");
  b.montage_text = section("montage");
  for (EventLabel l : kAllLabels) {
    ByteReader r(section("hmm/" + std::string(to_string(l))), context + " hmm/" + std::string(to_string(l)));
    b.hmms[index_of(l)] = deserialize_hmm(r);
    r.expect_done();
  }
  {
    ByteReader r(section("priors"), context + " priors");
    for (double& p : b.priors) p = r.get_f64();
    r.expect_done();
  }
  auto get = [&](const std::string& name, auto fn) {
    ByteReader r(section(name), context + " " + name);
    auto v = fn(r);
    r.expect_done();
    return v;
  };
  b.pass2.detector_pca = get("pca/detector", [](ByteReader& r) { return deserialize_pca(r); });
  b.pass2.sixway_pca = get("pca/sixway", [](ByteReader& r) { return deserialize_pca(r); });
  b.pass2.spsw = get("sda/spsw", [](ByteReader& r) { return deserialize_sda(r); });
  b.pass2.eyem = get("sda/eyem", [](ByteReader& r) { return deserialize_sda(r); });
  b.pass2.sixway = get("sda/sixway", [](ByteReader& r) { return deserialize_sda(r); });
  std::istringstream bigram(section("bigram"));
  b.bigram = read_bigram(bigram, context + " bigram");
  return b;
}

inline void save_bundle(const Bundle& b, const std::string& path) { write_file_bytes(path, encode_bundle(b)); }

inline Bundle load_bundle(const std::string& path) { return decode_bundle(read_file_bytes(path), path); }

// ---------------------------------------------------------------------------
// Decoding

struct DecodeResult {
  std::size_t num_channels = 0;
  PosteriorGrid pass1;
  std::optional<Pass2Outputs> pass2;
  std::optional<Pass3Result> pass3;
  AnnotationSet hypothesis;
  /// Final per-epoch labels for stop_after >= 2; empty otherwise.
  std::vector<EventLabel> epoch_labels;
};

inline DecodeResult decode(const Bundle& b, const Recording& raw, int stop_after = 3) {
  if (stop_after < 1 || stop_after > 3) throw UsageError("--stop-after must be 1, 2 or 3");
  const Recording rec = detail::run_stage("preprocessing", [&] { return prepare_signal(raw, b.config, b.montage_text); });
  const FeatureGrid feats = detail::run_stage("features", [&] { return extract_features(rec, b.config.features); });
  DecodeResult out;
  out.num_channels = rec.num_channels();
  out.pass1 = decode_pass1(feats, b.hmms, b.priors);
  const double epoch_s = b.config.features.frame_s * static_cast<double>(b.config.features.frames_per_epoch);
  if (stop_after == 1) {
    for (std::size_t c = 0; c < out.pass1.num_channels(); ++c) {
      std::vector<EventLabel> labels;
      for (std::size_t e = 0; e < out.pass1.num_epochs(); ++e) labels.push_back(out.pass1.label(e, c));
      append_runs(out.hypothesis, labels, static_cast<int>(c), epoch_s);
    }
    return out;
  }
  out.pass2 = detail::run_stage("pass 2", [&] { return run_pass2(out.pass1, b.pass2); });
  if (stop_after == 2) {
    out.epoch_labels = argmax_labels(out.pass2->enhanced);
  } else {
    out.pass3 = decode_pass3(out.pass2->enhanced, b.bigram, b.config.grammar);
    out.epoch_labels = out.pass3->labels;
  }
  append_runs(out.hypothesis, out.epoch_labels, std::nullopt, epoch_s);
  return out;
}

/// CSV `epoch,channel,SPSW,...,BCKG` of pass-1 posteriors.
inline void write_channel_posteriors(const PosteriorGrid& g, std::ostream& out) {
  out << "epoch,channel";
  for (EventLabel l : kAllLabels) out << ',' << to_string(l);
  out << '\n';
  for (std::size_t e = 0; e < g.num_epochs(); ++e)
    for (std::size_t c = 0; c < g.num_channels(); ++c) {
      out << e << ',' << c;
      for (double p : g.at(e, c)) out << ',' << detail::double_text(p);
      out << '\n';
    }
}

/// CSV `epoch,SPSW,...,BCKG` of per-epoch posteriors.
inline void write_epoch_posteriors(const std::vector<ClassVector>& seq, std::ostream& out) {
  out << "epoch";
  for (EventLabel l : kAllLabels) out << ',' << to_string(l);
  out << '\n';
  for (std::size_t e = 0; e < seq.size(); ++e) {
    out << e;
    for (double p : seq[e]) out << ',' << detail::double_text(p);
    out << '\n';
  }
}

/// Reads either posterior CSV layout back into per-row class vectors.
inline std::vector<ClassVector> read_epoch_posteriors(std::istream& in, const std::string& name = "posteriors") {
  std::string line;
  std::string header = "epoch";
  for (EventLabel l : kAllLabels) header += "," + std::string(to_string(l));
  if (!std::getline(in, line) || detail::strip_cr(line) != header)
    throw DataError(name + ": header must be '" + header + "'");
  std::vector<ClassVector> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    const std::string ctx = name + ":" + std::to_string(line_no);
    const auto f = detail::split(line, ',');
    if (f.size() != kNumClasses + 1) throw DataError(ctx + ": expected " + std::to_string(kNumClasses + 1) + " fields");
    if (detail::parse_double_field(f[0], ctx) != static_cast<double>(out.size()))
      throw DataError(ctx + ": epochs must be consecutive from 0");
    ClassVector p;
    for (std::size_t k = 0; k < kNumClasses; ++k) p[k] = detail::parse_double_field(f[k + 1], ctx);
    out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scoring

inline std::size_t epochs_covered(const AnnotationSet& a, double epoch_s = 1.0) {
  double end = 0.0;
  for (const auto& e : a.events) end = std::max(end, e.stop_s);
  return static_cast<std::size_t>(std::floor(end / epoch_s + 1e-9));
}

/// Flattened reference and hypothesis items for the given basis.
inline ConfusionMatrix score_annotations(const AnnotationSet& ref, const AnnotationSet& hyp, std::size_t num_channels,
                                         ScoringMode mode, ScoringBasis basis) {
  const std::size_t er = epochs_covered(ref), eh = epochs_covered(hyp);
  if (er != eh)
    throw DataError("reference covers " + std::to_string(er) + " epochs but hypothesis covers " + std::to_string(eh));
  const auto rc = cell_labels(ref, num_channels, er), hc = cell_labels(hyp, num_channels, eh);
  if (basis == ScoringBasis::per_epoch) return confusion(epoch_labels(rc), epoch_labels(hc), mode, basis);
  std::vector<EventLabel> r, h;
  for (std::size_t e = 0; e < er; ++e)
    for (std::size_t c = 0; c < num_channels; ++c) {
      r.push_back(rc[e][c]);
      h.push_back(hc[e][c]);
    }
  return confusion(r, h, mode, basis);
}

/// Two-way detection score of an epoch posterior: total epileptiform mass.
inline double target_score(const ClassVector& p) {
  double s = 0.0;
  for (EventLabel l : kAllLabels)
    if (is_epileptiform(l)) s += p[index_of(l)];
  return s;
}

inline DetCurve det_from_posteriors(const std::vector<ClassVector>& posteriors, const std::vector<EventLabel>& ref,
                                    const std::vector<double>& offsets = default_offsets()) {
  if (posteriors.size() != ref.size())
    throw DataError("posteriors cover " + std::to_string(posteriors.size()) + " epochs but reference covers " +
                    std::to_string(ref.size()));
  std::vector<double> scores;
  std::vector<bool> targets;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    scores.push_back(target_score(posteriors[i]));
    targets.push_back(is_epileptiform(ref[i]));
  }
  return det_curve(scores, targets, offsets);
}

}  // namespace seqdet

#endif  // SEQDET_PIPELINE_HPP
