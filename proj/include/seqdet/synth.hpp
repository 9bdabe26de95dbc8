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

#ifndef SEQDET_SYNTH_HPP
#define SEQDET_SYNTH_HPP

#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "seqdet/annotations.hpp"
#include "seqdet/features.hpp"
#include "seqdet/grammar.hpp"
#include "seqdet/labels.hpp"
#include "seqdet/rng.hpp"
#include "seqdet/signal_io.hpp"

namespace seqdet {

// Synthetic classes are much easier than clinical EEG. They exist to verify
// the pipeline end to end, not to model physiology.

struct ScriptEntry {
  EventLabel label = EventLabel::BCKG;
  double duration_s = 1.0;
  std::optional<std::vector<int>> channels;  // nullopt: class default

  bool operator==(const ScriptEntry&) const = default;
};

using SynthScript = std::vector<ScriptEntry>;

struct SynthOptions {
  std::size_t num_channels = 22;
  double sample_rate_hz = 250.0;
  std::size_t max_attempts = 16;
};

/// Index names of the conventional 22-channel TCP montage, in order.
inline const std::vector<std::string>& tcp_channel_labels() {
  static const std::vector<std::string> labels = {
      "FP1-F7", "F7-T3", "T3-T5", "T5-O1", "FP2-F8", "F8-T4", "T4-T6", "T6-O2", "A1-T3", "T3-C3", "C3-CZ",
      "CZ-C4",  "C4-T4", "T4-A2", "FP1-F3", "F3-C3", "C3-P3", "P3-O1", "FP2-F4", "F4-C4", "C4-P4", "P4-O2"};
  return labels;
}

/// Default channel subsets: SPSW focal, PLED left-lateralized, EYEM frontal,
/// the rest generalized.
inline std::vector<int> default_channels(EventLabel label, std::size_t num_channels) {
  auto clip = [num_channels](std::vector<int> v) {
    std::vector<int> out;
    for (int c : v)
      if (static_cast<std::size_t>(c) < num_channels) out.push_back(c);
    if (out.empty()) out.push_back(0);
    return out;
  };
  switch (label) {
    case EventLabel::SPSW: return clip({1, 2, 9, 15});
    case EventLabel::PLED: return clip({0, 1, 2, 3, 14, 15, 16, 17});
    case EventLabel::EYEM: return clip({0, 4, 14, 18});
    default: {
      std::vector<int> all(num_channels);
      for (std::size_t i = 0; i < num_channels; ++i) all[i] = static_cast<int>(i);
      return all;
    }
  }
}

inline SynthScript parse_script(std::istream& in, const std::string& name = "script") {
  std::string line;
  if (!std::getline(in, line) || detail::strip_cr(line) != "label,duration_s,channels")
    throw DataError(name + ": header must be 'label,duration_s,channels'");
  SynthScript script;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    const std::string ctx = name + ":" + std::to_string(line_no);
    auto f = detail::split(line, ',');
    if (f.size() != 3) throw DataError(ctx + ": expected 3 fields");
    ScriptEntry e;
    e.label = parse_label(f[0]);
    e.duration_s = detail::parse_double_field(f[1], ctx);
    if (!f[2].empty() && f[2] != "*") {
      std::vector<int> chans;
      for (const auto& c : detail::split(f[2], ';')) chans.push_back(static_cast<int>(detail::parse_double_field(c, ctx)));
      e.channels = chans;
    }
    script.push_back(e);
  }
  return script;
}

inline SynthScript read_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_script(in, path);
}

inline void write_script(const SynthScript& script, std::ostream& out) {
  out << "label,duration_s,channels\n";
  for (const auto& e : script) {
    out << to_string(e.label) << ',' << e.duration_s << ',';
    if (e.channels) {
      for (std::size_t i = 0; i < e.channels->size(); ++i) out << (i ? ";" : "") << (*e.channels)[i];
    } else {
      out << '*';
    }
    out << '\n';
  }
}

/// A random script of exactly `total_s` seconds whose segment transitions
/// are all allowed by the clinical bigram table and which contains every
/// class at least once.
inline SynthScript random_script(double total_s, std::uint64_t seed) {
  const BigramTable table = clinical_bigram_raw();
  // Duration ranges (s) per class, canonical order.
  constexpr std::array<std::array<int, 2>, kNumClasses> durations = {
      {{3, 6}, {15, 30}, {10, 25}, {3, 8}, {5, 12}, {10, 30}}};
  const auto total = static_cast<int>(std::lround(total_s));
  if (total < 6) throw UsageError("random script needs at least 6 seconds");
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    Rng rng(seed + attempt * 0x9e3779b97f4a7c15ull);
    SynthScript script;
    std::array<bool, kNumClasses> seen{};
    EventLabel cur = EventLabel::BCKG;
    int used = 0;
    while (used < total) {
      const auto& range = durations[index_of(cur)];
      int d = range[0] + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(range[1] - range[0] + 1)));
      d = std::min(d, total - used);
      script.push_back({cur, static_cast<double>(d), std::nullopt});
      seen[index_of(cur)] = true;
      used += d;
      // Prefer classes not yet seen among the allowed successors.
      std::vector<EventLabel> next, unseen;
      for (EventLabel l : kAllLabels)
        if (l != cur && table(cur, l) > 0.0) {
          next.push_back(l);
          if (!seen[index_of(l)]) unseen.push_back(l);
        }
      const auto& pool = !unseen.empty() && bernoulli(rng, 0.5) ? unseen : next;
      cur = pool[uniform_index(rng, pool.size())];
    }
    bool all = true;
    for (bool s : seen) all = all && s;
    if (all) return script;
  }
  throw DataError("could not draw a script covering all classes in " + std::to_string(total) + " s");
}

struct SynthResult {
  Recording recording;
  AnnotationSet annotations;
};

namespace detail {

inline double gaussian_bump(double t, double sigma) { return std::exp(-0.5 * t * t / (sigma * sigma)); }

/// Adds `shape(t - t0)` over +-span seconds around t0.
template <typename Shape>
void add_transient(std::vector<double>& x, double rate, std::size_t offset, std::size_t length, double t0,
                   double span, double amplitude, Shape shape) {
  const auto lo = static_cast<long>(std::floor((t0 - span) * rate));
  const auto hi = static_cast<long>(std::ceil((t0 + span) * rate));
  for (long i = std::max(lo, 0L); i <= hi && i < static_cast<long>(length); ++i) {
    const double t = static_cast<double>(i) / rate - t0;
    x[offset + static_cast<std::size_t>(i)] += amplitude * shape(t);
  }
}

inline void add_background(std::vector<double>& x, double rate, Rng& rng) {
  // White noise through a one-pole low-pass (~20 Hz) minus a very slow
  // low-pass (~0.5 Hz), plus a weak alpha rhythm.
  const double a_fast = std::exp(-2.0 * std::numbers::pi * 20.0 / rate);
  const double a_slow = std::exp(-2.0 * std::numbers::pi * 0.5 / rate);
  const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double alpha_hz = uniform(rng, 9.0, 11.0);
  double fast = 0.0, slow = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    fast = a_fast * fast + (1.0 - a_fast) * 25.0 * standard_normal(rng);
    slow = a_slow * slow + (1.0 - a_slow) * fast;
    x[i] += fast - slow + 3.0 * std::sin(2.0 * std::numbers::pi * alpha_hz * static_cast<double>(i) / rate + phase);
  }
}

inline void add_event(std::vector<double>& x, EventLabel label, double rate, std::size_t offset, std::size_t length,
                      double phase, Rng& rng) {
  const double dur = static_cast<double>(length) / rate;
  switch (label) {
    case EventLabel::SPSW: {
      // Very sharp biphasic spike followed by a slow wave, one or two per second.
      auto shape = [](double t) {
        return -t / 0.008 * gaussian_bump(t, 0.008) * 1.6 - 0.4 * gaussian_bump(t - 0.08, 0.04);
      };
      for (double s = 0.0; s + 1.0 <= dur + 1e-9; s += 1.0) {
        const int count = 1 + static_cast<int>(bernoulli(rng, 0.4));
        for (int k = 0; k < count; ++k)
          add_transient(x, rate, offset, length, s + uniform(rng, 0.15, 0.85), 0.25, uniform(rng, 110.0, 150.0), shape);
      }
      break;
    }
    case EventLabel::PLED: {
      // Sharp waves at 1 Hz, short duty cycle.
      auto shape = [](double t) { return gaussian_bump(t, 0.03) - 0.35 * gaussian_bump(t - 0.1, 0.05); };
      for (double t0 = phase; t0 < dur; t0 += 1.0) add_transient(x, rate, offset, length, t0, 0.3, 120.0, shape);
      break;
    }
    case EventLabel::GPED: {
      // Broad triphasic complexes at 2.5 Hz on every channel, long duty cycle.
      auto shape = [](double t) {
        return -0.4 * gaussian_bump(t + 0.08, 0.04) + gaussian_bump(t, 0.05) - 0.5 * gaussian_bump(t - 0.12, 0.06);
      };
      for (double t0 = phase * 0.4; t0 < dur; t0 += 0.4) add_transient(x, rate, offset, length, t0, 0.4, 70.0, shape);
      break;
    }
    case EventLabel::EYEM: {
      // Slow (< 1 Hz) large frontal deflections of alternating sign.
      auto shape = [](double t) { return gaussian_bump(t, 0.3); };
      double sign = 1.0;
      for (double t0 = phase * 1.25 - 0.6; t0 < dur + 0.6; t0 += 1.25, sign = -sign)
        add_transient(x, rate, offset, length, t0, 1.2, sign * 180.0, shape);
      break;
    }
    case EventLabel::ARTF: {
      // Broadband high-amplitude bursts with a slowly varying envelope.
      double env = 0.0;
      const double a = std::exp(-2.0 * std::numbers::pi * 2.0 / rate);
      for (std::size_t i = 0; i < length; ++i) {
        env = a * env + (1.0 - a) * uniform(rng, 0.5, 1.0);
        const double ramp = std::min(1.0, static_cast<double>(i) / (0.05 * rate));
        x[offset + i] += ramp * (0.6 + env) * 45.0 * standard_normal(rng);
      }
      break;
    }
    case EventLabel::BCKG: break;
  }
}

/// Mean log filterbank profile per epoch of the given channel.
inline std::vector<std::vector<double>> epoch_profiles(const std::vector<double>& x, double rate, std::size_t first_epoch,
                                                       std::size_t epochs) {
  FrameSpec spec;
  spec.sample_rate_hz = rate;
  const Filterbank fb(spec);
  const auto per_epoch = static_cast<std::size_t>(std::lround(rate));
  std::vector<std::vector<double>> out;
  for (std::size_t e = first_epoch; e < first_epoch + epochs; ++e) {
    std::span<const double> seg(x.data() + e * per_epoch, per_epoch);
    const auto frames = frame_signal(seg, spec);
    std::vector<double> mean(spec.num_filters, 0.0);
    for (const auto& f : frames) {
      const auto en = fb.apply(power_spectrum(f, spec.fft_size));
      for (std::size_t j = 0; j < en.size(); ++j) mean[j] += std::log(en[j]) / static_cast<double>(frames.size());
    }
    out.push_back(std::move(mean));
  }
  return out;
}

/// True when every pair of present classes differs by >= 3 standard errors
/// in at least one filterbank band.
inline bool classes_separated(const std::array<std::vector<std::vector<double>>, kNumClasses>& profiles) {
  auto stats = [](const std::vector<std::vector<double>>& p, std::size_t band) {
    double m = 0.0, v = 0.0;
    for (const auto& r : p) m += r[band];
    m /= static_cast<double>(p.size());
    for (const auto& r : p) v += (r[band] - m) * (r[band] - m);
    v /= std::max<double>(1.0, static_cast<double>(p.size()) - 1.0);
    return std::pair{m, v / static_cast<double>(p.size())};
  };
  for (std::size_t a = 0; a < kNumClasses; ++a) {
    for (std::size_t b = a + 1; b < kNumClasses; ++b) {
      if (profiles[a].empty() || profiles[b].empty()) continue;
      bool separated = false;
      for (std::size_t band = 0; band < profiles[a].front().size() && !separated; ++band) {
        const auto [ma, va] = stats(profiles[a], band);
        const auto [mb, vb] = stats(profiles[b], band);
        separated = std::abs(ma - mb) >= 3.0 * std::sqrt(va + vb);
      }
      if (!separated) return false;
    }
  }
  return true;
}

inline SynthResult generate_once(const SynthScript& script, std::uint64_t seed, const SynthOptions& opt,
                                 bool* separated) {
  Rng rng(seed);
  std::size_t total = 0;
  for (const auto& e : script) total += static_cast<std::size_t>(std::lround(e.duration_s * opt.sample_rate_hz));
  std::vector<std::vector<double>> x(opt.num_channels, std::vector<double>(total, 0.0));
  for (auto& ch : x) add_background(ch, opt.sample_rate_hz, rng);

  AnnotationSet ann;
  std::array<std::vector<std::vector<double>>, kNumClasses> profiles;
  std::size_t offset = 0;
  for (const auto& e : script) {
    const auto len = static_cast<std::size_t>(std::lround(e.duration_s * opt.sample_rate_hz));
    const double t0 = static_cast<double>(offset) / opt.sample_rate_hz;
    const auto chans = e.channels ? *e.channels : default_channels(e.label, opt.num_channels);
    const double phase = uniform(rng, 0.1, 0.9);
    for (int c : chans) add_event(x[static_cast<std::size_t>(c)], e.label, opt.sample_rate_hz, offset, len, phase, rng);
    if (e.label == EventLabel::BCKG) {
      ann.events.push_back({std::nullopt, t0, t0 + e.duration_s, e.label});
    } else {
      for (int c : chans) ann.events.push_back({c, t0, t0 + e.duration_s, e.label});
    }
    const auto epochs = len / static_cast<std::size_t>(std::lround(opt.sample_rate_hz));
    auto p = epoch_profiles(x[static_cast<std::size_t>(chans.front())], opt.sample_rate_hz,
                            offset / static_cast<std::size_t>(std::lround(opt.sample_rate_hz)), epochs);
    profiles[index_of(e.label)].insert(profiles[index_of(e.label)].end(), p.begin(), p.end());
    offset += len;
  }
  *separated = classes_separated(profiles);

  std::vector<ChannelSignal> channels;
  const auto& labels = tcp_channel_labels();
  for (std::size_t c = 0; c < opt.num_channels; ++c)
    channels.push_back({c < labels.size() ? labels[c] : default_channel_label(c), std::move(x[c])});
  return {Recording("synth-" + std::to_string(seed), opt.sample_rate_hz, std::move(channels)), std::move(ann)};
}

}  // namespace detail

/// Deterministic recording and exact annotations for `script`. Retries with
/// the next seed when the class spectra are not separated enough.
inline SynthResult generate(const SynthScript& script, std::uint64_t seed, const SynthOptions& opt = {}) {
  if (script.empty()) throw UsageError("synthetic script is empty");
  for (const auto& e : script) {
    if (!(e.duration_s >= 1.0) || std::abs(e.duration_s - std::round(e.duration_s)) > 1e-9)
      throw DataError("script durations must be whole seconds >= 1");
    if (e.channels) {
      if (e.channels->empty()) throw DataError("script entry with an empty channel subset");
      for (int c : *e.channels)
        if (c < 0 || static_cast<std::size_t>(c) >= opt.num_channels)
          throw DataError("script references channel " + std::to_string(c) + " outside 0.." +
                          std::to_string(opt.num_channels - 1));
    }
  }
  for (std::size_t attempt = 0; attempt < opt.max_attempts; ++attempt) {
    bool separated = false;
    auto r = detail::generate_once(script, seed + attempt, opt, &separated);
    if (separated) return r;
  }
  throw DataError("synthetic classes not spectrally separated after " + std::to_string(opt.max_attempts) + " seeds");
}

}  // namespace seqdet

#endif  // SEQDET_SYNTH_HPP
