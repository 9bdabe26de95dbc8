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

#ifndef SEQDET_FEATURES_HPP
#define SEQDET_FEATURES_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <span>
#include <vector>

#include "seqdet/error.hpp"
#include "seqdet/signal_io.hpp"

namespace seqdet {

inline constexpr std::size_t kFeatureDim = 26;
inline constexpr double kEnergyFloor = 1e-10;

struct FrameSpec {
  double sample_rate_hz = 250.0;
  double frame_s = 0.1;
  double window_s = 0.2;
  std::size_t fft_size = 256;
  std::size_t num_filters = 18;
  std::size_t num_cepstra = 7;
  std::size_t diff_energy_window = 9;  // M
  std::size_t delta_width_first = 9;   // N1
  std::size_t delta_width_second = 3;  // N2
  std::size_t frames_per_epoch = 10;

  std::size_t window_samples() const { return static_cast<std::size_t>(std::lround(window_s * sample_rate_hz)); }
  std::size_t hop_samples() const { return static_cast<std::size_t>(std::lround(frame_s * sample_rate_hz)); }

  void validate() const {
    if (!(window_s >= frame_s) || !(frame_s > 0.0)) throw UsageError("frame spec: need window_s >= frame_s > 0");
    if (diff_energy_window % 2 == 0) throw UsageError("frame spec: differential energy window must be odd");
    if (delta_width_first < 1 || delta_width_second < 1) throw UsageError("frame spec: delta widths must be >= 1");
    if (fft_size < window_samples() || (fft_size & (fft_size - 1)) != 0)
      throw UsageError("frame spec: fft_size must be a power of two >= window length");
    if (num_cepstra != 7) throw UsageError("frame spec: the 26-dimensional layout requires 7 cepstra");
    if (num_filters <= num_cepstra) throw UsageError("frame spec: need more filters than cepstra");
    if (frames_per_epoch == 0) throw UsageError("frame spec: frames_per_epoch must be positive");
  }
};

/// In-place iterative radix-2 FFT. `data.size()` must be a power of two.
inline void fft(std::vector<std::complex<double>>& data) {
  const std::size_t n = data.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = data[i + k];
        const auto v = data[i + k + len / 2] * w;
        data[i + k] = u + v;
        data[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

/// |X(k)|^2 for k = 0..fft_size/2 of the zero-padded frame.
inline std::vector<double> power_spectrum(std::span<const double> frame, std::size_t fft_size) {
  std::vector<std::complex<double>> buf(fft_size);
  for (std::size_t i = 0; i < frame.size() && i < fft_size; ++i) buf[i] = frame[i];
  fft(buf);
  std::vector<double> out(fft_size / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::norm(buf[k]);
  return out;
}

inline std::vector<double> hamming_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
  return w;
}

/// Triangular filters linearly spaced from 0 Hz to Nyquist; each filter
/// spans two spacings so neighbours overlap by half.
class Filterbank {
 public:
  explicit Filterbank(const FrameSpec& spec)
      : num_bins_(spec.fft_size / 2 + 1), weights_(spec.num_filters, std::vector<double>(num_bins_, 0.0)) {
    const double nyquist = spec.sample_rate_hz / 2.0;
    const double spacing = nyquist / static_cast<double>(spec.num_filters + 1);
    const double bin_hz = spec.sample_rate_hz / static_cast<double>(spec.fft_size);
    for (std::size_t j = 0; j < spec.num_filters; ++j) {
      const double lo = spacing * static_cast<double>(j);
      const double center = lo + spacing;
      const double hi = center + spacing;
      for (std::size_t k = 0; k < num_bins_; ++k) {
        const double f = bin_hz * static_cast<double>(k);
        double w = 0.0;
        if (f > lo && f <= center) w = (f - lo) / spacing;
        else if (f > center && f < hi) w = (hi - f) / spacing;
        weights_[j][k] = w;
      }
    }
  }

  std::size_t num_filters() const { return weights_.size(); }
  const std::vector<double>& weights(std::size_t j) const { return weights_[j]; }

  /// Filter outputs from a power spectrum, floored at kEnergyFloor.
  std::vector<double> apply(std::span<const double> power) const {
    std::vector<double> out(weights_.size());
    for (std::size_t j = 0; j < weights_.size(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < num_bins_; ++k) acc += weights_[j][k] * power[k];
      out[j] = std::max(acc, kEnergyFloor);
    }
    return out;
  }

 private:
  std::size_t num_bins_;
  std::vector<std::vector<double>> weights_;
};

inline std::size_t num_frames(std::size_t num_samples, const FrameSpec& spec) {
  const std::size_t win = spec.window_samples();
  if (num_samples < win) return 0;
  return (num_samples - win) / spec.hop_samples() + 1;
}

/// Hamming-windowed frames; the trailing partial frame is dropped.
inline std::vector<std::vector<double>> frame_signal(std::span<const double> samples, const FrameSpec& spec) {
  const std::size_t win = spec.window_samples();
  const std::size_t hop = spec.hop_samples();
  if (samples.size() < win)
    throw DataError("signal of " + std::to_string(samples.size()) + " samples is shorter than one " +
                    std::to_string(win) + "-sample analysis window");
  const auto window = hamming_window(win);
  const std::size_t count = num_frames(samples.size(), spec);
  std::vector<std::vector<double>> frames(count, std::vector<double>(win));
  for (std::size_t t = 0; t < count; ++t)
    for (std::size_t i = 0; i < win; ++i) frames[t][i] = samples[t * hop + i] * window[i];
  return frames;
}

inline std::vector<double> filterbank_energies(std::span<const double> frame, const FrameSpec& spec) {
  return Filterbank(spec).apply(power_spectrum(frame, spec.fft_size));
}

/// DCT-II of the log energies (orthonormal scaling); the 0th coefficient is
/// dropped and c_1..c_count returned.
inline std::vector<double> cepstra(std::span<const double> energies, std::size_t count = 7) {
  const std::size_t n = energies.size();
  const double scale = std::sqrt(2.0 / static_cast<double>(n));
  std::vector<double> out(count, 0.0);
  for (std::size_t k = 1; k <= count; ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      acc += std::log(std::max(energies[j], kEnergyFloor)) *
             std::cos(std::numbers::pi * static_cast<double>(k) * (static_cast<double>(j) + 0.5) / static_cast<double>(n));
    out[k - 1] = scale * acc;
  }
  return out;
}

/// E_f: log of the summed (floored) filterbank outputs.
inline double frequency_energy(std::span<const double> energies) {
  double sum = 0.0;
  for (double e : energies) sum += std::max(e, kEnergyFloor);
  return std::log(sum);
}

/// E_d(t): max - min of E_f over the window of `width` frames centred at t,
/// truncated at the sequence edges.
inline std::vector<double> differential_energy(std::span<const double> energy, std::size_t width = 9) {
  if (width % 2 == 0) throw UsageError("differential energy window must be odd");
  const auto half = static_cast<long>(width / 2);
  const auto n = static_cast<long>(energy.size());
  std::vector<double> out(energy.size());
  for (long t = 0; t < n; ++t) {
    const auto lo = energy.begin() + std::max(0L, t - half);
    const auto hi = energy.begin() + std::min(n, t + half + 1);
    const auto [mn, mx] = std::minmax_element(lo, hi);
    out[static_cast<std::size_t>(t)] = *mx - *mn;
  }
  return out;
}

/// Regression deltas d_t = sum n (c_{t+n} - c_{t-n}) / (2 sum n^2) with
/// edge-replicated padding.
inline std::vector<double> deltas(std::span<const double> coeffs, std::size_t width) {
  if (width < 1) throw UsageError("delta width must be >= 1");
  const auto n = static_cast<long>(coeffs.size());
  double denom = 0.0;
  for (std::size_t k = 1; k <= width; ++k) denom += static_cast<double>(k * k);
  denom *= 2.0;
  auto at = [&](long t) { return coeffs[static_cast<std::size_t>(std::clamp(t, 0L, n - 1))]; };
  std::vector<double> out(coeffs.size());
  for (long t = 0; t < n; ++t) {
    double acc = 0.0;
    for (long k = 1; k <= static_cast<long>(width); ++k) acc += static_cast<double>(k) * (at(t + k) - at(t - k));
    out[static_cast<std::size_t>(t)] = acc / denom;
  }
  return out;
}

/// Channels x frames x 26 features. Frame counts are a whole number of
/// epochs for every channel.
class FeatureGrid {
 public:
  FeatureGrid() = default;
  FeatureGrid(std::size_t channels, std::size_t frames, std::size_t frames_per_epoch)
      : channels_(channels), frames_(frames), frames_per_epoch_(frames_per_epoch),
        data_(channels * frames * kFeatureDim, 0.0) {}

  std::size_t num_channels() const { return channels_; }
  std::size_t num_frames() const { return frames_; }
  std::size_t frames_per_epoch() const { return frames_per_epoch_; }
  std::size_t num_epochs() const { return frames_per_epoch_ ? frames_ / frames_per_epoch_ : 0; }

  std::span<double> frame(std::size_t ch, std::size_t t) {
    return {data_.data() + (ch * frames_ + t) * kFeatureDim, kFeatureDim};
  }
  std::span<const double> frame(std::size_t ch, std::size_t t) const {
    return {data_.data() + (ch * frames_ + t) * kFeatureDim, kFeatureDim};
  }
  /// Contiguous frames_per_epoch x 26 block for one epoch of one channel.
  std::span<const double> epoch(std::size_t ch, std::size_t e) const {
    return {data_.data() + (ch * frames_ + e * frames_per_epoch_) * kFeatureDim, frames_per_epoch_ * kFeatureDim};
  }

 private:
  std::size_t channels_ = 0;
  std::size_t frames_ = 0;
  std::size_t frames_per_epoch_ = 0;
  std::vector<double> data_;
};

/// Computes 26-dimensional features for one channel:
/// [c1..c7, E_f, E_d, d(c1..c7, E_f, E_d), dd(c1..c7, E_f)].
class FeatureExtractor {
 public:
  explicit FeatureExtractor(FrameSpec spec) : spec_(spec), filterbank_((spec.validate(), spec)) {}

  const FrameSpec& spec() const { return spec_; }

  /// frames x 26, row-major.
  std::vector<double> channel_features(std::span<const double> samples) const {
    const auto frames = frame_signal(samples, spec_);
    const std::size_t count = frames.size();
    constexpr std::size_t kStatic = 9;
    std::vector<std::vector<double>> stat(kStatic, std::vector<double>(count));
    for (std::size_t t = 0; t < count; ++t) {
      const auto energies = filterbank_.apply(power_spectrum(frames[t], spec_.fft_size));
      const auto c = cepstra(energies, spec_.num_cepstra);
      for (std::size_t k = 0; k < 7; ++k) stat[k][t] = c[k];
      stat[7][t] = frequency_energy(energies);
    }
    stat[8] = differential_energy(stat[7], spec_.diff_energy_window);

    std::vector<std::vector<double>> d1(kStatic), d2(8);
    for (std::size_t k = 0; k < kStatic; ++k) d1[k] = deltas(stat[k], spec_.delta_width_first);
    for (std::size_t k = 0; k < 8; ++k) d2[k] = deltas(d1[k], spec_.delta_width_second);

    std::vector<double> out(count * kFeatureDim);
    for (std::size_t t = 0; t < count; ++t) {
      double* row = out.data() + t * kFeatureDim;
      for (std::size_t k = 0; k < kStatic; ++k) row[k] = stat[k][t];
      for (std::size_t k = 0; k < kStatic; ++k) row[kStatic + k] = d1[k][t];
      for (std::size_t k = 0; k < 8; ++k) row[2 * kStatic + k] = d2[k][t];
    }
    return out;
  }

  /// Grid with floor(duration) epochs; a short final epoch is completed by
  /// repeating the last frame, extra frames are dropped.
  FeatureGrid extract(const Recording& rec) const {
    if (std::abs(rec.sample_rate_hz() - spec_.sample_rate_hz) > 1e-9)
      throw DataError("feature extraction expects " + std::to_string(spec_.sample_rate_hz) + " Hz input, got " +
                      std::to_string(rec.sample_rate_hz()) + " Hz");
    const auto epochs = static_cast<std::size_t>(
        std::floor(rec.duration_s() / (spec_.frame_s * static_cast<double>(spec_.frames_per_epoch)) + 1e-9));
    if (epochs == 0) throw DataError("recording '" + rec.id() + "' is shorter than one epoch");
    const std::size_t frames = epochs * spec_.frames_per_epoch;
    FeatureGrid grid(rec.num_channels(), frames, spec_.frames_per_epoch);
    for (std::size_t ch = 0; ch < rec.num_channels(); ++ch) {
      const auto feats = channel_features(rec.channel(ch).samples);
      const std::size_t have = feats.size() / kFeatureDim;
      for (std::size_t t = 0; t < frames; ++t) {
        const std::size_t src = std::min(t, have - 1);
        std::copy_n(feats.begin() + static_cast<long>(src * kFeatureDim), kFeatureDim, grid.frame(ch, t).begin());
      }
    }
    return grid;
  }

 private:
  FrameSpec spec_;
  Filterbank filterbank_;
};

inline FeatureGrid extract_features(const Recording& rec, const FrameSpec& spec = {}) {
  return FeatureExtractor(spec).extract(rec);
}


/// Feature dump in raw_matrix layout: one row per (channel, feature) pair,
/// named "<channel>:f<k>", sampled at the frame rate.
inline Recording feature_dump(const FeatureGrid& grid, const Recording& source, const FrameSpec& spec) {
  std::vector<ChannelSignal> rows;
  for (std::size_t ch = 0; ch < grid.num_channels(); ++ch) {
    for (std::size_t k = 0; k < kFeatureDim; ++k) {
      ChannelSignal row{source.channel(ch).label + ":f" + std::to_string(k), std::vector<double>(grid.num_frames())};
      for (std::size_t t = 0; t < grid.num_frames(); ++t) row.samples[t] = grid.frame(ch, t)[k];
      rows.push_back(std::move(row));
    }
  }
  return Recording(source.id() + ".features", 1.0 / spec.frame_s, std::move(rows));
}

}  // namespace seqdet

#endif  // SEQDET_FEATURES_HPP
