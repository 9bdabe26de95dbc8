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

#ifndef SEQDET_SIGNAL_IO_HPP
#define SEQDET_SIGNAL_IO_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "seqdet/error.hpp"

namespace seqdet {

struct ChannelSignal {
  std::string label;
  std::vector<double> samples;  // microvolts
};

/// A multichannel recording with one uniform sample rate. Validated on
/// construction and immutable afterwards.
class Recording {
 public:
  Recording(std::string id, double sample_rate_hz, std::vector<ChannelSignal> channels)
      : id_(std::move(id)), sample_rate_hz_(sample_rate_hz), channels_(std::move(channels)) {
    if (!(sample_rate_hz_ > 0.0) || !std::isfinite(sample_rate_hz_))
      throw DataError("recording '" + id_ + "': sample rate must be positive");
    if (channels_.empty()) throw DataError("recording '" + id_ + "' has no channels");
    const std::size_t n = channels_.front().samples.size();
    for (const auto& ch : channels_) {
      if (ch.samples.size() != n)
        throw DataError("recording '" + id_ + "': channel '" + ch.label + "' has " +
                        std::to_string(ch.samples.size()) + " samples, expected " +
                        std::to_string(n));
      for (double v : ch.samples)
        if (!std::isfinite(v))
          throw DataError("recording '" + id_ + "': non-finite sample in channel '" + ch.label + "'");
    }
  }

  const std::string& id() const { return id_; }
  double sample_rate_hz() const { return sample_rate_hz_; }
  std::size_t num_channels() const { return channels_.size(); }
  std::size_t num_samples() const { return channels_.front().samples.size(); }
  double duration_s() const { return static_cast<double>(num_samples()) / sample_rate_hz_; }
  const std::vector<ChannelSignal>& channels() const { return channels_; }
  const ChannelSignal& channel(std::size_t i) const { return channels_.at(i); }

  std::optional<std::size_t> find_channel(const std::string& label) const {
    for (std::size_t i = 0; i < channels_.size(); ++i)
      if (channels_[i].label == label) return i;
    return std::nullopt;
  }

 private:
  std::string id_;
  double sample_rate_hz_;
  std::vector<ChannelSignal> channels_;
};

inline std::string default_channel_label(std::size_t i) { return "ch" + std::to_string(i); }

// ---------------------------------------------------------------------------
// Resampling

namespace detail {

/// Windowed-sinc kernel (Kaiser window) tabulated on a fine grid.
class SincKernel {
 public:
  static constexpr int kTaps = 64;
  static constexpr double kBeta = 8.0;
  static constexpr int kOversample = 1024;

  SincKernel() : table_(kTaps / 2 * kOversample + 2) {
    const double half = kTaps / 2.0;
    const double norm = std::cyl_bessel_i(0.0, kBeta);
    for (std::size_t i = 0; i < table_.size(); ++i) {
      const double x = static_cast<double>(i) / kOversample;
      if (x >= half) {
        table_[i] = 0.0;
        continue;
      }
      const double r = x / half;
      const double window = std::cyl_bessel_i(0.0, kBeta * std::sqrt(1.0 - r * r)) / norm;
      const double sinc = x == 0.0 ? 1.0 : std::sin(M_PI * x) / (M_PI * x);
      table_[i] = sinc * window;
    }
  }

  /// Kernel at distance x (in units of the kernel's zero-crossing spacing).
  double operator()(double x) const {
    x = std::abs(x) * kOversample;
    const auto i = static_cast<std::size_t>(x);
    if (i + 1 >= table_.size()) return 0.0;
    const double frac = x - static_cast<double>(i);
    return table_[i] + frac * (table_[i + 1] - table_[i]);
  }

 private:
  std::vector<double> table_;
};

inline const SincKernel& sinc_kernel() {
  static const SincKernel kernel;
  return kernel;
}

}  // namespace detail

/// Resample one channel by windowed-sinc interpolation. The kernel spans 64
/// zero crossings at the lower of the two rates; weights are renormalized per
/// output sample so constants are preserved exactly, including at the edges.
inline std::vector<double> resample_samples(std::span<const double> in, double from_hz,
                                            double to_hz) {
  if (!(from_hz > 0.0) || !(to_hz > 0.0)) throw UsageError("resample: rates must be positive");
  if (from_hz == to_hz) return {in.begin(), in.end()};
  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(in.size()) * to_hz / from_hz));
  std::vector<double> out(out_len, 0.0);
  if (in.empty()) return out;

  const double step = from_hz / to_hz;            // input samples per output sample
  const double cutoff = std::min(1.0, to_hz / from_hz);  // relative to input Nyquist
  const double half_width = detail::SincKernel::kTaps / 2.0 / cutoff;
  const auto& kernel = detail::sinc_kernel();
  const auto last = static_cast<long>(in.size()) - 1;

  for (std::size_t n = 0; n < out_len; ++n) {
    const double pos = static_cast<double>(n) * step;
    const long lo = std::max(0L, static_cast<long>(std::ceil(pos - half_width)));
    const long hi = std::min(last, static_cast<long>(std::floor(pos + half_width)));
    double acc = 0.0;
    double wsum = 0.0;
    for (long k = lo; k <= hi; ++k) {
      const double w = kernel((pos - static_cast<double>(k)) * cutoff);
      acc += w * in[static_cast<std::size_t>(k)];
      wsum += w;
    }
    out[n] = wsum != 0.0 ? acc / wsum : 0.0;
  }
  return out;
}

inline Recording resample(const Recording& rec, double target_hz) {
  if (!(target_hz > 0.0)) throw UsageError("resample: target rate must be positive");
  if (rec.sample_rate_hz() == target_hz) return rec;
  std::vector<ChannelSignal> channels;
  channels.reserve(rec.num_channels());
  for (const auto& ch : rec.channels())
    channels.push_back({ch.label, resample_samples(ch.samples, rec.sample_rate_hz(), target_hz)});
  return Recording(rec.id(), target_hz, std::move(channels));
}

// ---------------------------------------------------------------------------
// Montage

struct Derivation {
  std::string output;
  std::string positive;
  std::optional<std::string> negative;
};

struct MontageSpec {
  std::vector<Derivation> derivations;
};

/// Parse a montage file. One derivation per line, `OUT = POS - NEG` or
/// `OUT = POS`; `#` starts a comment.
inline MontageSpec parse_montage(std::istream& in) {
  MontageSpec spec;
  std::set<std::string> outputs;
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("montage line " + std::to_string(line_no) + ": expected 'OUT = POS [- NEG]'");
    Derivation d;
    d.output = trim(line.substr(0, eq));
    std::string rhs = trim(line.substr(eq + 1));
    // Labels may themselves contain '-', so the separator is " - ".
    if (auto minus = rhs.find(" - "); minus != std::string::npos) {
      d.positive = trim(rhs.substr(0, minus));
      d.negative = trim(rhs.substr(minus + 3));
    } else {
      d.positive = rhs;
    }
    if (d.output.empty() || d.positive.empty() || (d.negative && d.negative->empty()))
      throw DataError("montage line " + std::to_string(line_no) + ": empty label");
    if (!outputs.insert(d.output).second)
      throw DataError("montage: duplicate output label '" + d.output + "'");
    spec.derivations.push_back(std::move(d));
  }
  return spec;
}

inline MontageSpec read_montage(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open montage file '" + path + "'");
  return parse_montage(in);
}

inline Recording apply_montage(const Recording& rec, const MontageSpec& spec) {
  if (spec.derivations.empty()) throw DataError("montage has no derivations");
  auto resolve = [&](const std::string& label) {
    auto idx = rec.find_channel(label);
    if (!idx) throw DataError("montage: channel '" + label + "' not found in recording '" + rec.id() + "'");
    return *idx;
  };
  std::vector<ChannelSignal> out;
  out.reserve(spec.derivations.size());
  for (const auto& d : spec.derivations) {
    const auto& pos = rec.channel(resolve(d.positive)).samples;
    ChannelSignal ch{d.output, pos};
    if (d.negative) {
      const auto& neg = rec.channel(resolve(*d.negative)).samples;
      for (std::size_t i = 0; i < ch.samples.size(); ++i) ch.samples[i] -= neg[i];
    }
    out.push_back(std::move(ch));
  }
  return Recording(rec.id(), rec.sample_rate_hz(), std::move(out));
}

// ---------------------------------------------------------------------------
// raw_matrix: `channels=<n> rate_hz=<r> samples=<m>\n` then float32 LE,
// channel-major.

namespace detail {

inline std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big)
    v = (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
  return v;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

inline void write_raw_matrix(const Recording& rec, std::ostream& out) {
  out << "channels=" << rec.num_channels() << " rate_hz=" << detail::format_double(rec.sample_rate_hz())
      << " samples=" << rec.num_samples() << "\n";
  for (const auto& ch : rec.channels()) {
    for (double v : ch.samples) {
      const auto f = static_cast<float>(v);
      const std::uint32_t bits = detail::to_little_endian(std::bit_cast<std::uint32_t>(f));
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
}

inline void write_raw_matrix(const Recording& rec, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot create '" + path + "'");
  write_raw_matrix(rec, out);
  if (!out) throw DataError("write failed for '" + path + "'");
}

inline Recording read_raw_matrix(std::istream& in, const std::string& id) {
  std::string header;
  if (!std::getline(in, header)) throw DataError(id + ": missing raw_matrix header");
  std::istringstream hs(header);
  std::map<std::string, std::string> fields;
  std::string token;
  while (hs >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw DataError(id + ": malformed header token '" + token + "'");
    fields[token.substr(0, eq)] = token.substr(eq + 1);
  }
  for (const char* key : {"channels", "rate_hz", "samples"})
    if (!fields.count(key)) throw DataError(id + ": header lacks '" + key + "'");
  if (fields.size() != 3) throw DataError(id + ": unexpected keys in raw_matrix header");
  std::size_t channels = 0, samples = 0;
  double rate = 0.0;
  try {
    std::size_t used = 0;
    channels = std::stoul(fields["channels"], &used);
    if (used != fields["channels"].size()) throw std::invalid_argument("channels");
    samples = std::stoul(fields["samples"], &used);
    if (used != fields["samples"].size()) throw std::invalid_argument("samples");
    rate = std::stod(fields["rate_hz"], &used);
    if (used != fields["rate_hz"].size()) throw std::invalid_argument("rate_hz");
  } catch (const std::logic_error&) {
    throw DataError(id + ": malformed raw_matrix header '" + header + "'");
  }
  if (channels == 0) throw DataError(id + ": zero channels");
  std::vector<ChannelSignal> chans(channels);
  std::vector<std::uint32_t> buf(samples);
  for (std::size_t c = 0; c < channels; ++c) {
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(samples * sizeof(std::uint32_t)));
    if (static_cast<std::size_t>(in.gcount()) != samples * sizeof(std::uint32_t))
      throw DataError(id + ": truncated sample data in channel " + std::to_string(c));
    chans[c].label = default_channel_label(c);
    chans[c].samples.resize(samples);
    for (std::size_t i = 0; i < samples; ++i)
      chans[c].samples[i] = std::bit_cast<float>(detail::to_little_endian(buf[i]));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError(id + ": trailing bytes after sample data");
  return Recording(id, rate, std::move(chans));
}

inline std::string stem_of(const std::string& path) {
  auto slash = path.find_last_of('/');
  std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
  auto dot = name.find('.');
  return dot == std::string::npos || dot == 0 ? name : name.substr(0, dot);
}

inline Recording read_raw_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_raw_matrix(in, stem_of(path));
}

// ---------------------------------------------------------------------------
// EDF subset: plain EDF header plus 16-bit little-endian data records with a
// uniform record duration. EDF+ annotation channels, discontinuous files and
// unknown record counts are rejected.

namespace detail {

inline std::string edf_field(const std::vector<char>& buf, std::size_t offset, std::size_t len) {
  std::string s(buf.begin() + static_cast<long>(offset), buf.begin() + static_cast<long>(offset + len));
  const auto e = s.find_last_not_of(' ');
  return e == std::string::npos ? std::string() : s.substr(0, e + 1);
}

inline double edf_number(const std::string& field, const std::string& what, const std::string& id) {
  try {
    std::size_t used = 0;
    const std::string s = field.substr(field.find_first_not_of(' ') == std::string::npos ? 0 : field.find_first_not_of(' '));
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(what);
    return v;
  } catch (const std::logic_error&) {
    throw DataError(id + ": malformed EDF header field " + what + " ('" + field + "')");
  }
}

}  // namespace detail

inline Recording read_edf(std::istream& in, const std::string& id) {
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 256) throw DataError(id + ": EDF header truncated");
  using detail::edf_field;
  using detail::edf_number;
  if (edf_field(bytes, 0, 8) != "0") throw DataError(id + ": not an EDF file (version field)");
  const std::string reserved = edf_field(bytes, 192, 44);
  if (reserved.rfind("EDF+D", 0) == 0)
    throw DataError(id + ": unsupported EDF feature: discontinuous EDF+ recording");
  const double header_bytes = edf_number(edf_field(bytes, 184, 8), "header bytes", id);
  const double num_records = edf_number(edf_field(bytes, 236, 8), "number of records", id);
  const double record_s = edf_number(edf_field(bytes, 244, 8), "record duration", id);
  const double ns_d = edf_number(edf_field(bytes, 252, 4), "number of signals", id);
  if (num_records < 0) throw DataError(id + ": unsupported EDF feature: unknown record count");
  if (!(record_s > 0)) throw DataError(id + ": unsupported EDF feature: non-positive record duration");
  if (!(ns_d >= 1)) throw DataError(id + ": EDF file declares no signals");
  const auto ns = static_cast<std::size_t>(ns_d);
  if (static_cast<std::size_t>(header_bytes) != 256 * (ns + 1) || bytes.size() < 256 * (ns + 1))
    throw DataError(id + ": malformed header: header size inconsistent with signal count");

  struct SignalHeader {
    std::string label;
    double phys_min, phys_max, dig_min, dig_max;
    std::size_t samples_per_record;
  };
  std::vector<SignalHeader> sig(ns);
  std::size_t off = 256;
  auto field_at = [&](std::size_t width, std::size_t i) {
    return edf_field(bytes, off + i * width, width);
  };
  for (std::size_t i = 0; i < ns; ++i) sig[i].label = field_at(16, i);
  off += 16 * ns;
  off += 80 * ns;  // transducer
  off += 8 * ns;   // physical dimension
  for (std::size_t i = 0; i < ns; ++i) sig[i].phys_min = edf_number(field_at(8, i), "physical minimum", id);
  off += 8 * ns;
  for (std::size_t i = 0; i < ns; ++i) sig[i].phys_max = edf_number(field_at(8, i), "physical maximum", id);
  off += 8 * ns;
  for (std::size_t i = 0; i < ns; ++i) sig[i].dig_min = edf_number(field_at(8, i), "digital minimum", id);
  off += 8 * ns;
  for (std::size_t i = 0; i < ns; ++i) sig[i].dig_max = edf_number(field_at(8, i), "digital maximum", id);
  off += 8 * ns;
  off += 80 * ns;  // prefiltering
  for (std::size_t i = 0; i < ns; ++i) {
    const double spr = edf_number(field_at(8, i), "samples per record", id);
    if (!(spr >= 1)) throw DataError(id + ": malformed header: samples per record must be positive");
    sig[i].samples_per_record = static_cast<std::size_t>(spr);
  }

  std::size_t record_samples = 0;
  for (const auto& s : sig) {
    if (s.label == "EDF Annotations")
      throw DataError(id + ": unsupported EDF feature: annotations-in-signal channel");
    if (s.dig_max <= s.dig_min) throw DataError(id + ": malformed header: digital range of '" + s.label + "'");
    record_samples += s.samples_per_record;
  }
  const auto nrec = static_cast<std::size_t>(num_records);
  const std::size_t expected = 256 * (ns + 1) + nrec * record_samples * 2;
  if (bytes.size() != expected)
    throw DataError(id + ": inconsistent data length: expected " + std::to_string(expected) +
                    " bytes, found " + std::to_string(bytes.size()));

  std::vector<std::vector<double>> data(ns);
  for (std::size_t i = 0; i < ns; ++i) data[i].reserve(nrec * sig[i].samples_per_record);
  std::size_t pos = 256 * (ns + 1);
  for (std::size_t r = 0; r < nrec; ++r) {
    for (std::size_t i = 0; i < ns; ++i) {
      const auto& s = sig[i];
      const double gain = (s.phys_max - s.phys_min) / (s.dig_max - s.dig_min);
      for (std::size_t k = 0; k < s.samples_per_record; ++k) {
        const auto lo = static_cast<std::uint8_t>(bytes[pos]);
        const auto hi = static_cast<std::uint8_t>(bytes[pos + 1]);
        pos += 2;
        const auto digital = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
        data[i].push_back((digital - s.dig_min) * gain + s.phys_min);
      }
    }
  }

  // Channels with differing rates are brought to the highest rate present.
  double rate = 0.0;
  for (const auto& s : sig) rate = std::max(rate, static_cast<double>(s.samples_per_record) / record_s);
  std::vector<ChannelSignal> channels;
  for (std::size_t i = 0; i < ns; ++i) {
    const double r = static_cast<double>(sig[i].samples_per_record) / record_s;
    channels.push_back({sig[i].label, r == rate ? std::move(data[i]) : resample_samples(data[i], r, rate)});
  }
  return Recording(id, rate, std::move(channels));
}

inline Recording read_edf(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_edf(in, stem_of(path));
}

enum class RecordingFormat { edf_subset, raw_matrix };

inline RecordingFormat format_for_path(const std::string& path) {
  auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == "edf" ? RecordingFormat::edf_subset : RecordingFormat::raw_matrix;
}

inline Recording read_recording(const std::string& path, RecordingFormat format) {
  return format == RecordingFormat::edf_subset ? read_edf(path) : read_raw_matrix(path);
}

inline Recording read_recording(const std::string& path) {
  return read_recording(path, format_for_path(path));
}

}  // namespace seqdet

#endif  // SEQDET_SIGNAL_IO_HPP
