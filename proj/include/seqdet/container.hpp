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

#ifndef SEQDET_CONTAINER_HPP
#define SEQDET_CONTAINER_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "seqdet/error.hpp"

namespace seqdet {

// Versioned `SEQD` container. Layout, all integers little-endian:
//   "SEQD" | u32 version | u32 section count |
//   repeated { u32 name length | name bytes | u64 payload length | payload }
inline constexpr char kContainerMagic[4] = {'S', 'E', 'Q', 'D'};
inline constexpr std::uint32_t kContainerVersion = 1;

class ByteWriter {
 public:
  void put_u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void put_u32(std::uint32_t v) { put_le(v); }
  void put_u64(std::uint64_t v) { put_le(v); }
  void put_f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }
  void put_string(const std::string& s) {
    put_u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  template <typename Range>
  void put_f64s(const Range& values) {
    put_u64(static_cast<std::uint64_t>(std::size(values)));
    for (double v : values) put_f64(v);
  }
  void put_raw(const std::string& raw) { bytes_.insert(bytes_.end(), raw.begin(), raw.end()); }

  const std::string& bytes() const { return bytes_; }
  std::string take() { return std::move(bytes_); }

 private:
  template <typename T>
  void put_le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  std::string bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::string& bytes, std::string context) : bytes_(bytes), context_(std::move(context)) {}

  std::uint8_t get_u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t get_u32() { return get_le<std::uint32_t>(); }
  std::uint64_t get_u64() { return get_le<std::uint64_t>(); }
  double get_f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }
  std::string get_string() {
    const std::uint32_t n = get_u32();
    const char* p = take(n);
    return std::string(p, n);
  }
  std::vector<double> get_f64s() {
    const std::uint64_t n = get_u64();
    if (n > remaining() / 8) fail("array length exceeds payload");
    std::vector<double> v(n);
    for (auto& x : v) x = get_f64();
    return v;
  }
  std::vector<double> get_f64s(std::size_t expected, const char* what) {
    auto v = get_f64s();
    if (v.size() != expected)
      fail(std::string(what) + ": expected " + std::to_string(expected) + " values, found " + std::to_string(v.size()));
    return v;
  }
  std::string get_raw(std::size_t n) { return std::string(take(n), n); }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  bool done() const { return pos_ == bytes_.size(); }
  void expect_done() const {
    if (!done()) fail("trailing bytes");
  }
  [[noreturn]] void fail(const std::string& why) const { throw DataError(context_ + ": " + why); }

 private:
  const char* take(std::size_t n) {
    if (n > remaining()) fail("unexpected end of data");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename T>
  T get_le() {
    const char* p = take(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<std::uint8_t>(p[i])) << (8 * i);
    return v;
  }

  const std::string& bytes_;
  std::string context_;
  std::size_t pos_ = 0;
};

struct Section {
  std::string name;
  std::string payload;
};

inline std::string encode_container(const std::vector<Section>& sections) {
  ByteWriter w;
  w.put_raw(std::string(kContainerMagic, 4));
  w.put_u32(kContainerVersion);
  w.put_u32(static_cast<std::uint32_t>(sections.size()));
  for (const auto& s : sections) {
    w.put_string(s.name);
    w.put_u64(s.payload.size());
    w.put_raw(s.payload);
  }
  return w.take();
}

inline std::vector<Section> decode_container(const std::string& bytes, const std::string& context) {
  ByteReader r(bytes, context);
  if (r.remaining() < 4 || r.get_raw(4) != std::string(kContainerMagic, 4)) r.fail("not a SEQD container");
  const std::uint32_t version = r.get_u32();
  if (version != kContainerVersion)
    r.fail("unsupported container version " + std::to_string(version) + " (expected " +
           std::to_string(kContainerVersion) + ")");
  const std::uint32_t count = r.get_u32();
  std::vector<Section> sections;
  for (std::uint32_t i = 0; i < count; ++i) {
    Section s;
    s.name = r.get_string();
    const std::uint64_t n = r.get_u64();
    if (n > r.remaining()) r.fail("section '" + s.name + "' truncated");
    s.payload = r.get_raw(n);
    sections.push_back(std::move(s));
  }
  r.expect_done();
  return sections;
}

inline const Section& find_section(const std::vector<Section>& sections, const std::string& name,
                                   const std::string& context) {
  for (const auto& s : sections)
    if (s.name == name) return s;
  throw DataError(context + ": missing section '" + name + "'");
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot create '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path + "'");
}

/// 64-bit FNV-1a, used for manifest checksums.
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

}  // namespace seqdet

#endif  // SEQDET_CONTAINER_HPP
