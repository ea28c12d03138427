// SPDX-License-Identifier: Apache-2.0
//
// Binary model files. Layout (all integers and doubles little-endian):
//
//   "GRNNMODL"              8-byte magic
//   u32 version             currently 1
//   payload:
//     u32 input_dim, u32 output_dim, u32 lookback
//     str target            (u32 length + bytes)
//     u32 n_features, str * n_features
//     u32 n_layers, then per layer: u8 cell kind, u8 activation, u32 units
//     u32 n_tensors, then per tensor: str name, u64 count, f64 * count
//   u64 FNV-1a hash of the payload
//
// Tensors appear in for_each_tensor order; doubles are stored bit-exact.

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "grnn/network.hpp"

namespace grnn {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::array<char, 8> kModelMagic = {'G', 'R', 'N', 'N', 'M', 'O', 'D', 'L'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

/// A trained network plus what is needed to feed it.
struct Model {
  NetworkSpec spec;
  NetworkParams params;
  std::size_t lookback = 0;
  std::vector<std::string> feature_names;
  std::string target;

  friend bool operator==(const Model&, const Model&) = default;
};

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { le(v); }
  void u64(std::uint64_t v) { le(v); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  const std::string& bytes() const noexcept { return buf_; }

 private:
  template <typename T>
  void le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() { return le<std::uint32_t>(); }
  std::uint64_t u64() { return le<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  std::string str() {
    const auto n = u32();
    return std::string(take(n));
  }
  bool done() const noexcept { return pos_ == data_.size(); }

 private:
  std::string_view take(std::size_t n) {
    if (data_.size() - pos_ < n) throw FormatError("model file is truncated");
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename T>
  T le() {
    const auto s = take(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<unsigned char>(s[i])) << (8 * i);
    return v;
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

inline void write_model(const Model& m, std::ostream& os) {
  check_params(m.spec, m.params);
  detail::ByteWriter w;
  w.u32(static_cast<std::uint32_t>(m.spec.input_dim));
  w.u32(static_cast<std::uint32_t>(m.spec.output_dim));
  w.u32(static_cast<std::uint32_t>(m.lookback));
  w.str(m.target);
  w.u32(static_cast<std::uint32_t>(m.feature_names.size()));
  for (const auto& f : m.feature_names) w.str(f);
  w.u32(static_cast<std::uint32_t>(m.spec.layers.size()));
  for (const auto& l : m.spec.layers) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    w.u8(static_cast<std::uint8_t>(l.activation));
    w.u32(static_cast<std::uint32_t>(l.units));
  }
  std::vector<std::pair<std::string, std::span<const double>>> tensors;
  for_each_tensor(m.params, [&](const std::string& name, std::span<const double> t) {
    tensors.emplace_back(name, t);
  });
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    w.str(name);
    w.u64(t.size());
    for (double v : t) w.f64(v);
  }

  detail::ByteWriter header;
  for (char c : kModelMagic) header.u8(static_cast<std::uint8_t>(c));
  header.u32(kModelFormatVersion);
  detail::ByteWriter trailer;
  trailer.u64(detail::fnv1a(w.bytes()));

  os.write(header.bytes().data(), static_cast<std::streamsize>(header.bytes().size()));
  os.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  os.write(trailer.bytes().data(), static_cast<std::streamsize>(trailer.bytes().size()));
  if (!os) throw FormatError("failed to write model");
}

inline Model read_model(std::istream& is) {
  const std::string all((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (all.size() < kModelMagic.size() + 4 + 8 ||
      std::memcmp(all.data(), kModelMagic.data(), kModelMagic.size()) != 0)
    throw FormatError("not a model file (bad magic)");
  detail::ByteReader head(std::string_view(all).substr(kModelMagic.size(), 4));
  const auto version = head.u32();
  if (version != kModelFormatVersion)
    throw FormatError("unsupported model format version " + std::to_string(version) +
                      " (expected " + std::to_string(kModelFormatVersion) + ")");
  const std::string_view payload =
      std::string_view(all).substr(kModelMagic.size() + 4, all.size() - kModelMagic.size() - 4 - 8);
  detail::ByteReader tail(std::string_view(all).substr(all.size() - 8));
  if (tail.u64() != detail::fnv1a(payload))
    throw FormatError("model format version " + std::to_string(version) +
                      " checksum mismatch (file is corrupted)");

  detail::ByteReader r(payload);
  Model m;
  m.spec.input_dim = r.u32();
  m.spec.output_dim = r.u32();
  m.lookback = r.u32();
  m.target = r.str();
  const auto nf = r.u32();
  for (std::uint32_t i = 0; i < nf; ++i) m.feature_names.push_back(r.str());
  const auto nl = r.u32();
  for (std::uint32_t i = 0; i < nl; ++i) {
    LayerSpec l;
    const auto kind = r.u8();
    const auto act = r.u8();
    if (kind > 1 || act > 1) throw FormatError("unknown layer encoding in model file");
    l.kind = static_cast<CellKind>(kind);
    l.activation = static_cast<Activation>(act);
    l.units = r.u32();
    m.spec.layers.push_back(l);
  }
  try {
    m.params = zero_params(m.spec);
  } catch (const ShapeError& e) {
    throw FormatError(std::string("invalid network in model file: ") + e.what());
  }
  const auto nt = r.u32();
  std::vector<std::pair<std::string, std::span<double>>> tensors;
  for_each_tensor(m.params, [&](const std::string& name, std::span<double> t) {
    tensors.emplace_back(name, t);
  });
  if (nt != tensors.size()) throw FormatError("tensor count does not match the stored network");
  for (auto& [name, t] : tensors) {
    if (r.str() != name) throw FormatError("unexpected tensor order in model file");
    if (r.u64() != t.size()) throw FormatError("tensor " + name + " has the wrong length");
    for (double& v : t) v = r.f64();
  }
  if (!r.done()) throw FormatError("trailing bytes in model file");
  return m;
}

inline void save_model(const Model& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  write_model(m, os);
}

inline Model load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path + "'");
  return read_model(is);
}

}  // namespace grnn
