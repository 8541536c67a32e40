#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "craft/error.hpp"
#include "craft/util.hpp"

namespace craft {

// Unit-norm embedding. Values are held in double; the file format stores f32.
class EmbeddingVector {
 public:
  explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw DataError("embedding has zero dimension", {});
    double sq = 0.0;
    for (double v : values_) {
      if (!std::isfinite(v)) throw DataError("embedding contains NaN/Inf", {});
      sq += v * v;
    }
    if (!(sq > 0.0)) throw DataError("zero embedding vector", {});
    const double norm = std::sqrt(sq);
    for (auto& v : values_) v /= norm;
  }

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<double> values_;
};

// Dot product of unit vectors, clamped to [-1, 1].
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) throw DimError(a.dim(), b.dim());
  const auto x = a.values();
  const auto y = b.values();
  double dot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
  return std::clamp(dot, -1.0, 1.0);
}

inline std::string text_key(std::string_view prompt) { return "text:" + std::string(prompt); }

inline std::string image_key(std::string_view ref) {
  if (starts_with(ref, "image:")) return std::string(ref);
  return "image:" + std::string(ref);
}

class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  // First insert fixes the dimension of an undimensioned store.
  void insert(std::string key, EmbeddingVector v) {
    if (dim_ == 0) dim_ = v.dim();
    if (v.dim() != dim_) throw DimError(dim_, v.dim());
    entries_.insert_or_assign(std::move(key), std::move(v));
  }

  const EmbeddingVector* find(std::string_view key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [k, _] : entries_) out.push_back(k);
    return out;
  }

  const std::map<std::string, EmbeddingVector, std::less<>>& entries() const noexcept { return entries_; }

 private:
  std::size_t dim_ = 0;
  std::map<std::string, EmbeddingVector, std::less<>> entries_;
};

// ---------------------------------------------------------------------------
// CEMB file format (little-endian):
//   "CEMB" | version u16 | dim u32 | count u64
//   per entry: key_len u32 | key bytes (UTF-8) | dim x f32

inline constexpr std::array<char, 4> kCembMagic = {'C', 'E', 'M', 'B'};
inline constexpr std::uint16_t kCembVersion = 1;

namespace detail {

template <typename T>
void put_le(std::ostream& out, T v) {
  std::array<char, sizeof(T)> buf{};
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xffU);
  out.write(buf.data(), buf.size());
}

template <typename T>
T get_le(std::istream& in, std::string_view what) {
  std::array<unsigned char, sizeof(T)> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) throw FormatError("truncated file while reading " + std::string(what));
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return static_cast<T>(v);
}

inline void put_f32(std::ostream& out, float f) {
  std::uint32_t bits = 0;
  std::memcpy(&bits, &f, sizeof bits);
  put_le<std::uint32_t>(out, bits);
}

inline float get_f32(std::istream& in) {
  const auto bits = get_le<std::uint32_t>(in, "vector value");
  float f = 0.0F;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

}  // namespace detail

inline void write_store(std::ostream& out, const EmbeddingStore& store) {
  out.write(kCembMagic.data(), kCembMagic.size());
  detail::put_le<std::uint16_t>(out, kCembVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.dim()));
  detail::put_le<std::uint64_t>(out, store.size());
  for (const auto& [key, vec] : store.entries()) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(key.size()));
    out.write(key.data(), static_cast<std::streamsize>(key.size()));
    for (double v : vec.values()) detail::put_f32(out, static_cast<float>(v));
  }
}

// All-or-nothing: any error leaves no partially built store behind.
inline EmbeddingStore read_store(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 4 || magic != kCembMagic) throw FormatError("bad magic, not a CEMB file");
  const auto version = detail::get_le<std::uint16_t>(in, "version");
  if (version != kCembVersion) throw FormatError("unsupported CEMB version " + std::to_string(version));
  const auto dim = detail::get_le<std::uint32_t>(in, "dim");
  const auto count = detail::get_le<std::uint64_t>(in, "count");
  if (count > 0 && dim == 0) throw FormatError("zero dimension with non-empty store");

  EmbeddingStore store(dim);
  std::vector<double> values(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto key_len = detail::get_le<std::uint32_t>(in, "key length");
    if (key_len > (1U << 20)) throw FormatError("implausible key length " + std::to_string(key_len));
    std::string key(key_len, '\0');
    in.read(key.data(), key_len);
    if (in.gcount() != static_cast<std::streamsize>(key_len)) throw FormatError("truncated file while reading key");
    for (auto& v : values) {
      const float f = detail::get_f32(in);
      if (!std::isfinite(f)) throw DataError("NaN/Inf value", key);
      v = f;
    }
    if (store.find(key)) throw FormatError("duplicate key " + key);
    try {
      store.insert(key, EmbeddingVector(values));
    } catch (const DataError&) {
      throw DataError("zero vector", key);
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after last entry");
  return store;
}

inline EmbeddingStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_store(in);
}

inline void save_store(const std::filesystem::path& path, const EmbeddingStore& store) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  write_store(out, store);
}

}  // namespace craft
