#pragma once

// HDFT tensor files:
//   "HDFT" | u32 version (1) | u32 rank | rank x u32 dims | prod(dims) x f32
// All integers and floats little-endian, row-major payload, no padding or footer.

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "hdfeat/error.hpp"
#include "hdfeat/tensor.hpp"

namespace hdfeat::hdft {

inline constexpr std::array<char, 4> kMagic = {'H', 'D', 'F', 'T'};
inline constexpr std::uint32_t kVersion = 1;

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[off + i]) << (8 * i);
  return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode(const Tensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(12 + 4 * t.rank() + 4 * t.size());
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  detail::put_u32(out, kVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) detail::put_u32(out, static_cast<std::uint32_t>(d));
  for (float f : t.data()) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

inline Tensor decode(const std::vector<std::uint8_t>& bytes) {
  auto need = [&](std::size_t off, std::size_t n) {
    if (bytes.size() < off + n) {
      throw Error(ErrorKind::kParse, "HDFT truncated at byte offset " + std::to_string(bytes.size()) +
                                         " (needed " + std::to_string(off + n) + ")");
    }
  };
  need(0, 12);
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw Error(ErrorKind::kParse, "bad HDFT magic at byte offset 0");
  }
  const auto version = detail::get_u32(bytes, 4);
  if (version != kVersion) {
    throw Error(ErrorKind::kParse, "unsupported HDFT version " + std::to_string(version) + " at byte offset 4");
  }
  const auto rank = detail::get_u32(bytes, 8);
  if (rank < 1 || rank > 4) {
    throw Error(ErrorKind::kParse, "HDFT rank " + std::to_string(rank) + " out of range at byte offset 8");
  }
  need(12, 4 * rank);
  Shape shape(rank);
  for (std::uint32_t i = 0; i < rank; ++i) {
    shape[i] = detail::get_u32(bytes, 12 + 4 * i);
    if (shape[i] == 0) {
      throw Error(ErrorKind::kParse, "zero dimension at byte offset " + std::to_string(12 + 4 * i));
    }
  }
  const std::size_t off = 12 + 4 * rank;
  const std::size_t n = shape_numel(shape);
  need(off, 4 * n);
  if (bytes.size() != off + 4 * n) {
    throw Error(ErrorKind::kParse, "trailing bytes after HDFT payload at byte offset " + std::to_string(off + 4 * n));
  }
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<float>(detail::get_u32(bytes, off + 4 * i));
  return Tensor(std::move(shape), std::move(data));
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::kIo, "read failed: " + path.string());
  return bytes;
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "write failed: " + path.string());
}

inline Tensor load(const std::filesystem::path& path) { return decode(read_bytes(path)); }
inline void save(const std::filesystem::path& path, const Tensor& t) { write_bytes(path, encode(t)); }

}  // namespace hdfeat::hdft
