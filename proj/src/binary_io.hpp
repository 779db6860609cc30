// SPDX-License-Identifier: Apache-2.0
// Little-endian helpers shared by the feature and checkpoint formats.
#ifndef LINKDISTILL_BINARY_IO_HPP_
#define LINKDISTILL_BINARY_IO_HPP_

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace linkdistill::binio {

inline void write_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xffu);
  os.write(b.data(), 8);
}

inline void write_f32(std::ostream& os, float f) {
  const auto v = std::bit_cast<std::uint32_t>(f);
  std::array<char, 4> b{};
  for (int k = 0; k < 4; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xffu);
  os.write(b.data(), 4);
}

inline void expect_good(std::istream& is, std::string_view what) {
  if (!is) throw std::runtime_error("truncated binary input while reading " + std::string(what));
}

inline std::uint64_t read_u64(std::istream& is) {
  std::array<unsigned char, 8> b{};
  is.read(reinterpret_cast<char*>(b.data()), 8);
  expect_good(is, "u64");
  std::uint64_t v = 0;
  for (int k = 7; k >= 0; --k) v = (v << 8) | b[k];
  return v;
}

inline float read_f32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  is.read(reinterpret_cast<char*>(b.data()), 4);
  expect_good(is, "f32");
  std::uint32_t v = 0;
  for (int k = 3; k >= 0; --k) v = (v << 8) | b[k];
  return std::bit_cast<float>(v);
}

inline void write_magic(std::ostream& os, std::string_view magic) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& is, std::string_view magic) {
  std::string got(magic.size(), '\0');
  is.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (!is || got != magic)
    throw std::runtime_error("bad magic: expected " + std::string(magic));
}

}  // namespace linkdistill::binio

#endif  // LINKDISTILL_BINARY_IO_HPP_
