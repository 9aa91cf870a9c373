#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "formlab/common/error.hpp"

namespace formlab::io {

// Little-endian scalar encoding, independent of host byte order.

inline void write_u64_le(std::ostream& os, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf, 8);
}

inline std::uint64_t read_u64_le(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw StructuralError("unexpected end of binary stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

inline void write_u32_le(std::ostream& os, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf, 4);
}

inline std::uint32_t read_u32_le(std::istream& is) {
  unsigned char buf[4];
  is.read(reinterpret_cast<char*>(buf), 4);
  if (!is) throw StructuralError("unexpected end of binary stream");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

inline void write_f64(std::ostream& os, double v) { write_u64_le(os, std::bit_cast<std::uint64_t>(v)); }
inline double read_f64(std::istream& is) { return std::bit_cast<double>(read_u64_le(is)); }
inline void write_f32(std::ostream& os, float v) { write_u32_le(os, std::bit_cast<std::uint32_t>(v)); }
inline float read_f32(std::istream& is) { return std::bit_cast<float>(read_u32_le(is)); }

inline std::string read_line(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw StructuralError("unexpected end of stream while reading header");
  return line;
}

}  // namespace formlab::io
