// Copyright 2026 the dsum authors
// SPDX-License-Identifier: Apache-2.0
//
// Little-endian binary serialization helpers for the model files.

#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsum::binio {

struct SerializeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8))
    throw SerializeError("unexpected end of file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

inline void write_u8(std::ostream& out, std::uint8_t v) {
  out.put(static_cast<char>(v));
}

inline std::uint8_t read_u8(std::istream& in) {
  const int c = in.get();
  if (c == std::char_traits<char>::eof())
    throw SerializeError("unexpected end of file");
  return static_cast<std::uint8_t>(c);
}

inline void write_f64(std::ostream& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  write_u64(out, bits);
}

inline double read_f64(std::istream& in) {
  const std::uint64_t bits = read_u64(in);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  if (n > (1ull << 32)) throw SerializeError("string length out of range");
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n)))
    throw SerializeError("unexpected end of file");
  return s;
}

inline void write_f64_array(std::ostream& out, const std::vector<double>& v) {
  write_u64(out, v.size());
  for (double d : v) write_f64(out, d);
}

inline std::vector<double> read_f64_array(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  if (n > (1ull << 32)) throw SerializeError("array length out of range");
  std::vector<double> v(n);
  for (auto& d : v) d = read_f64(in);
  return v;
}

inline void expect_magic(std::istream& in, const std::string& magic,
                         const std::string& what) {
  std::string got(magic.size(), '\0');
  if (!in.read(got.data(), static_cast<std::streamsize>(magic.size())) ||
      got != magic)
    throw SerializeError("not a " + what + " file (bad magic)");
}

}  // namespace dsum::binio
