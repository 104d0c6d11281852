// dann/tensor_io.hpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Binary tensor container:
//   bytes 0..3  magic "DTNS"
//   byte  4     rank (1..3)
//   then rank * u64 extents, little endian
//   then prod(extents) * f64 values, little endian IEEE-754
// Byte order is packed explicitly so files round-trip across platforms.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "dann/error.hpp"
#include "dann/tensor.hpp"

namespace dann {

namespace detail {

inline void put_u64_le(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64_le(std::istream& in, const char* what) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) {
    throw FormatError(std::string("truncated while reading ") + what);
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void put_f64_le(std::ostream& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64_le(out, bits);
}

inline double get_f64_le(std::istream& in, const char* what) {
  const std::uint64_t bits = get_u64_le(in, what);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace detail

inline void write_tensor(std::ostream& out, const Tensor& t) {
  out.write("DTNS", 4);
  const unsigned char rank = static_cast<unsigned char>(t.rank());
  out.write(reinterpret_cast<const char*>(&rank), 1);
  for (std::size_t a = 0; a < t.rank(); ++a) {
    detail::put_u64_le(out, t.shape()[a]);
  }
  for (double v : t.values()) detail::put_f64_le(out, v);
  if (!out) throw IoError("tensor write failed");
}

inline Tensor read_tensor(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "DTNS", 4) != 0) {
    throw FormatError("bad tensor magic, expected DTNS");
  }
  unsigned char rank = 0;
  if (!in.read(reinterpret_cast<char*>(&rank), 1)) {
    throw FormatError("truncated while reading tensor rank");
  }
  if (rank < 1 || rank > 3) {
    throw FormatError("tensor rank out of range: " + std::to_string(rank));
  }
  std::vector<std::size_t> shape(rank);
  std::size_t n = 1;
  for (auto& e : shape) {
    const std::uint64_t ext = detail::get_u64_le(in, "tensor extent");
    if (ext == 0) throw FormatError("tensor extent is zero");
    e = static_cast<std::size_t>(ext);
    n *= e;
  }
  std::vector<double> values(n);
  for (double& v : values) v = detail::get_f64_le(in, "tensor data");
  return Tensor(std::move(shape), std::move(values));
}

inline void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  write_tensor(out, t);
}

inline Tensor load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  return read_tensor(in);
}

}  // namespace dann
