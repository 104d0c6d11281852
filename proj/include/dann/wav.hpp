// dann/wav.hpp
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

// Minimal RIFF/WAVE reader and writer for 16-bit PCM. Multi-channel input
// is accepted but only channel 0 is kept (with a warning); everything else
// in the pipeline is mono.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "dann/error.hpp"

namespace dann {

struct AudioBuffer {
  std::vector<double> samples;  // in [-1, 1]
  std::size_t sample_rate = 0;
};

namespace detail {

inline std::uint32_t wav_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t wav_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

inline AudioBuffer read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file: " + path);
  }

  std::uint16_t channels = 0, bits = 0, format = 0;
  std::uint32_t sample_rate = 0;
  bool have_fmt = false;
  AudioBuffer out;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* tag = reinterpret_cast<const char*>(bytes.data() + pos);
    const std::uint32_t size = detail::wav_u32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      throw FormatError("truncated chunk in " + path);
    }
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (size < 16) throw FormatError("fmt chunk too small in " + path);
      format = detail::wav_u16(bytes.data() + body);
      channels = detail::wav_u16(bytes.data() + body + 2);
      sample_rate = detail::wav_u32(bytes.data() + body + 4);
      bits = detail::wav_u16(bytes.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("data chunk before fmt in " + path);
      if (format != 1 || bits != 16) {
        throw FormatError("only 16-bit PCM is supported: " + path);
      }
      if (channels == 0) throw FormatError("zero channels in " + path);
      if (channels > 1) {
        std::cerr << "warning: " << path << " has " << channels
                  << " channels, keeping channel 0\n";
      }
      const std::size_t n = size / (2 * channels);
      out.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const unsigned char* p = bytes.data() + body + i * 2 * channels;
        const std::int16_t v =
            static_cast<std::int16_t>(p[0] | (p[1] << 8));
        out.samples[i] = static_cast<double>(v) / 32768.0;
      }
      out.sample_rate = sample_rate;
      return out;
    }
    pos = body + size + (size & 1);  // chunks are word aligned
  }
  throw FormatError("no data chunk in " + path);
}

inline void write_wav(const std::string& path,
                      const std::vector<double>& samples,
                      std::size_t sample_rate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  const std::uint32_t data_size = static_cast<std::uint32_t>(samples.size() * 2);
  auto u32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  auto u16 = [&](std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
  };
  out.write("RIFF", 4);
  u32(36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  u32(16);
  u16(1);  // PCM
  u16(1);  // mono
  u32(static_cast<std::uint32_t>(sample_rate));
  u32(static_cast<std::uint32_t>(sample_rate * 2));  // byte rate
  u16(2);                                            // block align
  u16(16);                                           // bits
  out.write("data", 4);
  u32(data_size);
  for (double s : samples) {
    const double clamped = std::clamp(s, -1.0, 1.0);
    const std::int16_t v =
        static_cast<std::int16_t>(std::lround(clamped * 32767.0));
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 2);
  }
  if (!out) throw IoError("wav write failed: " + path);
}

}  // namespace dann
