// dann/checkpoint.hpp
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

// Model checkpoint container:
//   bytes 0..3  magic "DANN"
//   u16         format version (currently 1)
//   u32 x4      input_dim, window, hidden, embed_dim
//   f64 x4      dropout, bn_momentum, bn_eps, lambda
//   u8          variant, u8 stage
//   u32         tensor count
//   tensors     in the fixed order of ModelBundle::state_tensors(), each in
//               the tensor container format
// All integers little endian.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dann/error.hpp"
#include "dann/model.hpp"
#include "dann/tensor_io.hpp"

namespace dann {

namespace detail {

inline void put_u32_le(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32_le(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw FormatError(std::string("truncated while reading ") + what);
  }
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline void put_u16_le(std::ostream& out, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

inline std::uint16_t get_u16_le(std::istream& in, const char* what) {
  unsigned char b[2];
  if (!in.read(reinterpret_cast<char*>(b), 2)) {
    throw FormatError(std::string("truncated while reading ") + what);
  }
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint8_t get_u8(std::istream& in, const char* what) {
  unsigned char b;
  if (!in.read(reinterpret_cast<char*>(&b), 1)) {
    throw FormatError(std::string("truncated while reading ") + what);
  }
  return b;
}

}  // namespace detail

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointImage {
  ModelConfig config;
  Stage stage = Stage::kPretrain;
  std::vector<Tensor> tensors;
};

inline void write_checkpoint(std::ostream& out, ModelBundle& bundle,
                             Stage stage) {
  const ModelConfig& cfg = bundle.config();
  out.write("DANN", 4);
  detail::put_u16_le(out, kCheckpointVersion);
  detail::put_u32_le(out, static_cast<std::uint32_t>(cfg.input_dim));
  detail::put_u32_le(out, static_cast<std::uint32_t>(cfg.window));
  detail::put_u32_le(out, static_cast<std::uint32_t>(cfg.hidden));
  detail::put_u32_le(out, static_cast<std::uint32_t>(cfg.embed_dim));
  detail::put_f64_le(out, cfg.dropout);
  detail::put_f64_le(out, cfg.bn_momentum);
  detail::put_f64_le(out, cfg.bn_eps);
  detail::put_f64_le(out, cfg.lambda);
  const unsigned char variant = static_cast<unsigned char>(cfg.variant);
  const unsigned char stage_byte = static_cast<unsigned char>(stage);
  out.write(reinterpret_cast<const char*>(&variant), 1);
  out.write(reinterpret_cast<const char*>(&stage_byte), 1);
  const std::vector<Tensor*> tensors = bundle.state_tensors();
  detail::put_u32_le(out, static_cast<std::uint32_t>(tensors.size()));
  for (const Tensor* t : tensors) write_tensor(out, *t);
  if (!out) throw IoError("checkpoint write failed");
}

inline void save_checkpoint(const std::string& path, ModelBundle& bundle,
                            Stage stage) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  write_checkpoint(out, bundle, stage);
}

inline CheckpointImage read_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "DANN", 4) != 0) {
    throw FormatError("bad checkpoint magic, expected DANN");
  }
  const std::uint16_t version = detail::get_u16_le(in, "checkpoint version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version));
  }
  CheckpointImage image;
  ModelConfig& cfg = image.config;
  cfg.input_dim = detail::get_u32_le(in, "input_dim");
  cfg.window = detail::get_u32_le(in, "window");
  cfg.hidden = detail::get_u32_le(in, "hidden");
  cfg.embed_dim = detail::get_u32_le(in, "embed_dim");
  cfg.dropout = detail::get_f64_le(in, "dropout");
  cfg.bn_momentum = detail::get_f64_le(in, "bn_momentum");
  cfg.bn_eps = detail::get_f64_le(in, "bn_eps");
  cfg.lambda = detail::get_f64_le(in, "lambda");
  const std::uint8_t variant = detail::get_u8(in, "variant");
  if (variant > 1) {
    throw FormatError("checkpoint variant byte out of range: " +
                      std::to_string(variant));
  }
  cfg.variant = static_cast<Variant>(variant);
  const std::uint8_t stage = detail::get_u8(in, "stage");
  if (stage > 2) {
    throw FormatError("checkpoint stage byte out of range: " +
                      std::to_string(stage));
  }
  image.stage = static_cast<Stage>(stage);
  cfg.validate();
  const std::uint32_t count = detail::get_u32_le(in, "tensor count");
  image.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    image.tensors.push_back(read_tensor(in));
  }
  return image;
}

inline CheckpointImage read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  return read_checkpoint(in);
}

namespace detail {

inline void check_dim(const char* name, std::size_t want, std::size_t got) {
  if (want != got) {
    throw ConfigError(std::string("checkpoint ") + name + " is " +
                      std::to_string(got) + " but the model expects " +
                      std::to_string(want));
  }
}

}  // namespace detail

/// Copies a checkpoint image into an already constructed bundle, refusing
/// any architecture mismatch with both sizes in the message.
inline Stage load_into(ModelBundle& bundle, const CheckpointImage& image) {
  const ModelConfig& want = bundle.config();
  const ModelConfig& got = image.config;
  detail::check_dim("input_dim", want.input_dim, got.input_dim);
  detail::check_dim("window", want.window, got.window);
  detail::check_dim("hidden", want.hidden, got.hidden);
  detail::check_dim("embed_dim", want.embed_dim, got.embed_dim);
  std::vector<Tensor*> slots = bundle.state_tensors();
  if (slots.size() != image.tensors.size()) {
    throw FormatError("checkpoint holds " +
                      std::to_string(image.tensors.size()) +
                      " tensors but the model has " +
                      std::to_string(slots.size()));
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]->shape() != image.tensors[i].shape()) {
      throw FormatError("checkpoint tensor " + std::to_string(i) +
                        " has shape " + image.tensors[i].shape_string() +
                        " but the model expects " + slots[i]->shape_string());
    }
    slots[i]->values() = image.tensors[i].values();
  }
  return image.stage;
}

/// Rebuilds a bundle exactly as stored, architecture and weights alike.
inline ModelBundle restore_model(const std::string& path,
                                 Stage* stage_out = nullptr) {
  const CheckpointImage image = read_checkpoint(path);
  RngState scratch(0);  // weights are overwritten below
  ModelBundle bundle(image.config, scratch);
  const Stage stage = load_into(bundle, image);
  if (stage_out) *stage_out = stage;
  return bundle;
}

}  // namespace dann
