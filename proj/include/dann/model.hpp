// dann/model.hpp
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

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dann/activations.hpp"
#include "dann/batchnorm.hpp"
#include "dann/blstm.hpp"
#include "dann/dense.hpp"
#include "dann/dropout.hpp"
#include "dann/error.hpp"
#include "dann/grad_reversal.hpp"
#include "dann/phase.hpp"
#include "dann/rng.hpp"
#include "dann/tensor.hpp"

namespace dann {

/// How the generator receives its adversarial gradient in step three.
enum class Variant : std::uint8_t { kGan = 0, kGr = 1 };

/// Which training stage produced a checkpoint.
enum class Stage : std::uint8_t { kPretrain = 0, kAdapted = 1, kUpperBound = 2 };

inline const char* variant_name(Variant v) {
  return v == Variant::kGan ? "gan" : "gr";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "gan") return Variant::kGan;
  if (s == "gr") return Variant::kGr;
  throw ConfigError("unknown variant '" + s + "', expected gan or gr");
}

struct ModelConfig {
  std::size_t input_dim = 23;  // feature coefficients per frame
  std::size_t window = 31;     // frames per spliced input
  std::size_t hidden = 64;     // LSTM units per direction
  std::size_t embed_dim = 16;  // generator output width
  double dropout = 0.2;
  double bn_momentum = 0.9;
  double bn_eps = 1e-5;
  double lambda = 1.0;  // adversarial weight
  Variant variant = Variant::kGan;

  void validate() const {
    if (input_dim == 0 || window == 0 || hidden == 0 || embed_dim == 0) {
      throw ConfigError("model dimensions must be positive");
    }
    if (dropout < 0.0 || dropout >= 1.0) {
      throw ConfigError("dropout must be in [0, 1), got " +
                        std::to_string(dropout));
    }
    if (bn_momentum < 0.0 || bn_momentum >= 1.0) {
      throw ConfigError("bn momentum must be in [0, 1)");
    }
    if (bn_eps <= 0.0) throw ConfigError("bn epsilon must be positive");
    if (lambda < 0.0) {
      throw ConfigError("lambda must be >= 0, got " + std::to_string(lambda));
    }
  }
};

/// Dense -> ReLU -> BatchNorm -> Dropout, the hidden unit used everywhere.
class HiddenBlock {
 public:
  HiddenBlock() = default;

  HiddenBlock(std::size_t in_dim, std::size_t out_dim,
              const ModelConfig& cfg, RngState& rng)
      : dense_(in_dim, out_dim, rng),
        bn_(out_dim, cfg.bn_momentum, cfg.bn_eps),
        dropout_(cfg.dropout) {}

  Tensor forward(const Tensor& x, Phase phase, RngState& rng) {
    return dropout_.forward(bn_.forward(relu_.forward(dense_.forward(x)), phase),
                            phase, rng);
  }

  Tensor backward(const Tensor& dy) {
    return dense_.backward(relu_.backward(bn_.backward(dropout_.backward(dy))));
  }

  void collect_params(std::vector<Tensor*>& out) {
    for (Tensor* p : dense_.params()) out.push_back(p);
    for (Tensor* p : bn_.params()) out.push_back(p);
  }
  void collect_stats(std::vector<Tensor*>& out) {
    for (Tensor* p : bn_.running_stats()) out.push_back(p);
  }

  DenseLayer& dense() { return dense_; }
  BatchNormLayer& bn() { return bn_; }

 private:
  DenseLayer dense_;
  ReluLayer relu_;
  BatchNormLayer bn_;
  DropoutLayer dropout_;
};

/// Feature generator: a BLSTM reads the spliced window, then a funnel of
/// hidden blocks maps its summary vector down to the shared embedding.
class Generator {
 public:
  Generator() = default;

  Generator(const ModelConfig& cfg, RngState& rng)
      : blstm_(cfg.input_dim, cfg.hidden, rng) {
    const std::size_t widths[] = {2 * cfg.hidden, 128, 64, cfg.embed_dim,
                                  cfg.embed_dim};
    for (std::size_t i = 0; i + 1 < 5; ++i) {
      blocks_.emplace_back(widths[i], widths[i + 1], cfg, rng);
    }
  }

  /// x: [batch x window x input_dim] -> embedding [batch x embed_dim].
  Tensor forward(const Tensor& x, Phase phase, RngState& rng) {
    Tensor h = blstm_.forward(x);
    for (auto& block : blocks_) h = block.forward(h, phase, rng);
    return h;
  }

  Tensor backward(const Tensor& dy) {
    Tensor d = dy;
    for (std::size_t i = blocks_.size(); i-- > 0;) d = blocks_[i].backward(d);
    return blstm_.backward(d);
  }

  std::vector<Tensor*> params() {
    std::vector<Tensor*> out = blstm_.params();
    for (auto& block : blocks_) block.collect_params(out);
    return out;
  }
  std::vector<Tensor*> running_stats() {
    std::vector<Tensor*> out;
    for (auto& block : blocks_) block.collect_stats(out);
    return out;
  }

  BlstmLayer& blstm() { return blstm_; }
  std::vector<HiddenBlock>& blocks() { return blocks_; }

 private:
  BlstmLayer blstm_;
  std::vector<HiddenBlock> blocks_;
};

/// Stack of embed-width hidden blocks topped by a two-unit logit head.
/// The head starts at zero so an untrained model emits exactly [0.5, 0.5].
class LogitHead {
 public:
  LogitHead() = default;

  LogitHead(std::size_t n_blocks, const ModelConfig& cfg, RngState& rng) {
    for (std::size_t i = 0; i < n_blocks; ++i) {
      blocks_.emplace_back(cfg.embed_dim, cfg.embed_dim, cfg, rng);
    }
    head_ = DenseLayer(cfg.embed_dim, 2, rng, /*zero_init=*/true);
  }

  Tensor forward(const Tensor& embedding, Phase phase, RngState& rng) {
    Tensor h = embedding;
    for (auto& block : blocks_) h = block.forward(h, phase, rng);
    return head_.forward(h);
  }

  Tensor backward(const Tensor& dlogits) {
    Tensor d = head_.backward(dlogits);
    for (std::size_t i = blocks_.size(); i-- > 0;) d = blocks_[i].backward(d);
    return d;
  }

  void collect_params(std::vector<Tensor*>& out) {
    for (auto& block : blocks_) block.collect_params(out);
    for (Tensor* p : head_.params()) out.push_back(p);
  }
  void collect_stats(std::vector<Tensor*>& out) {
    for (auto& block : blocks_) block.collect_stats(out);
  }

  DenseLayer& head() { return head_; }
  std::vector<HiddenBlock>& blocks() { return blocks_; }

 private:
  std::vector<HiddenBlock> blocks_;
  DenseLayer head_;
};

/// The three networks trained together. The discriminator exists only to
/// shape the generator during adaptation and is discarded at test time.
class ModelBundle {
 public:
  ModelBundle() = default;

  /// Layers draw their initial weights from `rng` in declared order, so a
  /// fixed seed reproduces the model bit for bit.
  ModelBundle(const ModelConfig& cfg, RngState& rng)
      : config_(cfg),
        generator_(cfg, rng),
        classifier_(2, cfg, rng),
        discriminator_(1, cfg, rng),
        reversal_(cfg.lambda) {
    cfg.validate();
  }

  const ModelConfig& config() const { return config_; }
  Generator& generator() { return generator_; }
  LogitHead& classifier() { return classifier_; }
  LogitHead& discriminator() { return discriminator_; }
  GradReversalLayer& reversal() { return reversal_; }

  /// Class posteriors for inference; dropout off, running statistics in.
  Tensor posteriors(const Tensor& x, RngState& rng) {
    Tensor e = generator_.forward(x, Phase::kEval, rng);
    return softmax(classifier_.forward(e, Phase::kEval, rng));
  }

  std::vector<Tensor*> task_params() {
    std::vector<Tensor*> out = generator_.params();
    classifier_.collect_params(out);
    return out;
  }
  std::vector<Tensor*> generator_params() { return generator_.params(); }
  std::vector<Tensor*> discriminator_params() {
    std::vector<Tensor*> out;
    discriminator_.collect_params(out);
    return out;
  }

  /// Every tensor that belongs in a checkpoint, in a fixed declared order:
  /// generator parameters, generator running stats, classifier parameters,
  /// classifier running stats, discriminator parameters, discriminator
  /// running stats.
  std::vector<Tensor*> state_tensors() {
    std::vector<Tensor*> out = generator_.params();
    for (Tensor* t : generator_.running_stats()) out.push_back(t);
    classifier_.collect_params(out);
    classifier_.collect_stats(out);
    discriminator_.collect_params(out);
    discriminator_.collect_stats(out);
    return out;
  }

 private:
  ModelConfig config_;
  Generator generator_;
  LogitHead classifier_;
  LogitHead discriminator_;
  GradReversalLayer reversal_;
};

}  // namespace dann
