// dann/dropout.hpp
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
#include <string>
#include <vector>

#include "dann/error.hpp"
#include "dann/phase.hpp"
#include "dann/rng.hpp"
#include "dann/tensor.hpp"

namespace dann {

/// Inverted dropout: kept units are scaled by 1/(1-p) at train time so
/// evaluation is the plain identity. Phase::kEval must not consume any
/// random numbers, otherwise interleaving an evaluation into a training
/// run would shift every mask drawn afterwards.
class DropoutLayer {
 public:
  DropoutLayer() = default;

  explicit DropoutLayer(double p) : p_(p) {
    if (p < 0.0 || p >= 1.0) {
      throw ConfigError("dropout rate must be in [0, 1), got " +
                        std::to_string(p));
    }
  }

  double rate() const { return p_; }

  Tensor forward(const Tensor& x, Phase phase, RngState& rng) {
    if (!dropout_active(phase) || p_ == 0.0) {
      mask_.clear();
      return x;
    }
    const double keep = 1.0 - p_;
    const double scale = 1.0 / keep;
    mask_.assign(x.size(), 0.0);
    Tensor y = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (rng.bernoulli(keep)) {
        mask_[i] = scale;
        y.values()[i] *= scale;
      } else {
        y.values()[i] = 0.0;
      }
    }
    return y;
  }

  Tensor backward(const Tensor& dy) {
    if (mask_.empty()) return dy;  // last forward was a no-op
    if (dy.size() != mask_.size()) {
      throw StateError("dropout backward shape does not match last forward");
    }
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx.values()[i] *= mask_[i];
    return dx;
  }

 private:
  double p_ = 0.0;
  std::vector<double> mask_;
};

}  // namespace dann
