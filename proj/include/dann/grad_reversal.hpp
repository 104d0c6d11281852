// dann/grad_reversal.hpp
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

#include "dann/error.hpp"
#include "dann/tensor.hpp"

namespace dann {

/// Identity in the forward pass, multiplies the gradient by -lambda in the
/// backward pass. Placed between an encoder and a domain classifier it makes
/// the encoder ascend the domain loss while the classifier descends it.
class GradReversalLayer {
 public:
  GradReversalLayer() = default;

  explicit GradReversalLayer(double lambda) : lambda_(lambda) {
    if (lambda < 0.0) {
      throw ConfigError("gradient reversal lambda must be >= 0, got " +
                        std::to_string(lambda));
    }
  }

  double lambda() const { return lambda_; }

  Tensor forward(const Tensor& x) const { return x; }

  Tensor backward(const Tensor& dy) const {
    Tensor dx = dy;
    for (double& v : dx.values()) v *= -lambda_;
    return dx;
  }

 private:
  double lambda_ = 1.0;
};

}  // namespace dann
