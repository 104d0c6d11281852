// dann/adam.hpp
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

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dann/error.hpp"
#include "dann/tensor.hpp"

namespace dann {

/// Adam with bias correction over an explicit parameter list. Each training
/// objective owns its own optimizer instance so moment estimates never leak
/// between objectives that update overlapping parameters.
class AdamOptimizer {
 public:
  AdamOptimizer() = default;

  explicit AdamOptimizer(std::vector<Tensor*> params, double lr = 0.001,
                         double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8)
      : params_(std::move(params)),
        lr_(lr),
        beta1_(beta1),
        beta2_(beta2),
        eps_(eps) {
    if (lr <= 0.0) throw ConfigError("adam learning rate must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
      throw ConfigError("adam betas must be in [0, 1)");
    }
    if (eps <= 0.0) throw ConfigError("adam epsilon must be positive");
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (std::size_t p = 0; p < params_.size(); ++p) {
      m_[p].assign(params_[p]->size(), 0.0);
      v_[p].assign(params_[p]->size(), 0.0);
    }
  }

  std::size_t step_count() const { return t_; }

  void zero_grads() {
    for (Tensor* p : params_) p->zero_grad();
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t p = 0; p < params_.size(); ++p) {
      Tensor& theta = *params_[p];
      const std::vector<double>& g = theta.grad();
      std::vector<double>& m = m_[p];
      std::vector<double>& v = v_[p];
      for (std::size_t i = 0; i < g.size(); ++i) {
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        theta.values()[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

 private:
  std::vector<Tensor*> params_;
  double lr_ = 0.001;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace dann
