// dann/batchnorm.hpp
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
#include "dann/phase.hpp"
#include "dann/tensor.hpp"

namespace dann {

/// Per-feature batch normalization over rank-2 activations [n x d].
///
/// Variance is biased (divide by n) both in normalization and in the
/// running estimate. Running stats follow
///   running = momentum * running + (1 - momentum) * batch
/// and are only touched in Phase::kTrain; kFrozen still normalizes with
/// batch statistics so a frozen subnetwork computes the same activations
/// as a training one, without mutating state.
class BatchNormLayer {
 public:
  BatchNormLayer() = default;

  explicit BatchNormLayer(std::size_t dim, double momentum = 0.9,
                          double eps = 1e-5)
      : momentum_(momentum),
        eps_(eps),
        gamma_(Tensor({dim})),
        beta_(Tensor({dim})),
        running_mean_(Tensor({dim})),
        running_var_(Tensor({dim})) {
    if (momentum < 0.0 || momentum >= 1.0) {
      throw ConfigError("batch norm momentum must be in [0, 1), got " +
                        std::to_string(momentum));
    }
    if (eps <= 0.0) {
      throw ConfigError("batch norm epsilon must be positive");
    }
    for (double& g : gamma_.values()) g = 1.0;
    for (double& v : running_var_.values()) v = 1.0;
  }

  std::size_t dim() const { return gamma_.size(); }

  Tensor forward(const Tensor& x, Phase phase) {
    if (x.rank() != 2 || x.cols() != dim()) {
      throw DimensionError("batch norm of width " + std::to_string(dim()) +
                           " got " + x.shape_string());
    }
    const std::size_t n = x.rows(), d = dim();
    Tensor y({n, d});
    if (uses_batch_stats(phase)) {
      if (n < 2) {
        throw DegenerateError(
            "batch norm needs at least 2 rows to estimate statistics, got " +
            std::to_string(n));
      }
      const MeanVar mv = reduce_mean_var(x);
      inv_std_.assign(d, 0.0);
      for (std::size_t j = 0; j < d; ++j) {
        inv_std_[j] = 1.0 / std::sqrt(mv.var(j) + eps_);
      }
      xhat_ = Tensor({n, d});
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          const double h = (x(i, j) - mv.mean(j)) * inv_std_[j];
          xhat_(i, j) = h;
          y(i, j) = gamma_(j) * h + beta_(j);
        }
      }
      if (updates_running_stats(phase)) {
        for (std::size_t j = 0; j < d; ++j) {
          running_mean_(j) =
              momentum_ * running_mean_(j) + (1.0 - momentum_) * mv.mean(j);
          running_var_(j) =
              momentum_ * running_var_(j) + (1.0 - momentum_) * mv.var(j);
        }
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          const double s = 1.0 / std::sqrt(running_var_(j) + eps_);
          y(i, j) = gamma_(j) * (x(i, j) - running_mean_(j)) * s + beta_(j);
        }
      }
    }
    return y;
  }

  /// Full Jacobian through the batch statistics:
  ///   dx = inv_std / n * (n dxhat - sum(dxhat) - xhat * sum(dxhat * xhat))
  Tensor backward(const Tensor& dy) {
    if (!dy.same_shape(xhat_)) {
      throw StateError("batch norm backward shape does not match forward");
    }
    const std::size_t n = dy.rows(), d = dy.cols();
    auto& dgamma = gamma_.grad();
    auto& dbeta = beta_.grad();
    std::vector<double> sum_dxhat(d, 0.0), sum_dxhat_xhat(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const double dxh = dy(i, j) * gamma_(j);
        dgamma[j] += dy(i, j) * xhat_(i, j);
        dbeta[j] += dy(i, j);
        sum_dxhat[j] += dxh;
        sum_dxhat_xhat[j] += dxh * xhat_(i, j);
      }
    }
    Tensor dx({n, d});
    const double nn = static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const double dxh = dy(i, j) * gamma_(j);
        dx(i, j) = inv_std_[j] / nn *
                   (nn * dxh - sum_dxhat[j] - xhat_(i, j) * sum_dxhat_xhat[j]);
      }
    }
    return dx;
  }

  std::vector<Tensor*> params() { return {&gamma_, &beta_}; }
  /// Non-trainable state persisted in checkpoints alongside parameters.
  std::vector<Tensor*> running_stats() {
    return {&running_mean_, &running_var_};
  }

  Tensor& gamma() { return gamma_; }
  Tensor& beta() { return beta_; }
  Tensor& running_mean() { return running_mean_; }
  Tensor& running_var() { return running_var_; }
  double momentum() const { return momentum_; }
  double eps() const { return eps_; }

 private:
  double momentum_ = 0.9;
  double eps_ = 1e-5;
  Tensor gamma_, beta_;
  Tensor running_mean_, running_var_;
  Tensor xhat_;
  std::vector<double> inv_std_;
};

}  // namespace dann
