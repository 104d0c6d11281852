// dann/activations.hpp
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

/// Elementwise max(x, 0) with the usual subgradient relu'(0) = 0.
class ReluLayer {
 public:
  Tensor forward(const Tensor& x) {
    mask_.assign(x.size(), 0.0);
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y.values()[i] > 0.0) {
        mask_[i] = 1.0;
      } else {
        y.values()[i] = 0.0;
      }
    }
    return y;
  }

  Tensor backward(const Tensor& dy) {
    if (dy.size() != mask_.size()) {
      throw StateError("relu backward called with mismatched shape");
    }
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx.values()[i] *= mask_[i];
    return dx;
  }

 private:
  std::vector<double> mask_;
};

struct SoftmaxXent {
  double loss = 0.0;  // mean negative log-likelihood over the batch
  Tensor probs;       // [n x k] row-wise softmax
  Tensor dlogits;     // [n x k] gradient of the mean loss w.r.t. logits
};

/// Numerically stable softmax cross-entropy against integer labels.
/// Rows are shifted by their max before exponentiation, so large logits
/// cannot overflow. dlogits = (softmax - onehot) / n.
inline SoftmaxXent softmax_xent(const Tensor& logits,
                                const std::vector<int>& labels) {
  if (logits.rank() != 2) {
    throw DimensionError("softmax_xent expects rank-2 logits, got " +
                         logits.shape_string());
  }
  const std::size_t n = logits.rows(), k = logits.cols();
  if (labels.size() != n) {
    throw DimensionError("softmax_xent got " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " rows");
  }
  SoftmaxXent out;
  out.probs = Tensor({n, k});
  out.dlogits = Tensor({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw LabelError("label " + std::to_string(labels[i]) +
                       " outside [0, " + std::to_string(k) + ") at row " +
                       std::to_string(i));
    }
    const double* zi = logits.row_ptr(i);
    double zmax = zi[0];
    for (std::size_t j = 1; j < k; ++j) zmax = std::max(zmax, zi[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) denom += std::exp(zi[j] - zmax);
    const double log_denom = std::log(denom);
    for (std::size_t j = 0; j < k; ++j) {
      const double log_p = zi[j] - zmax - log_denom;
      const double p = std::exp(log_p);
      out.probs(i, j) = p;
      out.dlogits(i, j) = p / static_cast<double>(n);
      if (static_cast<std::size_t>(labels[i]) == j) {
        out.loss -= log_p;
        out.dlogits(i, j) -= 1.0 / static_cast<double>(n);
      }
    }
  }
  out.loss /= static_cast<double>(n);
  return out;
}

/// One-hot entry point. Each row must contain exactly one 1.0 and zeros
/// elsewhere; anything else is rejected rather than silently reweighted.
inline SoftmaxXent softmax_xent(const Tensor& logits, const Tensor& onehot) {
  if (onehot.rank() != 2 || !onehot.same_shape(logits)) {
    throw DimensionError("one-hot labels " + onehot.shape_string() +
                         " do not match logits " + logits.shape_string());
  }
  std::vector<int> labels(onehot.rows(), -1);
  for (std::size_t i = 0; i < onehot.rows(); ++i) {
    for (std::size_t j = 0; j < onehot.cols(); ++j) {
      const double v = onehot(i, j);
      if (v == 1.0) {
        if (labels[i] != -1) {
          throw LabelError("row " + std::to_string(i) +
                           " marks more than one class");
        }
        labels[i] = static_cast<int>(j);
      } else if (v != 0.0) {
        throw LabelError("row " + std::to_string(i) +
                         " is not one-hot (entry " + std::to_string(v) + ")");
      }
    }
    if (labels[i] == -1) {
      throw LabelError("row " + std::to_string(i) + " marks no class");
    }
  }
  return softmax_xent(logits, labels);
}

/// Softmax probabilities alone, for inference paths that never backprop.
inline Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw DimensionError("softmax expects rank-2 logits, got " +
                         logits.shape_string());
  }
  const std::size_t n = logits.rows(), k = logits.cols();
  Tensor probs({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    const double* zi = logits.row_ptr(i);
    double zmax = zi[0];
    for (std::size_t j = 1; j < k; ++j) zmax = std::max(zmax, zi[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) denom += std::exp(zi[j] - zmax);
    for (std::size_t j = 0; j < k; ++j) {
      probs(i, j) = std::exp(zi[j] - zmax) / denom;
    }
  }
  return probs;
}

}  // namespace dann
