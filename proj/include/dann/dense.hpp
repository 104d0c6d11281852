// dann/dense.hpp
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
#include "dann/rng.hpp"
#include "dann/tensor.hpp"

namespace dann {

/// Affine layer y = x W^T + b with W stored [out x in].
class DenseLayer {
 public:
  DenseLayer() = default;

  /// Hidden layers get Glorot-uniform weights; output heads that should
  /// start as exact uniform posteriors are zero initialized instead.
  DenseLayer(std::size_t in_dim, std::size_t out_dim, RngState& rng,
             bool zero_init = false)
      : w_(zero_init ? Tensor({out_dim, in_dim})
                     : xavier_init(out_dim, in_dim, rng)),
        b_(Tensor({out_dim})) {}

  std::size_t in_dim() const { return w_.cols(); }
  std::size_t out_dim() const { return w_.rows(); }

  Tensor forward(const Tensor& x) {
    if (x.rank() != 2 || x.cols() != in_dim()) {
      throw DimensionError("dense layer of input width " +
                           std::to_string(in_dim()) + " got " +
                           x.shape_string());
    }
    x_ = x;
    Tensor y = matmul_nt(x, w_);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double* yi = y.row_ptr(i);
      for (std::size_t j = 0; j < y.cols(); ++j) yi[j] += b_(j);
    }
    return y;
  }

  /// Accumulates dW and db into the parameter grad buffers and returns dx.
  Tensor backward(const Tensor& dy) {
    if (dy.rank() != 2 || dy.rows() != x_.rows() || dy.cols() != out_dim()) {
      throw StateError("dense backward shape does not match last forward");
    }
    matmul_tn_acc(dy, x_, w_.grad());
    auto& db = b_.grad();
    for (std::size_t i = 0; i < dy.rows(); ++i) {
      const double* di = dy.row_ptr(i);
      for (std::size_t j = 0; j < dy.cols(); ++j) db[j] += di[j];
    }
    return matmul(dy, w_);
  }

  std::vector<Tensor*> params() { return {&w_, &b_}; }

  Tensor& weight() { return w_; }
  Tensor& bias() { return b_; }
  const Tensor& weight() const { return w_; }
  const Tensor& bias() const { return b_; }

 private:
  Tensor w_;  // [out x in]
  Tensor b_;  // [out]
  Tensor x_;  // cached forward input
};

}  // namespace dann
