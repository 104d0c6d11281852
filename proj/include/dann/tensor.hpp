// dann/tensor.hpp
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
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dann/error.hpp"
#include "dann/rng.hpp"

namespace dann {

/// Dense row-major array of doubles, rank 1 to 3, with an optional
/// same-shape gradient buffer. This is the value currency of the whole
/// library; layers own their backward formulas, the tensor only stores.
class Tensor {
 public:
  Tensor() = default;

  /// Zero-filled tensor of the given shape.
  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(checked_size(shape_), 0.0) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    if (checked_size(shape_) != data_.size()) {
      throw DimensionError("value count " + std::to_string(data_.size()) +
                           " does not fill shape " + shape_string());
    }
  }

  std::size_t rank() const { return shape_.size(); }
  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t extent(std::size_t axis) const {
    return axis < shape_.size() ? shape_[axis] : 1;
  }
  // Rank-2 conveniences; a rank-1 tensor reads as a single row.
  std::size_t rows() const { return rank() <= 1 ? 1 : shape_[0]; }
  std::size_t cols() const {
    return rank() == 0 ? 0 : shape_[rank() == 1 ? 0 : 1];
  }

  double& operator()(std::size_t i) { return data_[i]; }
  double operator()(std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols() + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols() + j];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  double* row_ptr(std::size_t i) { return data_.data() + i * cols(); }
  const double* row_ptr(std::size_t i) const {
    return data_.data() + i * cols();
  }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  // --- gradient buffer -------------------------------------------------
  bool has_grad() const { return !grad_.empty(); }
  std::vector<double>& grad() {
    if (grad_.empty()) grad_.assign(data_.size(), 0.0);
    return grad_;
  }
  const std::vector<double>& grad() const {
    if (grad_.size() != data_.size()) {
      throw StateError("gradient requested before backward populated it");
    }
    return grad_;
  }
  void zero_grad() { grad_.assign(data_.size(), 0.0); }
  void drop_grad() { grad_.clear(); }

  std::string shape_string() const {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) out << 'x';
      out << shape_[i];
    }
    out << ']';
    return out.str();
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  static std::size_t checked_size(const std::vector<std::size_t>& shape) {
    if (shape.empty() || shape.size() > 3) {
      throw DimensionError("tensor rank must be 1..3, got " +
                           std::to_string(shape.size()));
    }
    std::size_t n = 1;
    for (std::size_t e : shape) {
      if (e == 0) throw DimensionError("tensor extents must be positive");
      n *= e;
    }
    return n;
  }

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
  mutable std::vector<double> grad_;
};

namespace detail {

inline void require_matrix(const Tensor& t, const char* who) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(who) + " expects a rank-2 tensor, got " +
                         t.shape_string());
  }
}

}  // namespace detail

/// c = a * b for a [m x k], b [k x n].
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_matrix(a, "matmul");
  detail::require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul inner extents differ: " + a.shape_string() +
                         " vs " + b.shape_string());
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c.row_ptr(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      const double* bp = b.row_ptr(p);
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
  return c;
}

/// c = a * b^T for a [m x k], b [n x k]. Row-by-row dot products, the layout
/// both dense forward (x W^T) and recurrent gate evaluation want.
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  detail::require_matrix(a, "matmul_nt");
  detail::require_matrix(b, "matmul_nt");
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt inner extents differ: " +
                         a.shape_string() + " vs " + b.shape_string());
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a.row_ptr(i);
    double* ci = c.row_ptr(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b.row_ptr(j);
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = acc;
    }
  }
  return c;
}

/// acc += a^T * b for a [k x m], b [k x n]; used for weight gradients
/// (dW = dy^T x) where accumulation across timesteps is needed.
inline void matmul_tn_acc(const Tensor& a, const Tensor& b,
                          std::vector<double>& acc) {
  detail::require_matrix(a, "matmul_tn");
  detail::require_matrix(b, "matmul_tn");
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn outer extents differ: " +
                         a.shape_string() + " vs " + b.shape_string());
  }
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  if (acc.size() != m * n) {
    throw DimensionError("matmul_tn accumulator has wrong size");
  }
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a.row_ptr(p);
    const double* bp = b.row_ptr(p);
    for (std::size_t i = 0; i < m; ++i) {
      const double api = ap[i];
      double* ci = acc.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  Tensor c({a.cols(), b.cols()});
  matmul_tn_acc(a, b, c.values());
  return c;
}

inline Tensor transpose(const Tensor& a) {
  detail::require_matrix(a, "transpose");
  Tensor t({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

/// Glorot-uniform matrix: entries uniform in +-sqrt(6 / (rows + cols)).
inline Tensor xavier_init(std::size_t rows, std::size_t cols, RngState& rng) {
  if (rows == 0 || cols == 0) {
    throw DimensionError("xavier_init extents must be positive, got " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
  const double bound =
      std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor w({rows, cols});
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
  return w;
}

struct MeanVar {
  Tensor mean;  // [d]
  Tensor var;   // [d], biased (divide by n)
};

/// Column-wise mean and biased variance of a [n x d] matrix. Biased variance
/// matches the batch-norm convention and is used consistently by CMVN too.
inline MeanVar reduce_mean_var(const Tensor& x) {
  detail::require_matrix(x, "reduce_mean_var");
  const std::size_t n = x.rows(), d = x.cols();
  MeanVar out{Tensor({d}), Tensor({d})};
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.row_ptr(i);
    for (std::size_t j = 0; j < d; ++j) out.mean(j) += xi[j];
  }
  for (std::size_t j = 0; j < d; ++j) out.mean(j) /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.row_ptr(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double c = xi[j] - out.mean(j);
      out.var(j) += c * c;
    }
  }
  for (std::size_t j = 0; j < d; ++j) out.var(j) /= static_cast<double>(n);
  return out;
}

}  // namespace dann
