// dann/blstm.hpp
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
#include "dann/rng.hpp"
#include "dann/tensor.hpp"

namespace dann {

/// Bidirectional LSTM that reads a whole sequence and emits one vector:
/// the concatenation of the forward direction's final hidden state and the
/// backward direction's final hidden state, so the output width is 2H.
///
/// Cell equations (no peepholes), gate blocks ordered i, f, g, o along the
/// 4H axis:
///   z   = W x_t + U h_{t-1} + b
///   i,f,o = sigmoid(z_i), sigmoid(z_f), sigmoid(z_o);  g = tanh(z_g)
///   c_t = f * c_{t-1} + i * g
///   h_t = o * tanh(c_t)
///
/// The backward pass is exact BPTT. Because the layer output is only the
/// final hidden state of each direction, the upstream gradient enters the
/// recurrence once, at that final step.
class BlstmLayer {
 public:
  BlstmLayer() = default;

  BlstmLayer(std::size_t in_dim, std::size_t hidden, RngState& rng)
      : in_dim_(in_dim), hidden_(hidden) {
    if (in_dim == 0 || hidden == 0) {
      throw DimensionError("blstm dimensions must be positive");
    }
    for (Direction* d : {&fwd_, &bwd_}) {
      d->w = xavier_init(4 * hidden, in_dim, rng);
      d->u = xavier_init(4 * hidden, hidden, rng);
      d->b = Tensor({4 * hidden});
    }
  }

  std::size_t in_dim() const { return in_dim_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t out_dim() const { return 2 * hidden_; }

  /// x: [batch x T x in_dim] -> [batch x 2H].
  Tensor forward(const Tensor& x) {
    if (x.rank() != 3 || x.extent(2) != in_dim_) {
      throw DimensionError("blstm with input width " +
                           std::to_string(in_dim_) + " got " +
                           x.shape_string());
    }
    batch_ = x.extent(0);
    steps_ = x.extent(1);
    slice_inputs(x);
    run_direction(fwd_, /*reversed=*/false);
    run_direction(bwd_, /*reversed=*/true);
    Tensor y({batch_, 2 * hidden_});
    const Tensor& hf = fwd_.h.back();
    const Tensor& hb = bwd_.h.back();
    for (std::size_t i = 0; i < batch_; ++i) {
      for (std::size_t j = 0; j < hidden_; ++j) {
        y(i, j) = hf(i, j);
        y(i, hidden_ + j) = hb(i, j);
      }
    }
    return y;
  }

  /// dy: [batch x 2H] -> dx: [batch x T x in_dim]. Parameter gradients
  /// accumulate into the weight grad buffers.
  Tensor backward(const Tensor& dy) {
    if (dy.rank() != 2 || dy.rows() != batch_ || dy.cols() != 2 * hidden_) {
      throw StateError("blstm backward shape does not match last forward");
    }
    Tensor dx({batch_, steps_, in_dim_});
    Tensor dhf({batch_, hidden_}), dhb({batch_, hidden_});
    for (std::size_t i = 0; i < batch_; ++i) {
      for (std::size_t j = 0; j < hidden_; ++j) {
        dhf(i, j) = dy(i, j);
        dhb(i, j) = dy(i, hidden_ + j);
      }
    }
    backprop_direction(fwd_, /*reversed=*/false, dhf, dx);
    backprop_direction(bwd_, /*reversed=*/true, dhb, dx);
    return dx;
  }

  /// Convenience wrappers for a single [T x in_dim] sequence.
  Tensor forward_single(const Tensor& x) {
    if (x.rank() != 2) {
      throw DimensionError("forward_single expects a rank-2 sequence");
    }
    Tensor batched({1, x.rows(), x.cols()}, x.values());
    Tensor y = forward(batched);
    return Tensor({y.cols()}, y.values());
  }

  std::vector<Tensor*> params() {
    return {&fwd_.w, &fwd_.u, &fwd_.b, &bwd_.w, &bwd_.u, &bwd_.b};
  }

 private:
  struct Direction {
    Tensor w;  // [4H x D]
    Tensor u;  // [4H x H]
    Tensor b;  // [4H]
    std::vector<Tensor> gates;  // per step, [B x 4H] post-nonlinearity
    std::vector<Tensor> c;      // per step, [B x H]
    std::vector<Tensor> h;      // per step, [B x H]
  };

  static double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  }

  void slice_inputs(const Tensor& x) {
    xt_.assign(steps_, Tensor());
    for (std::size_t t = 0; t < steps_; ++t) {
      Tensor slab({batch_, in_dim_});
      for (std::size_t i = 0; i < batch_; ++i) {
        for (std::size_t j = 0; j < in_dim_; ++j) slab(i, j) = x(i, t, j);
      }
      xt_[t] = std::move(slab);
    }
  }

  // Processing order: step s reads input position t = s (forward) or
  // t = T-1-s (backward). Caches are indexed by s.
  void run_direction(Direction& d, bool reversed) {
    const std::size_t H = hidden_;
    d.gates.assign(steps_, Tensor());
    d.c.assign(steps_, Tensor());
    d.h.assign(steps_, Tensor());
    Tensor h_prev({batch_, H}), c_prev({batch_, H});
    for (std::size_t s = 0; s < steps_; ++s) {
      const std::size_t t = reversed ? steps_ - 1 - s : s;
      Tensor z = matmul_nt(xt_[t], d.w);
      Tensor zu = matmul_nt(h_prev, d.u);
      for (std::size_t i = 0; i < batch_; ++i) {
        double* zi = z.row_ptr(i);
        const double* zui = zu.row_ptr(i);
        for (std::size_t j = 0; j < 4 * H; ++j) zi[j] += zui[j] + d.b(j);
      }
      Tensor c({batch_, H}), h({batch_, H});
      for (std::size_t i = 0; i < batch_; ++i) {
        double* zi = z.row_ptr(i);
        for (std::size_t j = 0; j < H; ++j) {
          const double ig = sigmoid(zi[j]);
          const double fg = sigmoid(zi[H + j]);
          const double gg = std::tanh(zi[2 * H + j]);
          const double og = sigmoid(zi[3 * H + j]);
          zi[j] = ig;
          zi[H + j] = fg;
          zi[2 * H + j] = gg;
          zi[3 * H + j] = og;
          const double cv = fg * c_prev(i, j) + ig * gg;
          c(i, j) = cv;
          h(i, j) = og * std::tanh(cv);
        }
      }
      d.gates[s] = std::move(z);
      d.c[s] = c;
      d.h[s] = h;
      c_prev = std::move(c);
      h_prev = std::move(h);
    }
  }

  void backprop_direction(Direction& d, bool reversed, const Tensor& dy,
                          Tensor& dx) {
    const std::size_t H = hidden_;
    Tensor dh = dy;
    Tensor dc({batch_, H});
    const Tensor zero({batch_, H});
    for (std::size_t s = steps_; s-- > 0;) {
      const std::size_t t = reversed ? steps_ - 1 - s : s;
      const Tensor& gates = d.gates[s];
      const Tensor& c_prev = s == 0 ? zero : d.c[s - 1];
      const Tensor& h_prev = s == 0 ? zero : d.h[s - 1];
      Tensor dz({batch_, 4 * H});
      for (std::size_t i = 0; i < batch_; ++i) {
        const double* gi = gates.row_ptr(i);
        double* dzi = dz.row_ptr(i);
        for (std::size_t j = 0; j < H; ++j) {
          const double ig = gi[j], fg = gi[H + j];
          const double gg = gi[2 * H + j], og = gi[3 * H + j];
          const double tc = std::tanh(d.c[s](i, j));
          const double dcv = dc(i, j) + dh(i, j) * og * (1.0 - tc * tc);
          dzi[j] = dcv * gg * ig * (1.0 - ig);
          dzi[H + j] = dcv * c_prev(i, j) * fg * (1.0 - fg);
          dzi[2 * H + j] = dcv * ig * (1.0 - gg * gg);
          dzi[3 * H + j] = dh(i, j) * tc * og * (1.0 - og);
          dc(i, j) = dcv * fg;
        }
      }
      matmul_tn_acc(dz, xt_[t], d.w.grad());
      matmul_tn_acc(dz, h_prev, d.u.grad());
      auto& db = d.b.grad();
      for (std::size_t i = 0; i < batch_; ++i) {
        const double* dzi = dz.row_ptr(i);
        for (std::size_t j = 0; j < 4 * H; ++j) db[j] += dzi[j];
      }
      Tensor dxt = matmul(dz, d.w);
      for (std::size_t i = 0; i < batch_; ++i) {
        for (std::size_t j = 0; j < in_dim_; ++j) dx(i, t, j) += dxt(i, j);
      }
      dh = matmul(dz, d.u);
    }
  }

  std::size_t in_dim_ = 0;
  std::size_t hidden_ = 0;
  std::size_t batch_ = 0;
  std::size_t steps_ = 0;
  Direction fwd_, bwd_;
  std::vector<Tensor> xt_;  // per time index, [B x D]
};

}  // namespace dann
