#pragma once

// Differentiable primitives. All are closed under differentiation: the
// backward of each op is expressed with ops from this file.

#include <cstdint>
#include <memory>
#include <vector>

#include "artk/autodiff.hpp"

namespace artk::ops {

// Elementwise; operands must have identical shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, Real s);
Var exp(const Var& a);
Var log(const Var& a);
Var abs(const Var& a);  // d|x|/dx at 0 is 0
Var relu(const Var& a);

Var reshape(const Var& a, Shape shape);

// Sum of all elements, rank-0 result.
Var sum(const Var& a);
// Rank-0 `s` broadcast to `shape`.
Var fill(const Var& s, Shape shape);

// View `a` as (outer, mid, inner) and contract the middle axis with
// `weights` (length mid; all ones when null). Result has shape `out_shape`
// with numel outer*inner.
using Weights = std::shared_ptr<const std::vector<Real>>;
Var reduce_mid(const Var& a, std::size_t outer, std::size_t mid, std::size_t inner,
               Shape out_shape, Weights weights = nullptr);
// Adjoint of reduce_mid: out[o, j, i] = w[j] * a[o, i].
Var expand_mid(const Var& a, std::size_t outer, std::size_t mid, std::size_t inner,
               Shape out_shape, Weights weights = nullptr);

// (N, F) -> (F)
Var sum_rows(const Var& a);
// (N, K) -> (N)
Var row_sum(const Var& a);
// (F) -> (N, F)
Var broadcast_rows(const Var& v, std::size_t n);
// (N) -> (N, K)
Var broadcast_cols(const Var& v, std::size_t k);

// 2-D matrix product with optional transposes.
Var matmul(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false);
// x (N, in), w (out, in), b (out) -> x w^T + b
Var dense(const Var& x, const Var& w, const Var& b);

// x (N, C, H, W), k (O, C, kh, kw); stride 1, zero padding `pad` on each side.
Var conv2d(const Var& x, const Var& k, std::size_t pad);
// Adjoints of conv2d with respect to x and k.
Var conv2d_input_grad(const Var& g, const Var& k, const Shape& x_shape, std::size_t pad);
Var conv2d_kernel_grad(const Var& x, const Var& g, const Shape& k_shape, std::size_t pad);
// (N, C, H, W) + b (C)
Var add_channel_bias(const Var& x, const Var& b);

// 2x2 window, stride 2, floor on odd sizes.
Var maxpool2x2(const Var& x);
using Indices = std::shared_ptr<const std::vector<std::uint32_t>>;
// out[i] = a[idx[i]]; a has shape `src_shape`.
Var gather(const Var& a, Indices idx, Shape out_shape);
// out = zeros(out_shape); out[idx[i]] += a[i].
Var scatter(const Var& a, Indices idx, Shape out_shape);

// Row-wise over the last axis of a (N, K) or (K) tensor.
Var softmax(const Var& z);
Var log_softmax(const Var& z);

// (N, K) -> (N): a[n, labels[n]].
Var pick(const Var& a, const std::vector<std::size_t>& labels);
// Per-row cross entropy -log softmax(z)[label], shape (N).
Var cross_entropy(const Var& logits, const std::vector<std::size_t>& labels);

}  // namespace artk::ops
