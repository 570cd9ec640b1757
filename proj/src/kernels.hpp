#pragma once

// Raw array kernels behind the conv / matmul ops. Row-major everywhere.

#include <cstddef>

#include "artk/tensor.hpp"

namespace artk::kernels {

struct ConvGeometry {
  std::size_t n, c, h, w;  // input
  std::size_t o, kh, kw;   // kernel
  std::size_t pad;
  std::size_t out_h() const { return h + 2 * pad - kh + 1; }
  std::size_t out_w() const { return w + 2 * pad - kw + 1; }
};

// c = op(a) * op(b); a is (rows_a, cols_a) as stored.
void gemm(const Real* a, std::size_t rows_a, std::size_t cols_a, bool trans_a,
          const Real* b, std::size_t rows_b, std::size_t cols_b, bool trans_b, Real* c);

void conv_forward(const ConvGeometry& g, const Real* x, const Real* k, Real* out);
void conv_input_grad(const ConvGeometry& g, const Real* grad_out, const Real* k,
                     Real* grad_x);
void conv_kernel_grad(const ConvGeometry& g, const Real* x, const Real* grad_out,
                      Real* grad_k);

}  // namespace artk::kernels
