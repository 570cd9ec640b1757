#include "kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <vector>

namespace artk::kernels {

namespace {

using MatR = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const MatR>;
using Map = Eigen::Map<MatR>;

// cols is (c*kh*kw, out_h*out_w) for one image.
void im2col(const ConvGeometry& g, const Real* img, Real* cols) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  for (std::size_t c = 0; c < g.c; ++c) {
    const Real* plane = img + c * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        Real* row = cols + ((c * g.kh + i) * g.kw + j) * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + i) - pad;
          Real* dst = row + y * ow;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(dst, dst + ow, Real(0));
            continue;
          }
          const Real* src = plane + static_cast<std::size_t>(sy) * g.w;
          for (std::size_t x = 0; x < ow; ++x) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + j) - pad;
            dst[x] = (sx < 0 || sx >= static_cast<std::ptrdiff_t>(g.w))
                         ? Real(0)
                         : src[static_cast<std::size_t>(sx)];
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const Real* cols, Real* img) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  for (std::size_t c = 0; c < g.c; ++c) {
    Real* plane = img + c * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const Real* row = cols + ((c * g.kh + i) * g.kw + j) * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + i) - pad;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          Real* dst = plane + static_cast<std::size_t>(sy) * g.w;
          const Real* src = row + y * ow;
          for (std::size_t x = 0; x < ow; ++x) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + j) - pad;
            if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(g.w)) {
              dst[static_cast<std::size_t>(sx)] += src[x];
            }
          }
        }
      }
    }
  }
}

}  // namespace

void gemm(const Real* a, std::size_t rows_a, std::size_t cols_a, bool trans_a,
          const Real* b, std::size_t rows_b, std::size_t cols_b, bool trans_b, Real* c) {
  ConstMap ma(a, static_cast<Eigen::Index>(rows_a), static_cast<Eigen::Index>(cols_a));
  ConstMap mb(b, static_cast<Eigen::Index>(rows_b), static_cast<Eigen::Index>(cols_b));
  const auto m = static_cast<Eigen::Index>(trans_a ? cols_a : rows_a);
  const auto n = static_cast<Eigen::Index>(trans_b ? rows_b : cols_b);
  Map mc(c, m, n);
  if (!trans_a && !trans_b) {
    mc.noalias() = ma * mb;
  } else if (trans_a && !trans_b) {
    mc.noalias() = ma.transpose() * mb;
  } else if (!trans_a && trans_b) {
    mc.noalias() = ma * mb.transpose();
  } else {
    mc.noalias() = ma.transpose() * mb.transpose();
  }
}

void conv_forward(const ConvGeometry& g, const Real* x, const Real* k, Real* out) {
  const std::size_t ckk = g.c * g.kh * g.kw, hw = g.out_h() * g.out_w();
  std::vector<Real> cols(ckk * hw);
  ConstMap mk(k, static_cast<Eigen::Index>(g.o), static_cast<Eigen::Index>(ckk));
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col(g, x + n * g.c * g.h * g.w, cols.data());
    ConstMap mc(cols.data(), static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(hw));
    Map mo(out + n * g.o * hw, static_cast<Eigen::Index>(g.o), static_cast<Eigen::Index>(hw));
    mo.noalias() = mk * mc;
  }
}

void conv_input_grad(const ConvGeometry& g, const Real* grad_out, const Real* k,
                     Real* grad_x) {
  const std::size_t ckk = g.c * g.kh * g.kw, hw = g.out_h() * g.out_w();
  std::vector<Real> cols(ckk * hw);
  ConstMap mk(k, static_cast<Eigen::Index>(g.o), static_cast<Eigen::Index>(ckk));
  std::fill(grad_x, grad_x + g.n * g.c * g.h * g.w, Real(0));
  for (std::size_t n = 0; n < g.n; ++n) {
    ConstMap mg(grad_out + n * g.o * hw, static_cast<Eigen::Index>(g.o),
                static_cast<Eigen::Index>(hw));
    Map mc(cols.data(), static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(hw));
    mc.noalias() = mk.transpose() * mg;
    col2im_add(g, cols.data(), grad_x + n * g.c * g.h * g.w);
  }
}

void conv_kernel_grad(const ConvGeometry& g, const Real* x, const Real* grad_out,
                      Real* grad_k) {
  const std::size_t ckk = g.c * g.kh * g.kw, hw = g.out_h() * g.out_w();
  std::vector<Real> cols(ckk * hw);
  Map mk(grad_k, static_cast<Eigen::Index>(g.o), static_cast<Eigen::Index>(ckk));
  mk.setZero();
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col(g, x + n * g.c * g.h * g.w, cols.data());
    ConstMap mc(cols.data(), static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(hw));
    ConstMap mg(grad_out + n * g.o * hw, static_cast<Eigen::Index>(g.o),
                static_cast<Eigen::Index>(hw));
    mk.noalias() += mg * mc.transpose();
  }
}

}  // namespace artk::kernels
