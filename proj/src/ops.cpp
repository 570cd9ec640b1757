#include "artk/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "artk/errors.hpp"
#include "kernels.hpp"

namespace artk::ops {

namespace {

const Var& input(const Var& self, std::size_t i) { return self.node()->inputs[i]; }
bool wants(const Var& self, std::size_t i) { return input(self, i).requires_grad(); }

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw ContractViolation(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                            " vs " + shape_str(b.shape()));
  }
}

void require_rank(const char* op, const Var& a, std::size_t rank) {
  if (a.shape().size() != rank) {
    throw ContractViolation(std::string(op) + ": expected rank " + std::to_string(rank) +
                            ", got " + shape_str(a.shape()));
  }
}

template <class F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  const Real* pa = a.ptr();
  Real* po = out.ptr();
  for (std::size_t i = 0; i < a.size(); ++i) po[i] = f(pa[i]);
  return out;
}

template <class F>
Tensor map_binary(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.shape());
  const Real* pa = a.ptr();
  const Real* pb = b.ptr();
  Real* po = out.ptr();
  for (std::size_t i = 0; i < a.size(); ++i) po[i] = f(pa[i], pb[i]);
  return out;
}

Var reciprocal(const Var& a) {
  return record("reciprocal", map_unary(a.value(), [](Real v) { return Real(1) / v; }), {a},
                [](const Var& self, const Var& g) -> std::vector<Var> {
                  return {neg(mul(g, mul(self, self)))};
                });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  return record("add", map_binary(a.value(), b.value(), std::plus<>()), {a, b},
                [](const Var& self, const Var& g) -> std::vector<Var> {
                  return {wants(self, 0) ? g : Var(), wants(self, 1) ? g : Var()};
                });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  return record("sub", map_binary(a.value(), b.value(), std::minus<>()), {a, b},
                [](const Var& self, const Var& g) -> std::vector<Var> {
                  return {wants(self, 0) ? g : Var(), wants(self, 1) ? neg(g) : Var()};
                });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  return record("mul", map_binary(a.value(), b.value(), std::multiplies<>()), {a, b},
                [](const Var& self, const Var& g) -> std::vector<Var> {
                  return {wants(self, 0) ? mul(g, input(self, 1)) : Var(),
                          wants(self, 1) ? mul(g, input(self, 0)) : Var()};
                });
}

Var neg(const Var& a) {
  return record("neg", map_unary(a.value(), [](Real v) { return -v; }), {a},
                [](const Var&, const Var& g) -> std::vector<Var> { return {neg(g)}; });
}

Var scale(const Var& a, Real s) {
  return record("scale", map_unary(a.value(), [s](Real v) { return v * s; }), {a},
                [s](const Var&, const Var& g) -> std::vector<Var> { return {scale(g, s)}; });
}

Var exp(const Var& a) {
  return record("exp", map_unary(a.value(), [](Real v) { return std::exp(v); }), {a},
                [](const Var& self, const Var& g) -> std::vector<Var> {
                  return {mul(g, self)};
                });
}

Var log(const Var& a) {
  for (Real v : a.value().data()) {
    if (!(v > Real(0))) throw NumericError("log", "argument not positive");
  }
  return record("log", map_unary(a.value(), [](Real v) { return std::log(v); }), {a},
                [](const Var& self, const Var& g) -> std::vector<Var> {
                  return {mul(g, reciprocal(input(self, 0)))};
                });
}

Var abs(const Var& a) {
  return record("abs", map_unary(a.value(), [](Real v) { return std::abs(v); }), {a},
                [](const Var& self, const Var& g) -> std::vector<Var> {
                  Var sign(map_unary(input(self, 0).value(), [](Real v) {
                    return Real((v > 0) - (v < 0));
                  }));
                  return {mul(g, sign)};
                });
}

Var relu(const Var& a) {
  return record("relu", map_unary(a.value(), [](Real v) { return v > 0 ? v : Real(0); }),
                {a}, [](const Var& self, const Var& g) -> std::vector<Var> {
                  Var mask(map_unary(input(self, 0).value(),
                                     [](Real v) { return v > 0 ? Real(1) : Real(0); }));
                  return {mul(g, mask)};
                });
}

Var reshape(const Var& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw ContractViolation("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  return record("reshape", a.value().reshaped(std::move(shape)), {a},
                [](const Var& self, const Var& g) -> std::vector<Var> {
                  return {reshape(g, input(self, 0).shape())};
                });
}

Var sum(const Var& a) {
  Real s = 0;
  for (Real v : a.value().data()) s += v;
  return record("sum", Tensor::scalar(s), {a},
                [](const Var& self, const Var& g) -> std::vector<Var> {
                  return {fill(g, input(self, 0).shape())};
                });
}

Var fill(const Var& s, Shape shape) {
  if (s.size() != 1) throw ContractViolation("fill: source must be a single element");
  return record("fill", Tensor(std::move(shape), s.value()[0]), {s},
                [](const Var& self, const Var& g) -> std::vector<Var> {
                  return {reshape(sum(g), input(self, 0).shape())};
                });
}

Var reduce_mid(const Var& a, std::size_t outer, std::size_t mid, std::size_t inner,
               Shape out_shape, Weights weights) {
  if (outer * mid * inner != a.size() || numel(out_shape) != outer * inner ||
      (weights && weights->size() != mid)) {
    throw ContractViolation("reduce_mid: view does not match " + shape_str(a.shape()));
  }
  Tensor out(out_shape);
  const Real* pa = a.value().ptr();
  Real* po = out.ptr();
  for (std::size_t o = 0; o < outer; ++o) {
    Real* dst = po + o * inner;
    for (std::size_t j = 0; j < mid; ++j) {
      const Real w = weights ? (*weights)[j] : Real(1);
      const Real* src = pa + (o * mid + j) * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += w * src[i];
    }
  }
  Shape in_shape = a.shape();
  return record("reduce_mid", std::move(out), {a},
                [=](const Var&, const Var& g) -> std::vector<Var> {
                  return {expand_mid(g, outer, mid, inner, in_shape, weights)};
                });
}

Var expand_mid(const Var& a, std::size_t outer, std::size_t mid, std::size_t inner,
               Shape out_shape, Weights weights) {
  if (outer * inner != a.size() || numel(out_shape) != outer * mid * inner ||
      (weights && weights->size() != mid)) {
    throw ContractViolation("expand_mid: view does not match " + shape_str(a.shape()));
  }
  Tensor out(out_shape);
  const Real* pa = a.value().ptr();
  Real* po = out.ptr();
  for (std::size_t o = 0; o < outer; ++o) {
    const Real* src = pa + o * inner;
    for (std::size_t j = 0; j < mid; ++j) {
      const Real w = weights ? (*weights)[j] : Real(1);
      Real* dst = po + (o * mid + j) * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] = w * src[i];
    }
  }
  Shape in_shape = a.shape();
  return record("expand_mid", std::move(out), {a},
                [=](const Var&, const Var& g) -> std::vector<Var> {
                  return {reduce_mid(g, outer, mid, inner, in_shape, weights)};
                });
}

Var sum_rows(const Var& a) {
  require_rank("sum_rows", a, 2);
  return reduce_mid(a, 1, a.shape()[0], a.shape()[1], {a.shape()[1]});
}

Var row_sum(const Var& a) {
  require_rank("row_sum", a, 2);
  return reduce_mid(a, a.shape()[0], a.shape()[1], 1, {a.shape()[0]});
}

Var broadcast_rows(const Var& v, std::size_t n) {
  require_rank("broadcast_rows", v, 1);
  return expand_mid(v, 1, n, v.shape()[0], {n, v.shape()[0]});
}

Var broadcast_cols(const Var& v, std::size_t k) {
  require_rank("broadcast_cols", v, 1);
  return expand_mid(v, v.shape()[0], k, 1, {v.shape()[0], k});
}

Var matmul(const Var& a, const Var& b, bool trans_a, bool trans_b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = trans_a ? a.shape()[1] : a.shape()[0];
  const std::size_t ka = trans_a ? a.shape()[0] : a.shape()[1];
  const std::size_t kb = trans_b ? b.shape()[1] : b.shape()[0];
  const std::size_t n = trans_b ? b.shape()[0] : b.shape()[1];
  if (ka != kb) {
    throw ContractViolation("matmul: inner dimensions differ " + shape_str(a.shape()) +
                            " x " + shape_str(b.shape()));
  }
  Tensor out({m, n});
  kernels::gemm(a.value().ptr(), a.shape()[0], a.shape()[1], trans_a, b.value().ptr(),
                b.shape()[0], b.shape()[1], trans_b, out.ptr());
  return record("matmul", std::move(out), {a, b},
                [trans_a, trans_b](const Var& self, const Var& g) -> std::vector<Var> {
                  const Var& x = input(self, 0);
                  const Var& y = input(self, 1);
                  Var da, db;
                  if (!trans_a && !trans_b) {
                    if (wants(self, 0)) da = matmul(g, y, false, true);
                    if (wants(self, 1)) db = matmul(x, g, true, false);
                  } else if (trans_a && !trans_b) {
                    if (wants(self, 0)) da = matmul(y, g, false, true);
                    if (wants(self, 1)) db = matmul(x, g, false, false);
                  } else if (!trans_a && trans_b) {
                    if (wants(self, 0)) da = matmul(g, y, false, false);
                    if (wants(self, 1)) db = matmul(g, x, true, false);
                  } else {
                    if (wants(self, 0)) da = matmul(y, g, true, true);
                    if (wants(self, 1)) db = matmul(g, x, true, true);
                  }
                  return {da, db};
                });
}

Var dense(const Var& x, const Var& w, const Var& b) {
  require_rank("dense", x, 2);
  require_rank("dense", b, 1);
  return add(matmul(x, w, false, true), broadcast_rows(b, x.shape()[0]));
}

namespace {

kernels::ConvGeometry conv_geometry(const Shape& x, const Shape& k, std::size_t pad) {
  if (x.size() != 4 || k.size() != 4 || x[1] != k[1]) {
    throw ContractViolation("conv2d: incompatible input " + shape_str(x) + " and kernel " +
                            shape_str(k));
  }
  if (x[2] + 2 * pad < k[2] || x[3] + 2 * pad < k[3]) {
    throw ContractViolation("conv2d: kernel larger than padded input");
  }
  return {x[0], x[1], x[2], x[3], k[0], k[2], k[3], pad};
}

}  // namespace

Var conv2d(const Var& x, const Var& k, std::size_t pad) {
  const auto geo = conv_geometry(x.shape(), k.shape(), pad);
  Tensor out({geo.n, geo.o, geo.out_h(), geo.out_w()});
  kernels::conv_forward(geo, x.value().ptr(), k.value().ptr(), out.ptr());
  return record("conv2d", std::move(out), {x, k},
                [pad](const Var& self, const Var& g) -> std::vector<Var> {
                  const Var& in = input(self, 0);
                  const Var& ker = input(self, 1);
                  return {wants(self, 0) ? conv2d_input_grad(g, ker, in.shape(), pad) : Var(),
                          wants(self, 1) ? conv2d_kernel_grad(in, g, ker.shape(), pad)
                                         : Var()};
                });
}

Var conv2d_input_grad(const Var& g, const Var& k, const Shape& x_shape, std::size_t pad) {
  const auto geo = conv_geometry(x_shape, k.shape(), pad);
  if (g.shape() != Shape{geo.n, geo.o, geo.out_h(), geo.out_w()}) {
    throw ContractViolation("conv2d_input_grad: bad upstream shape " + shape_str(g.shape()));
  }
  Tensor out(x_shape);
  kernels::conv_input_grad(geo, g.value().ptr(), k.value().ptr(), out.ptr());
  return record("conv2d_input_grad", std::move(out), {g, k},
                [pad](const Var& self, const Var& h) -> std::vector<Var> {
                  const Var& up = input(self, 0);
                  const Var& ker = input(self, 1);
                  return {wants(self, 0) ? conv2d(h, ker, pad) : Var(),
                          wants(self, 1) ? conv2d_kernel_grad(h, up, ker.shape(), pad)
                                         : Var()};
                });
}

Var conv2d_kernel_grad(const Var& x, const Var& g, const Shape& k_shape, std::size_t pad) {
  const auto geo = conv_geometry(x.shape(), k_shape, pad);
  if (g.shape() != Shape{geo.n, geo.o, geo.out_h(), geo.out_w()}) {
    throw ContractViolation("conv2d_kernel_grad: bad upstream shape " + shape_str(g.shape()));
  }
  Tensor out(k_shape);
  kernels::conv_kernel_grad(geo, x.value().ptr(), g.value().ptr(), out.ptr());
  return record("conv2d_kernel_grad", std::move(out), {x, g},
                [pad](const Var& self, const Var& h) -> std::vector<Var> {
                  const Var& in = input(self, 0);
                  const Var& up = input(self, 1);
                  return {wants(self, 0) ? conv2d_input_grad(up, h, in.shape(), pad) : Var(),
                          wants(self, 1) ? conv2d(in, h, pad) : Var()};
                });
}

Var add_channel_bias(const Var& x, const Var& b) {
  require_rank("add_channel_bias", x, 4);
  require_rank("add_channel_bias", b, 1);
  const auto& s = x.shape();
  if (b.shape()[0] != s[1]) {
    throw ContractViolation("add_channel_bias: " + shape_str(b.shape()) + " vs " +
                            shape_str(s));
  }
  const std::size_t hw = s[2] * s[3];
  Var plane = expand_mid(b, s[1], hw, 1, {s[1], hw});
  return add(x, expand_mid(plane, 1, s[0], s[1] * hw, s));
}

Var maxpool2x2(const Var& x) {
  require_rank("maxpool2x2", x, 4);
  const auto& s = x.shape();
  const std::size_t oh = s[2] / 2, ow = s[3] / 2;
  if (oh == 0 || ow == 0) throw ContractViolation("maxpool2x2: input smaller than 2x2");
  Tensor out({s[0], s[1], oh, ow});
  auto idx = std::make_shared<std::vector<std::uint32_t>>(out.size());
  const Real* px = x.value().ptr();
  std::size_t o = 0;
  for (std::size_t p = 0; p < s[0] * s[1]; ++p) {
    const std::size_t base = p * s[2] * s[3];
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xx = 0; xx < ow; ++xx, ++o) {
        std::size_t best = base + 2 * y * s[3] + 2 * xx;
        // Row-major scan with strict '>' keeps the first maximum.
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t i = base + (2 * y + dy) * s[3] + 2 * xx + dx;
            if (px[i] > px[best]) best = i;
          }
        }
        out[o] = px[best];
        (*idx)[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  Indices shared = idx;
  Shape in_shape = s;
  return record("maxpool2x2", std::move(out), {x},
                [shared, in_shape](const Var&, const Var& g) -> std::vector<Var> {
                  return {scatter(g, shared, in_shape)};
                });
}

Var gather(const Var& a, Indices idx, Shape out_shape) {
  if (numel(out_shape) != idx->size()) {
    throw ContractViolation("gather: index count does not match output shape");
  }
  Tensor out(std::move(out_shape));
  const Real* pa = a.value().ptr();
  for (std::size_t i = 0; i < idx->size(); ++i) {
    const std::uint32_t j = (*idx)[i];
    if (j >= a.size()) throw ContractViolation("gather: index out of range");
    out[i] = pa[j];
  }
  Shape src_shape = a.shape();
  return record("gather", std::move(out), {a},
                [idx, src_shape](const Var&, const Var& g) -> std::vector<Var> {
                  return {scatter(g, idx, src_shape)};
                });
}

Var scatter(const Var& a, Indices idx, Shape out_shape) {
  if (a.size() != idx->size()) {
    throw ContractViolation("scatter: index count does not match source");
  }
  Tensor out(std::move(out_shape));
  const Real* pa = a.value().ptr();
  for (std::size_t i = 0; i < idx->size(); ++i) {
    const std::uint32_t j = (*idx)[i];
    if (j >= out.size()) throw ContractViolation("scatter: index out of range");
    out[j] += pa[i];
  }
  Shape src_shape = a.shape();
  return record("scatter", std::move(out), {a},
                [idx, src_shape](const Var&, const Var& g) -> std::vector<Var> {
                  return {gather(g, idx, src_shape)};
                });
}

namespace {

Var softmax_rows(const Var& z) {
  const std::size_t n = z.shape()[0], k = z.shape()[1];
  Tensor out(z.shape());
  const Real* pz = z.value().ptr();
  for (std::size_t r = 0; r < n; ++r) {
    const Real* row = pz + r * k;
    Real* dst = out.ptr() + r * k;
    const Real mx = *std::max_element(row, row + k);
    Real total = 0;
    for (std::size_t j = 0; j < k; ++j) total += dst[j] = std::exp(row[j] - mx);
    for (std::size_t j = 0; j < k; ++j) dst[j] /= total;
  }
  return record("softmax", std::move(out), {z},
                [k](const Var& self, const Var& g) -> std::vector<Var> {
                  Var dot = row_sum(mul(g, self));
                  return {mul(self, sub(g, broadcast_cols(dot, k)))};
                });
}

Var log_softmax_rows(const Var& z) {
  const std::size_t n = z.shape()[0], k = z.shape()[1];
  Tensor out(z.shape());
  const Real* pz = z.value().ptr();
  for (std::size_t r = 0; r < n; ++r) {
    const Real* row = pz + r * k;
    Real* dst = out.ptr() + r * k;
    const Real mx = *std::max_element(row, row + k);
    Real total = 0;
    for (std::size_t j = 0; j < k; ++j) total += std::exp(row[j] - mx);
    const Real lse = mx + std::log(total);
    for (std::size_t j = 0; j < k; ++j) dst[j] = row[j] - lse;
  }
  return record("log_softmax", std::move(out), {z},
                [k](const Var& self, const Var& g) -> std::vector<Var> {
                  Var p = softmax_rows(input(self, 0));
                  return {sub(g, mul(p, broadcast_cols(row_sum(g), k)))};
                });
}

template <class F>
Var rowwise(const char* op, const Var& z, F f) {
  if (z.shape().size() == 1) {
    if (z.shape()[0] == 0) throw ContractViolation(std::string(op) + ": empty input");
    return reshape(f(reshape(z, {1, z.shape()[0]})), z.shape());
  }
  require_rank(op, z, 2);
  if (z.shape()[1] == 0) throw ContractViolation(std::string(op) + ": empty rows");
  return f(z);
}

}  // namespace

Var softmax(const Var& z) { return rowwise("softmax", z, softmax_rows); }

Var log_softmax(const Var& z) { return rowwise("log_softmax", z, log_softmax_rows); }

Var pick(const Var& a, const std::vector<std::size_t>& labels) {
  require_rank("pick", a, 2);
  const std::size_t n = a.shape()[0], k = a.shape()[1];
  if (labels.size() != n) throw ContractViolation("pick: one label per row required");
  auto idx = std::make_shared<std::vector<std::uint32_t>>(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[r] >= k) {
      throw ContractViolation("pick: label " + std::to_string(labels[r]) +
                              " out of range for " + std::to_string(k) + " classes");
    }
    (*idx)[r] = static_cast<std::uint32_t>(r * k + labels[r]);
  }
  return gather(a, idx, {n});
}

Var cross_entropy(const Var& logits, const std::vector<std::size_t>& labels) {
  return neg(pick(log_softmax(logits), labels));
}

}  // namespace artk::ops
