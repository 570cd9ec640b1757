#pragma once

// Central finite differences, used as an oracle independent of the
// reverse-mode engine: only forward values are evaluated.

#include <algorithm>
#include <cmath>
#include <random>

#include "artk/tensor.hpp"

namespace artk::testing {

template <class F>
Tensor numeric_gradient(F&& f, Tensor x, double h = 1e-5) {
  Tensor g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Real saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    g[i] = static_cast<Real>((up - down) / (2 * h));
  }
  return g;
}

inline double norm2(const Tensor& t) {
  double s = 0;
  for (Real v : t.data()) s += double(v) * v;
  return std::sqrt(s);
}

// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double rel_error(const Tensor& a, const Tensor& b) {
  double diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += std::pow(double(a[i]) - b[i], 2);
  const double scale = std::max(norm2(a), norm2(b));
  return scale < 1e-300 ? 0.0 : std::sqrt(diff) / scale;
}

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<Real>(u(rng));
  return t;
}

}  // namespace artk::testing
