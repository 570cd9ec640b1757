#include "artk/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "artk/errors.hpp"

namespace artk {

namespace {

void check_pair(std::span<const Real> a, std::span<const Real> b, const char* who) {
  if (a.size() != b.size()) {
    throw ContractViolation(std::string(who) + ": lengths " + std::to_string(a.size()) + " and " +
                            std::to_string(b.size()));
  }
}

void check_k(std::size_t k, std::size_t n) {
  if (k < 1 || k > n) {
    throw ContractViolation("top-k: k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
}

// Pairs of (x, y) tied in the key, counted over runs of equal keys.
template <class Key>
long long tied_pairs(const std::vector<std::size_t>& order, Key key) {
  long long ties = 0, run = 1;
  for (std::size_t i = 1; i <= order.size(); ++i) {
    if (i < order.size() && key(order[i]) == key(order[i - 1])) {
      ++run;
    } else {
      ties += run * (run - 1) / 2;
      run = 1;
    }
  }
  return ties;
}

// Sorts idx by y (stable) and returns the number of inversions.
long long merge_count(std::vector<std::size_t>& idx, std::vector<std::size_t>& tmp,
                      std::span<const Real> y, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = (lo + hi) / 2;
  long long swaps = merge_count(idx, tmp, y, lo, mid) + merge_count(idx, tmp, y, mid, hi);
  std::size_t i = lo, j = mid, o = lo;
  while (i < mid && j < hi) {
    if (y[idx[j]] < y[idx[i]]) {
      swaps += mid - i;
      tmp[o++] = idx[j++];
    } else {
      tmp[o++] = idx[i++];
    }
  }
  while (i < mid) tmp[o++] = idx[i++];
  while (j < hi) tmp[o++] = idx[j++];
  std::copy(tmp.begin() + lo, tmp.begin() + hi, idx.begin() + lo);
  return swaps;
}

}  // namespace

std::vector<std::size_t> topk_indices(std::span<const Real> v, std::size_t k) {
  check_k(k, v.size());
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto before = [&](std::size_t i, std::size_t j) { return v[i] > v[j] || (v[i] == v[j] && i < j); };
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), before);
  idx.resize(k);
  return idx;
}

double topk_intersection(std::span<const Real> a, std::span<const Real> b, std::size_t k) {
  check_pair(a, b, "topk_intersection");
  auto ta = topk_indices(a, k), tb = topk_indices(b, k);
  std::sort(ta.begin(), ta.end());
  std::sort(tb.begin(), tb.end());
  std::vector<std::size_t> common;
  std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(common));
  return double(common.size()) / double(k);
}

double kendall_tau_b(std::span<const Real> x, std::span<const Real> y) {
  check_pair(x, y, "kendall");
  const std::size_t n = x.size();
  if (n < 2) throw ContractViolation("kendall: fewer than 2 pixels");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
    return x[i] < x[j] || (x[i] == x[j] && y[i] < y[j]);
  });
  const long long n0 = (long long)n * (n - 1) / 2;
  const long long n1 = tied_pairs(idx, [&](std::size_t i) { return x[i]; });
  const long long n3 = tied_pairs(idx, [&](std::size_t i) { return std::make_pair(x[i], y[i]); });
  std::vector<std::size_t> tmp(n);
  const long long swaps = merge_count(idx, tmp, y, 0, n);
  const long long n2 = tied_pairs(idx, [&](std::size_t i) { return y[i]; });
  const double denom = std::sqrt(double(n0 - n1) * double(n0 - n2));
  if (denom == 0) throw NumericError("kendall", "constant ranking");
  // concordant - discordant = n0 - n1 - n2 + n3 - 2 * swaps
  return double(n0 - n1 - n2 + n3 - 2 * swaps) / denom;
}

double kendall_topk(std::span<const Real> a, std::span<const Real> b, std::size_t k) {
  check_pair(a, b, "kendall_topk");
  auto ta = topk_indices(a, k), tb = topk_indices(b, k);
  std::vector<std::size_t> set;
  std::sort(ta.begin(), ta.end());
  std::sort(tb.begin(), tb.end());
  std::set_union(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(set));
  std::vector<Real> x, y;
  for (std::size_t i : set) {
    x.push_back(a[i]);
    y.push_back(b[i]);
  }
  return kendall_tau_b(x, y);
}

std::vector<double> average_ranks(std::span<const Real> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (double(i) + double(j)) / 2 + 1;
    for (std::size_t t = i; t <= j; ++t) rank[idx[t]] = r;
    i = j + 1;
  }
  return rank;
}

double spearman(std::span<const Real> a, std::span<const Real> b) {
  check_pair(a, b, "spearman");
  if (a.size() < 2) throw ContractViolation("spearman: fewer than 2 values");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double mean = (double(a.size()) + 1) / 2;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (saa == 0 || sbb == 0) throw NumericError("spearman", "zero rank variance");
  return sab / std::sqrt(saa * sbb);
}

std::optional<double> median(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2;
}

}  // namespace artk
