#pragma once

// Rank-based comparisons of attribution maps.

#include <optional>
#include <span>
#include <vector>

#include "artk/tensor.hpp"

namespace artk {

// Indices of the k largest values, descending; ties go to the lower index.
std::vector<std::size_t> topk_indices(std::span<const Real> v, std::size_t k);

// |topk(a) & topk(b)| / k
double topk_intersection(std::span<const Real> a, std::span<const Real> b, std::size_t k);

// Kendall tau-b of a and b restricted to topk(a) | topk(b).
double kendall_topk(std::span<const Real> a, std::span<const Real> b, std::size_t k);

// Tie-corrected Kendall tau-b in O(n log n). Throws NumericError when either
// side is constant.
double kendall_tau_b(std::span<const Real> x, std::span<const Real> y);

// Pearson correlation of average ranks.
double spearman(std::span<const Real> a, std::span<const Real> b);

// Average ranks (1-based), ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const Real> v);

// Median of the values; nullopt for an empty set.
std::optional<double> median(std::vector<double> values);

}  // namespace artk
