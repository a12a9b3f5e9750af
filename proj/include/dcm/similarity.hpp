#pragma once

#include "dcm/types.hpp"

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace dcm {

// Cosine similarity clamped to [-1, 1]. Throws DimensionMismatch.
double cosine(std::span<const double> a, std::span<const double> b);

inline double similarity(const Embedding& a, const Embedding& b) {
    return cosine(a.values(), b.values());
}

// Indices of the k highest scores among [0, n). Equal scores keep the lower
// index first, so results are deterministic.
template <class ScoreFn>
std::vector<std::size_t> top_k(std::size_t n, std::size_t k, ScoreFn&& score) {
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) scores[i] = score(i);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t take = std::min(k, n);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&](std::size_t lhs, std::size_t rhs) {
                          if (scores[lhs] != scores[rhs]) return scores[lhs] > scores[rhs];
                          return lhs < rhs;
                      });
    order.resize(take);
    return order;
}

} // namespace dcm
