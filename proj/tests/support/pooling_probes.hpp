// SPDX-License-Identifier: Apache-2.0

#pragma once

// Monte Carlo probes of how mean pooling treats random and planted key rows.
// Pooling goes through HierarchyIndex::finalize_page, the production path.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "chess/kv_store.hpp"
#include "chess/semantic_index.hpp"
#include "support/test_util.hpp"

namespace chess::testing {

inline std::vector<double> pool_rows(const Matrix& keys) {
    HierarchyIndex index(1, 1);
    const KvPage page = KvPage::from_rows(keys.rows(), keys, Matrix(keys.rows(), keys.cols()));
    return index.finalize_page(page, 0).v;
}

/// Standard deviation of <pooled page, fresh unit vector> when the page holds
/// `page_size` i.i.d. random unit rows of dimension `dim`. Shrinks like 1/sqrt(B * D).
inline double orthogonality_noise_std(std::size_t page_size, std::size_t dim, std::size_t trials,
                                      std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        Matrix keys(page_size, dim);
        for (std::size_t r = 0; r < page_size; ++r) {
            const auto u = random_unit_vector(rng, dim);
            std::copy(u.begin(), u.end(), keys.row(r).begin());
        }
        const auto pooled = pool_rows(keys);
        const auto probe = random_unit_vector(rng, dim);
        const double x = dot(pooled, probe);
        sum += x;
        sum_sq += x * x;
    }
    const double n = static_cast<double>(trials);
    const double mean = sum / n;
    return std::sqrt(std::max(0.0, sum_sq / n - mean * mean));
}

/// Fraction of trials in which a page holding one signal row s (the anchor) among
/// B - 1 random unit rows has |anchor . v_p - anchor . s / B| > eps, i.e. the
/// pooled score strays from the signal row's own share by more than eps.
inline double concentration_exceedance_rate(std::size_t page_size, std::size_t dim, std::size_t trials, double eps,
                                            std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::size_t exceed = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const auto signal = random_unit_vector(rng, dim);
        const std::size_t slot = rng() % page_size;
        Matrix keys(page_size, dim);
        for (std::size_t r = 0; r < page_size; ++r) {
            const auto row = r == slot ? signal : random_unit_vector(rng, dim);
            std::copy(row.begin(), row.end(), keys.row(r).begin());
        }
        const auto pooled = pool_rows(keys);
        const double gap = std::abs(dot(signal, pooled) - dot(signal, signal) / static_cast<double>(page_size));
        if (gap > eps) ++exceed;
    }
    return static_cast<double>(exceed) / static_cast<double>(trials);
}

}  // namespace chess::testing
