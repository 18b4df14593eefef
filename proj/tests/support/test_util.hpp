// SPDX-License-Identifier: Apache-2.0

#pragma once

// Helpers shared by the unit and acceptance suites: random fixtures and
// brute-force references that do not go through the library's code paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "chess/kv_store.hpp"
#include "chess/matrix.hpp"

namespace chess::testing {

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t dim, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    std::vector<double> v(dim);
    for (double& x : v) x = n(rng);
    return v;
}

inline std::vector<double> random_unit_vector(std::mt19937_64& rng, std::size_t dim) {
    auto v = random_vector(rng, dim);
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
}

inline Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& x : m.data()) x = n(rng);
    return m;
}

/// A sealed page with random keys and values.
inline KvPage random_page(std::mt19937_64& rng, std::size_t page_size, std::size_t dim) {
    return KvPage::from_rows(page_size, random_matrix(rng, page_size, dim), random_matrix(rng, page_size, dim));
}

/// Column means of the given rows, accumulated in long double.
inline std::vector<double> reference_mean(const std::vector<std::vector<double>>& rows) {
    std::vector<long double> acc(rows.front().size(), 0.0L);
    for (const auto& r : rows) {
        for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += r[d];
    }
    std::vector<double> out(acc.size());
    for (std::size_t d = 0; d < acc.size(); ++d) out[d] = static_cast<double>(acc[d] / rows.size());
    return out;
}

inline std::vector<double> rows_of(const Matrix& m, std::size_t r) {
    const auto s = m.row(r);
    return {s.begin(), s.end()};
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

}  // namespace chess::testing
