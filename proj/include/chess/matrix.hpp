// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "chess/errors.hpp"

namespace chess {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : m_rows(rows), m_cols(cols), m_data(rows * cols, fill) {}

    std::size_t rows() const noexcept { return m_rows; }
    std::size_t cols() const noexcept { return m_cols; }
    bool empty() const noexcept { return m_rows == 0; }

    std::span<double> row(std::size_t r) { return {m_data.data() + r * m_cols, m_cols}; }
    std::span<const double> row(std::size_t r) const { return {m_data.data() + r * m_cols, m_cols}; }

    double& operator()(std::size_t r, std::size_t c) { return m_data[r * m_cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return m_data[r * m_cols + c]; }

    std::span<const double> data() const noexcept { return m_data; }
    std::span<double> data() noexcept { return m_data; }

    /// Appends one row; the first append on an empty 0-column matrix fixes the width.
    void append_row(std::span<const double> values) {
        if (m_rows == 0 && m_cols == 0) {
            m_cols = values.size();
        }
        if (values.size() != m_cols) {
            throw ShapeError("append_row: expected " + std::to_string(m_cols) + " columns, got " +
                             std::to_string(values.size()));
        }
        m_data.insert(m_data.end(), values.begin(), values.end());
        ++m_rows;
    }

    void reserve_rows(std::size_t rows) { m_data.reserve(rows * m_cols); }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t m_rows = 0;
    std::size_t m_cols = 0;
    std::vector<double> m_data;
};

/// Sequential left-to-right dot product. Every scoring path uses this
/// accumulation order so results are reproducible bit for bit.
inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ShapeError("dot: size mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

/// FNV-1a over the IEEE-754 bit patterns of the values, rendered as 16 hex digits.
inline std::string checksum(std::span<const double> values) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double v : values) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, &v, sizeof(bits));
        for (int byte = 0; byte < 8; ++byte) {
            h ^= (bits >> (8 * byte)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    }
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xfU];
        h >>= 4;
    }
    return out;
}

}  // namespace chess
