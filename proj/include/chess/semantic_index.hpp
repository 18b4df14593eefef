// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <utility>
#include <span>
#include <string>
#include <vector>

#include "chess/config.hpp"
#include "chess/errors.hpp"
#include "chess/kv_store.hpp"
#include "chess/matrix.hpp"

namespace chess {

/// Mean-pooled key summary of one sealed page.
struct PageVector {
    std::vector<double> v;
    std::size_t page_logical_index = 0;
};

/// Row counts of the grid, chunk and page blocks of a coalesced matrix.
struct SplitPoints {
    std::size_t grids = 0;
    std::size_t chunks = 0;
    std::size_t pages = 0;

    std::size_t total() const noexcept { return grids + chunks + pages; }
    friend bool operator==(const SplitPoints&, const SplitPoints&) = default;
};

/// Grid, chunk and page centroid matrices stacked row-wise in that order.
struct CoalescedMatrix {
    Matrix rows;
    SplitPoints split;
};

/// Mean of the first `page.fill()` key rows, accumulated in double.
inline std::vector<double> mean_key(const KvPage& page) {
    std::vector<double> acc(page.dim(), 0.0);
    const std::size_t n = page.fill();
    for (std::size_t r = 0; r < n; ++r) {
        const auto k = page.key(r);
        for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += k[d];
    }
    if (n > 0) {
        for (double& x : acc) x /= static_cast<double>(n);
    }
    return acc;
}

/// Three-tier positional hierarchy over the sealed pages of one sequence.
///
/// Page i belongs to chunk i / N_c, chunk j belongs to grid j / N_g. Chunk rows
/// are the mean of their existing child pages and grid rows the mean of their
/// existing child chunks, so trailing partial groups are averaged over the
/// children they actually have.
class HierarchyIndex {
public:
    HierarchyIndex(std::size_t pages_per_chunk, std::size_t chunks_per_grid)
        : m_pages_per_chunk(pages_per_chunk), m_chunks_per_grid(chunks_per_grid) {
        if (pages_per_chunk == 0 || chunks_per_grid == 0) {
            throw ConfigError("HierarchyIndex: fan-outs must be >= 1");
        }
    }

    explicit HierarchyIndex(const SelectionConfig& config)
        : HierarchyIndex(config.pages_per_chunk, config.chunks_per_grid) {}

    std::size_t pages_per_chunk() const noexcept { return m_pages_per_chunk; }
    std::size_t chunks_per_grid() const noexcept { return m_chunks_per_grid; }

    std::size_t page_count() const noexcept { return m_pages.rows(); }
    std::size_t chunk_count() const noexcept { return m_chunks.rows(); }
    std::size_t grid_count() const noexcept { return m_grids.rows(); }
    std::size_t dim() const noexcept { return m_pages.cols(); }
    bool empty() const noexcept { return m_pages.empty(); }

    const Matrix& page_vectors() const noexcept { return m_pages; }
    const Matrix& chunk_vectors() const noexcept { return m_chunks; }
    const Matrix& grid_vectors() const noexcept { return m_grids; }
    const std::vector<std::size_t>& page_to_chunk() const noexcept { return m_page_to_chunk; }
    const std::vector<std::size_t>& chunk_to_grid() const noexcept { return m_chunk_to_grid; }

    SplitPoints split() const noexcept { return {grid_count(), chunk_count(), page_count()}; }

    /// Pools a sealed page into a new page row and refreshes its parent chunk and grid.
    PageVector finalize_page(const KvPage& page, std::size_t logical_index) {
        if (!page.sealed()) {
            throw PreconditionError("finalize_page: page is not sealed (fill " + std::to_string(page.fill()) + "/" +
                                    std::to_string(page.capacity()) + ")");
        }
        if (logical_index != page_count()) {
            throw OrderingError("finalize_page: expected logical index " + std::to_string(page_count()) + ", got " +
                                std::to_string(logical_index));
        }
        PageVector pv{mean_key(page), logical_index};
        append_page_vector(pv.v);
        return pv;
    }

    /// Same as finalize_page for an already pooled vector.
    void append_page_vector(std::span<const double> v) {
        if (!empty() && v.size() != dim()) {
            throw ShapeError("HierarchyIndex: page vector has dimension " + std::to_string(v.size()) + ", index has " +
                             std::to_string(dim()));
        }
        const std::size_t page_idx = page_count();
        m_pages.append_row(v);

        const std::size_t chunk_idx = page_idx / m_pages_per_chunk;
        m_page_to_chunk.push_back(chunk_idx);
        if (chunk_idx == chunk_count()) {
            m_chunks.append_row(std::vector<double>(v.size(), 0.0));
            m_chunk_sums.append_row(std::vector<double>(v.size(), 0.0));
            m_chunk_children.push_back(0);
            const std::size_t grid_idx = chunk_idx / m_chunks_per_grid;
            m_chunk_to_grid.push_back(grid_idx);
            if (grid_idx == grid_count()) {
                m_grids.append_row(std::vector<double>(v.size(), 0.0));
            }
        }

        auto sum = m_chunk_sums.row(chunk_idx);
        for (std::size_t d = 0; d < v.size(); ++d) sum[d] += v[d];
        const double n = static_cast<double>(++m_chunk_children[chunk_idx]);
        auto centroid = m_chunks.row(chunk_idx);
        for (std::size_t d = 0; d < v.size(); ++d) centroid[d] = sum[d] / n;

        refresh_grid(m_chunk_to_grid[chunk_idx]);
    }

    /// Stacks grid, chunk and page rows into one matrix for single-pass scoring.
    CoalescedMatrix coalesced_matrix() const {
        CoalescedMatrix out;
        out.split = split();
        out.rows = Matrix(out.split.total(), dim());
        std::size_t r = 0;
        for (const Matrix* level : {&m_grids, &m_chunks, &m_pages}) {
            for (std::size_t i = 0; i < level->rows(); ++i, ++r) {
                const auto src = level->row(i);
                std::copy(src.begin(), src.end(), out.rows.row(r).begin());
            }
        }
        return out;
    }

private:
    friend HierarchyIndex rebuild_from_scratch(std::span<const KvPage>, const SelectionConfig&);

    void assign_levels(Matrix pages, Matrix chunks, Matrix grids) {
        m_pages = std::move(pages);
        m_chunks = std::move(chunks);
        m_grids = std::move(grids);
        m_page_to_chunk.clear();
        m_chunk_to_grid.clear();
        m_chunk_children.assign(m_chunks.rows(), 0);
        m_chunk_sums = Matrix(m_chunks.rows(), m_pages.cols());
        for (std::size_t i = 0; i < m_pages.rows(); ++i) {
            const std::size_t c = i / m_pages_per_chunk;
            m_page_to_chunk.push_back(c);
            ++m_chunk_children[c];
            auto sum = m_chunk_sums.row(c);
            const auto row = m_pages.row(i);
            for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += row[d];
        }
        for (std::size_t j = 0; j < m_chunks.rows(); ++j) m_chunk_to_grid.push_back(j / m_chunks_per_grid);
    }

    void refresh_grid(std::size_t grid_idx) {
        const std::size_t first = grid_idx * m_chunks_per_grid;
        const std::size_t last = std::min(first + m_chunks_per_grid, chunk_count());
        auto g = m_grids.row(grid_idx);
        std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t c = first; c < last; ++c) {
            const auto row = m_chunks.row(c);
            for (std::size_t d = 0; d < g.size(); ++d) g[d] += row[d];
        }
        const double n = static_cast<double>(last - first);
        for (double& x : g) x /= n;
    }

    std::size_t m_pages_per_chunk;
    std::size_t m_chunks_per_grid;
    Matrix m_pages;
    Matrix m_chunks;
    Matrix m_grids;
    Matrix m_chunk_sums;
    std::vector<std::size_t> m_chunk_children;
    std::vector<std::size_t> m_page_to_chunk;
    std::vector<std::size_t> m_chunk_to_grid;
};

/// Batch construction from a list of sealed pages. Computes every centroid
/// directly from its children; used to cross-check incremental maintenance.
inline HierarchyIndex rebuild_from_scratch(std::span<const KvPage> pages, const SelectionConfig& config) {
    HierarchyIndex index(config);
    if (pages.empty()) return index;
    for (const KvPage& p : pages) {
        if (!p.sealed()) throw PreconditionError("rebuild_from_scratch: all pages must be sealed");
    }
    // Page rows first, then the parent levels from complete child sets.
    Matrix page_rows;
    for (const KvPage& p : pages) page_rows.append_row(mean_key(p));

    auto group_means = [](const Matrix& children, std::size_t fan_out) {
        Matrix parents;
        const std::size_t n_parents = (children.rows() + fan_out - 1) / fan_out;
        for (std::size_t j = 0; j < n_parents; ++j) {
            std::vector<double> acc(children.cols(), 0.0);
            const std::size_t first = j * fan_out;
            const std::size_t last = std::min(first + fan_out, children.rows());
            for (std::size_t i = first; i < last; ++i) {
                const auto row = children.row(i);
                for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += row[d];
            }
            for (double& x : acc) x /= static_cast<double>(last - first);
            parents.append_row(acc);
        }
        return parents;
    };
    Matrix chunk_rows = group_means(page_rows, config.pages_per_chunk);
    Matrix grid_rows = group_means(chunk_rows, config.chunks_per_grid);
    index.assign_levels(std::move(page_rows), std::move(chunk_rows), std::move(grid_rows));
    return index;
}

}  // namespace chess
