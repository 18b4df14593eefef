// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "chess/config.hpp"
#include "chess/errors.hpp"
#include "chess/kv_store.hpp"
#include "chess/matrix.hpp"
#include "chess/semantic_index.hpp"

namespace chess {

/// Key-space summary of the current generation focus.
struct QueryAnchor {
    std::vector<double> v;
    std::vector<std::size_t> source_pages;  // logical page positions that were pooled
};

/// Mean of the most recent min(W, P_eff) page vectors, where P_eff counts the
/// sealed pages plus a non-empty tail page. The tail contributes the mean of its
/// written rows.
inline QueryAnchor compute_anchor(const HierarchyIndex& index, const KvPage* tail, const SelectionConfig& config) {
    const bool has_tail = tail != nullptr && tail->fill() > 0;
    const std::size_t sealed = index.page_count();
    const std::size_t effective = sealed + (has_tail ? 1 : 0);
    if (effective == 0) throw EmptyContextError("compute_anchor: sequence holds no tokens");
    if (has_tail && !index.empty() && tail->dim() != index.dim()) {
        throw ShapeError("compute_anchor: tail page dimension differs from index");
    }

    const std::size_t take = std::min(config.window_pages, effective);
    const std::size_t first = effective - take;
    const std::size_t dim = index.empty() ? tail->dim() : index.dim();

    QueryAnchor anchor;
    anchor.v.assign(dim, 0.0);
    for (std::size_t p = first; p < effective; ++p) {
        anchor.source_pages.push_back(p);
        if (p < sealed) {
            const auto row = index.page_vectors().row(p);
            for (std::size_t d = 0; d < dim; ++d) anchor.v[d] += row[d];
        } else {
            const auto pooled = mean_key(*tail);
            for (std::size_t d = 0; d < dim; ++d) anchor.v[d] += pooled[d];
        }
    }
    for (double& x : anchor.v) x /= static_cast<double>(take);
    return anchor;
}

/// Affinity of every hierarchy unit with the anchor, split by level.
struct LevelScores {
    std::vector<double> grids;
    std::vector<double> chunks;
    std::vector<double> pages;
};

/// Scores all G + C + P rows in one matrix-vector pass and splits the result.
inline LevelScores score_all(std::span<const double> anchor, const CoalescedMatrix& all) {
    if (all.rows.rows() != all.split.total()) {
        throw ShapeError("score_all: split points do not match row count");
    }
    if (all.rows.rows() > 0 && all.rows.cols() != anchor.size()) {
        throw ShapeError("score_all: anchor has dimension " + std::to_string(anchor.size()) + ", matrix has " +
                         std::to_string(all.rows.cols()));
    }
    std::vector<double> flat(all.rows.rows());
    for (std::size_t r = 0; r < flat.size(); ++r) flat[r] = dot(anchor, all.rows.row(r));

    const auto g_end = flat.begin() + static_cast<std::ptrdiff_t>(all.split.grids);
    const auto c_end = g_end + static_cast<std::ptrdiff_t>(all.split.chunks);
    return {{flat.begin(), g_end}, {g_end, c_end}, {c_end, flat.end()}};
}

/// Outcome of one cascade, with per-level counts for tracing and cost accounting.
struct PruneResult {
    std::vector<std::size_t> pages;  // strictly increasing logical page indices
    std::size_t selected_grids = 0;
    std::size_t active_chunks = 0;
    std::size_t selected_chunks = 0;
    std::size_t active_pages = 0;
    std::uint64_t comparisons = 0;  // modeled ranking work: sum over levels of active units
};

namespace detail {

/// Marks the top `k` entries of `scores` among those with `active[i]`. Ties go to the lower index.
inline std::vector<char> top_k_active(std::span<const double> scores, std::span<const char> active, std::size_t k) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (active[i]) candidates.push_back(i);
    }
    k = std::min(k, candidates.size());
    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    };
    std::nth_element(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end(),
                     better);
    std::vector<char> mask(scores.size(), 0);
    for (std::size_t i = 0; i < k; ++i) mask[candidates[i]] = 1;
    return mask;
}

}  // namespace detail

/// Grid -> chunk -> page cascade. Each level keeps the top ceil(ratio * active)
/// units among those whose parent survived the previous level; inactive units
/// never compete, whatever the sign of their scores.
inline PruneResult hierarchical_prune(const LevelScores& scores, std::span<const std::size_t> page_to_chunk,
                                      std::span<const std::size_t> chunk_to_grid, const RetentionRatios& ratios) {
    if (page_to_chunk.size() != scores.pages.size() || chunk_to_grid.size() != scores.chunks.size()) {
        throw ShapeError("hierarchical_prune: score lengths do not match the index maps");
    }
    PruneResult out;
    if (scores.pages.empty()) return out;

    const std::vector<char> all_grids(scores.grids.size(), 1);
    const auto grid_mask =
        detail::top_k_active(scores.grids, all_grids, retained_count(ratios.grid, scores.grids.size()));
    out.comparisons += scores.grids.size();

    std::vector<char> chunk_active(scores.chunks.size(), 0);
    for (std::size_t c = 0; c < chunk_active.size(); ++c) {
        if (chunk_to_grid[c] >= grid_mask.size()) throw IndexError("hierarchical_prune: chunk parent out of range");
        chunk_active[c] = grid_mask[chunk_to_grid[c]];
    }
    out.active_chunks = static_cast<std::size_t>(std::count(chunk_active.begin(), chunk_active.end(), 1));
    const auto chunk_mask =
        detail::top_k_active(scores.chunks, chunk_active, retained_count(ratios.chunk, out.active_chunks));
    out.comparisons += out.active_chunks;

    std::vector<char> page_active(scores.pages.size(), 0);
    for (std::size_t p = 0; p < page_active.size(); ++p) {
        if (page_to_chunk[p] >= chunk_mask.size()) throw IndexError("hierarchical_prune: page parent out of range");
        page_active[p] = chunk_mask[page_to_chunk[p]];
    }
    out.active_pages = static_cast<std::size_t>(std::count(page_active.begin(), page_active.end(), 1));
    const auto page_mask =
        detail::top_k_active(scores.pages, page_active, retained_count(ratios.page, out.active_pages));
    out.comparisons += out.active_pages;

    out.selected_grids = static_cast<std::size_t>(std::count(grid_mask.begin(), grid_mask.end(), 1));
    out.selected_chunks = static_cast<std::size_t>(std::count(chunk_mask.begin(), chunk_mask.end(), 1));
    for (std::size_t p = 0; p < page_mask.size(); ++p) {
        if (page_mask[p]) out.pages.push_back(p);
    }
    return out;
}

inline PruneResult hierarchical_prune(const LevelScores& scores, const HierarchyIndex& index,
                                      const RetentionRatios& ratios) {
    return hierarchical_prune(scores, index.page_to_chunk(), index.chunk_to_grid(), ratios);
}

/// Exhaustive page-level top-k by affinity, same tie rule as the cascade.
/// Returned indices are increasing.
inline std::vector<std::size_t> oracle_flat_topk(std::span<const double> anchor, const Matrix& page_vectors,
                                                 std::size_t k) {
    const std::size_t n = page_vectors.rows();
    if (k > n) {
        throw BoundError("oracle_flat_topk: k=" + std::to_string(k) + " exceeds page count " + std::to_string(n));
    }
    if (n > 0 && page_vectors.cols() != anchor.size()) throw ShapeError("oracle_flat_topk: dimension mismatch");
    std::vector<std::pair<double, std::size_t>> ranked;
    ranked.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        const auto row = page_vectors.row(i);
        for (std::size_t d = 0; d < row.size(); ++d) s += anchor[d] * row[d];
        ranked.emplace_back(s, i);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(ranked[i].second);
    std::sort(out.begin(), out.end());
    return out;
}

/// Upper bound on the semantic page count for a P-page hierarchy:
/// ceil(rho_p * ceil(rho_c * ceil(rho_g * G) * N_g) * N_c), capped at P.
inline std::size_t semantic_budget_bound(std::size_t pages, const SelectionConfig& config) {
    if (pages == 0) return 0;
    const std::size_t chunks = (pages + config.pages_per_chunk - 1) / config.pages_per_chunk;
    const std::size_t grids = (chunks + config.chunks_per_grid - 1) / config.chunks_per_grid;
    const std::size_t g = retained_count(config.ratios.grid, grids);
    const std::size_t c = retained_count(config.ratios.chunk, std::min(chunks, g * config.chunks_per_grid));
    const std::size_t p = retained_count(config.ratios.page, std::min(pages, c * config.pages_per_chunk));
    return p;
}

enum class Provenance { sink, window, semantic };

inline const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::sink: return "sink";
        case Provenance::window: return "window";
        case Provenance::semantic: return "semantic";
    }
    return "unknown";
}

/// The logical pages attended to in the current decode step, in positional order.
struct WorkingSet {
    std::vector<std::size_t> pages;
    std::vector<Provenance> provenance;  // parallel to `pages`

    std::size_t size() const noexcept { return pages.size(); }
    std::size_t count(Provenance p) const { return static_cast<std::size_t>(std::count(provenance.begin(), provenance.end(), p)); }
    friend bool operator==(const WorkingSet&, const WorkingSet&) = default;
};

/// Union of the semantic selection with the first sink_pages and the last W pages.
/// Each page is tagged with its strongest reason: sink, then window, then semantic.
inline WorkingSet reconstruct_working_set(std::span<const std::size_t> selected, std::size_t total_pages,
                                          const SelectionConfig& config) {
    std::vector<char> tag(total_pages, 0);  // 0 none, 1 semantic, 2 window, 3 sink
    for (std::size_t p : selected) {
        if (p >= total_pages) {
            throw IndexError("reconstruct_working_set: page " + std::to_string(p) + " out of range (" +
                             std::to_string(total_pages) + " pages)");
        }
        tag[p] = 1;
    }
    const std::size_t window = std::min(config.window_pages, total_pages);
    for (std::size_t p = total_pages - window; p < total_pages; ++p) tag[p] = 2;
    const std::size_t sinks = std::min(config.sink_pages, total_pages);
    for (std::size_t p = 0; p < sinks; ++p) tag[p] = 3;

    WorkingSet ws;
    for (std::size_t p = 0; p < total_pages; ++p) {
        if (tag[p] == 0) continue;
        ws.pages.push_back(p);
        ws.provenance.push_back(tag[p] == 3 ? Provenance::sink : tag[p] == 2 ? Provenance::window : Provenance::semantic);
    }
    return ws;
}

inline WorkingSet reconstruct_working_set(std::span<const std::size_t> selected, const SequenceState& seq,
                                          const SelectionConfig& config) {
    return reconstruct_working_set(selected, seq.page_count(), config);
}

/// Everything produced by one full selection pass.
struct Selection {
    QueryAnchor anchor;
    SplitPoints split;
    PruneResult prune;
    std::uint64_t ops = 0;  // modeled multiply-adds plus comparisons
};

/// Anchor, coalesced scoring and cascade in one call.
inline Selection select_pages(const HierarchyIndex& index, const KvPage* tail, const SelectionConfig& config) {
    Selection sel;
    sel.anchor = compute_anchor(index, tail, config);
    const auto all = index.coalesced_matrix();
    sel.split = all.split;
    const auto scores = score_all(sel.anchor.v, all);
    sel.prune = hierarchical_prune(scores, index, config.ratios);
    const std::uint64_t dim = sel.anchor.v.size();
    sel.ops = sel.anchor.source_pages.size() * dim + all.split.total() * dim + sel.prune.comparisons;
    return sel;
}

}  // namespace chess
