// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "chess/errors.hpp"

namespace chess {

/// Retention ratios for the grid, chunk and page levels of the cascade.
struct RetentionRatios {
    double grid = 1.0;
    double chunk = 1.0;
    double page = 1.0;

    /// Nominal semantic budget, the product of the three ratios.
    double product() const noexcept { return grid * chunk * page; }

    friend bool operator==(const RetentionRatios&, const RetentionRatios&) = default;
};

/// Named ratio presets. The percentages are the nominal semantic KV budgets.
namespace presets {
inline constexpr RetentionRatios conservative{0.9, 0.9, 0.9};  // 73%
inline constexpr RetentionRatios moderate{0.8, 0.7, 0.7};      // 40%
inline constexpr RetentionRatios aggressive{0.5, 0.2, 0.1};    // 1%
inline constexpr RetentionRatios full{1.0, 1.0, 1.0};
}  // namespace presets

inline std::optional<RetentionRatios> preset_by_name(std::string_view name) {
    if (name == "conservative") return presets::conservative;
    if (name == "moderate") return presets::moderate;
    if (name == "aggressive") return presets::aggressive;
    if (name == "full") return presets::full;
    return std::nullopt;
}

/// Page layout, hierarchy fan-outs and retention policy shared by the store,
/// the index and the selector.
struct SelectionConfig {
    std::size_t page_size = 32;       // tokens per page (B)
    std::size_t pages_per_chunk = 8;  // N_c
    std::size_t chunks_per_grid = 8;  // N_g
    RetentionRatios ratios = presets::aggressive;
    std::size_t window_pages = 4;  // W: most recent pages always kept, also the anchor window
    std::size_t sink_pages = 1;    // leading pages always kept

    void validate() const {
        if (page_size == 0) throw ConfigError("page_size must be >= 1");
        if (pages_per_chunk == 0) throw ConfigError("pages_per_chunk must be >= 1");
        if (chunks_per_grid == 0) throw ConfigError("chunks_per_grid must be >= 1");
        if (window_pages == 0) throw ConfigError("window_pages must be >= 1");
        auto check_ratio = [](double r, const char* name) {
            if (!(r > 0.0 && r <= 1.0)) {
                throw ConfigError(std::string(name) + " ratio must lie in (0, 1], got " + std::to_string(r));
            }
        };
        check_ratio(ratios.grid, "grid");
        check_ratio(ratios.chunk, "chunk");
        check_ratio(ratios.page, "page");
    }

    friend bool operator==(const SelectionConfig&, const SelectionConfig&) = default;
};

/// Number of units kept out of `active` at retention `ratio`: ceil(ratio * active),
/// clamped to [1, active] for non-empty levels. The 1e-9 slack absorbs products such
/// as 0.2 * 130 = 26.000000000000004 that would otherwise round up one unit too many.
inline std::size_t retained_count(double ratio, std::size_t active) noexcept {
    if (active == 0) return 0;
    const double raw = std::ceil(ratio * static_cast<double>(active) - 1e-9);
    std::size_t k = raw < 1.0 ? 1 : static_cast<std::size_t>(raw);
    return k > active ? active : k;
}

}  // namespace chess
