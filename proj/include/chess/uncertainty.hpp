// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chess/errors.hpp"

namespace chess {

inline constexpr double kDistributionTolerance = 1e-9;

/// Shannon entropy in nats, with 0 ln 0 taken as 0.
inline double entropy(std::span<const double> probs) {
    if (probs.empty()) throw InputError("entropy: empty distribution");
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) throw InputError("entropy: negative or NaN probability");
        total += p;
    }
    if (std::abs(total - 1.0) > kDistributionTolerance) {
        throw InputError("entropy: probabilities sum to " + std::to_string(total));
    }
    double h = 0.0;
    for (double p : probs) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h < 0.0 ? 0.0 : h;
}

/// Entropy statistics of the tokens generated within one page.
struct PageUncertainty {
    double mean_entropy = 0.0;  // nats
    double varentropy = 0.0;    // nats^2, population variance
    std::size_t token_count = 0;

    friend bool operator==(const PageUncertainty&, const PageUncertainty&) = default;
};

inline PageUncertainty page_uncertainty(std::span<const double> entropies) {
    if (entropies.empty()) throw PreconditionError("page_uncertainty: no token entropies");
    const double n = static_cast<double>(entropies.size());
    double mean = 0.0;
    for (double h : entropies) mean += h;
    mean /= n;
    double var = 0.0;
    for (double h : entropies) var += (h - mean) * (h - mean);
    var /= n;
    return {mean, var, entropies.size()};
}

struct TriggerThresholds {
    double tau_entropy = 0.0;
    double tau_varentropy = 0.0;
    double percentile = 0.99;
    std::size_t sample_count = 0;
    std::vector<std::string> warnings;
};

/// Nearest-rank percentile: the ceil(q * n)-th smallest value.
inline double nearest_rank(std::vector<double> values, double q) {
    if (values.empty()) throw CalibrationError("nearest_rank: empty sample");
    std::sort(values.begin(), values.end());
    const double rank = std::ceil(q * static_cast<double>(values.size()) - 1e-9);
    const std::size_t idx = rank < 1.0 ? 0 : std::min(values.size(), static_cast<std::size_t>(rank)) - 1;
    return values[idx];
}

/// Independent marginal percentiles of mean entropy and varentropy.
inline TriggerThresholds calibrate(std::span<const PageUncertainty> samples, double percentile) {
    if (!(percentile > 0.0 && percentile < 1.0)) {
        throw ConfigError("calibrate: percentile must lie in (0, 1), got " + std::to_string(percentile));
    }
    if (samples.empty()) throw CalibrationError("calibrate: empty calibration sample");
    std::vector<double> h, v;
    h.reserve(samples.size());
    v.reserve(samples.size());
    for (const auto& s : samples) {
        h.push_back(s.mean_entropy);
        v.push_back(s.varentropy);
    }
    TriggerThresholds t;
    t.percentile = percentile;
    t.sample_count = samples.size();
    t.tau_entropy = nearest_rank(std::move(h), percentile);
    t.tau_varentropy = nearest_rank(std::move(v), percentile);
    // At least one sample should lie strictly above the cut for the percentile to mean anything.
    const double needed = std::ceil(1.0 / (1.0 - percentile) - 1e-9);
    if (static_cast<double>(samples.size()) < needed) {
        t.warnings.push_back("calibration sample of " + std::to_string(samples.size()) + " pages is below the " +
                             std::to_string(static_cast<std::size_t>(needed)) + " recommended for percentile " +
                             std::to_string(percentile));
    }
    return t;
}

enum class TriggerMode { conjunction, disjunction };

/// Strict exceedance. Conjunction is the upper-right quadrant of the
/// (mean entropy, varentropy) plane; disjunction fires on either marginal.
inline bool check_trigger(const PageUncertainty& u, const TriggerThresholds& t,
                          TriggerMode mode = TriggerMode::conjunction) {
    const bool high_h = u.mean_entropy > t.tau_entropy;
    const bool high_v = u.varentropy > t.tau_varentropy;
    return mode == TriggerMode::conjunction ? (high_h && high_v) : (high_h || high_v);
}

/// Per-sequence accumulator: collects token entropies for the page being
/// generated and evaluates the trigger when that page seals.
class UncertaintyMonitor {
public:
    UncertaintyMonitor(std::optional<TriggerThresholds> thresholds, TriggerMode mode = TriggerMode::conjunction)
        : m_thresholds(std::move(thresholds)), m_mode(mode) {}

    void observe(double token_entropy) { m_current.push_back(token_entropy); }

    struct PageVerdict {
        PageUncertainty stats;
        bool fired = false;
    };

    /// Closes the current page. Without thresholds the verdict never fires.
    PageVerdict close_page() {
        PageVerdict v{page_uncertainty(m_current), false};
        m_current.clear();
        if (m_thresholds) {
            v.fired = check_trigger(v.stats, *m_thresholds, m_mode);
            if (v.fired) ++m_fired;
        }
        return v;
    }

    std::size_t pending_tokens() const noexcept { return m_current.size(); }
    std::size_t fired_count() const noexcept { return m_fired; }

private:
    std::optional<TriggerThresholds> m_thresholds;
    TriggerMode m_mode;
    std::vector<double> m_current;
    std::size_t m_fired = 0;
};

}  // namespace chess
