// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "chess/config.hpp"
#include "chess/errors.hpp"
#include "chess/uncertainty.hpp"

namespace chess {

enum class Clustering { clustered, scattered };

/// Synthetic decode workload with planted relevance.
///
/// Background keys are i.i.d. random unit vectors. Keys of planted ("relevant")
/// context pages add `signal_strength * s` for one shared unit direction s.
/// Focus tokens (the last W context pages and every generated page) carry the
/// same direction at `focus_fraction * signal_strength`, so the anchor points at
/// s while planted pages still outrank the generation's own history.
///
/// Generated tokens come with a next-token distribution
/// (1 - eps) * one_hot + eps * uniform over `vocab` entries; log eps is normal
/// with a per-page and a per-token component. A scheduled instability shift d
/// raises eps by d on every other token of that generated page, lifting both
/// the mean entropy and the varentropy of the page.
struct WorkloadSpec {
    std::uint64_t seed = 0;
    std::size_t dim = 128;
    std::size_t context_pages = 256;
    double relevant_page_fraction = 0.03;
    Clustering clustering = Clustering::clustered;
    double signal_strength = 4.0;
    std::size_t generation_pages = 16;
    std::vector<std::pair<std::size_t, double>> instability_schedule;  // (generated page, eps shift)

    double focus_fraction = 0.5;
    std::size_t vocab = 64;
    double log_eps_mean = -4.0;
    double log_eps_page_sigma = 0.35;
    double log_eps_token_sigma = 0.5;

    void validate() const {
        if (dim == 0) throw ConfigError("WorkloadSpec: dim must be >= 1");
        if (context_pages == 0) throw ConfigError("WorkloadSpec: context_pages must be >= 1");
        if (!(relevant_page_fraction >= 0.0 && relevant_page_fraction <= 1.0)) {
            throw ConfigError("WorkloadSpec: relevant_page_fraction must lie in [0, 1]");
        }
        if (!(signal_strength >= 0.0)) throw ConfigError("WorkloadSpec: signal_strength must be >= 0");
        if (!(focus_fraction >= 0.0)) throw ConfigError("WorkloadSpec: focus_fraction must be >= 0");
        if (vocab < 2) throw ConfigError("WorkloadSpec: vocab must be >= 2");
        for (const auto& [page, shift] : instability_schedule) {
            if (page >= generation_pages) {
                throw ConfigError("WorkloadSpec: instability page " + std::to_string(page) +
                                  " beyond generation_pages");
            }
            if (!(shift >= 0.0)) throw ConfigError("WorkloadSpec: instability shift must be >= 0");
        }
    }

    friend bool operator==(const WorkloadSpec&, const WorkloadSpec&) = default;
};

inline const char* to_string(Clustering c) { return c == Clustering::clustered ? "clustered" : "scattered"; }

/// One synthetic token.
struct SyntheticToken {
    std::vector<double> key;
    std::vector<double> value;
    std::optional<std::vector<double>> distribution;  // generated tokens only
    std::size_t page = 0;                             // logical page position
    bool generated = false;
};

/// Samples next-token distributions. Shared by the token stream and by offline calibration.
class EntropyModel {
public:
    EntropyModel(const WorkloadSpec& spec, std::uint64_t seed) : m_spec(spec), m_rng(seed) {}

    /// Starts a new page; `shift` > 0 makes it unstable.
    void begin_page(double shift) {
        m_page_offset = m_spec.log_eps_page_sigma * m_normal(m_rng);
        m_shift = shift;
        m_token = 0;
    }

    std::vector<double> next_distribution() {
        double eps = std::exp(m_spec.log_eps_mean + m_page_offset + m_spec.log_eps_token_sigma * m_normal(m_rng));
        if (m_shift > 0.0 && m_token % 2 == 0) eps += m_shift;
        eps = std::clamp(eps, 0.0, 1.0);
        ++m_token;
        const std::size_t v = m_spec.vocab;
        std::vector<double> p(v, eps / static_cast<double>(v));
        p[m_token % v] += 1.0 - eps;
        return p;
    }

private:
    WorkloadSpec m_spec;
    std::mt19937_64 m_rng;
    std::normal_distribution<double> m_normal{0.0, 1.0};
    double m_page_offset = 0.0;
    double m_shift = 0.0;
    std::size_t m_token = 0;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Deterministic token stream for a WorkloadSpec: all context tokens, then all generated tokens.
class WorkloadGenerator {
public:
    WorkloadGenerator(WorkloadSpec spec, const SelectionConfig& config)
        : m_spec(std::move(spec)),
          m_page_size(config.page_size),
          m_key_rng(detail::mix_seed(m_spec.seed, 0)),
          m_value_rng(detail::mix_seed(m_spec.seed, 1)),
          m_entropy(m_spec, detail::mix_seed(m_spec.seed, 2)) {
        m_spec.validate();
        config.validate();
        m_signal = random_unit();
        m_focus_first = m_spec.context_pages - std::min(config.window_pages, m_spec.context_pages);
        place_relevant(config);
        for (const auto& [page, shift] : m_spec.instability_schedule) m_shift_by_page.emplace_back(page, shift);
    }

    const WorkloadSpec& spec() const noexcept { return m_spec; }
    const std::vector<double>& signal_direction() const noexcept { return m_signal; }

    /// Ground truth: logical indices of the planted context pages, increasing.
    const std::vector<std::size_t>& relevant_pages() const noexcept { return m_relevant; }

    std::size_t total_tokens() const noexcept {
        return (m_spec.context_pages + m_spec.generation_pages) * m_page_size;
    }
    bool done() const noexcept { return m_position >= total_tokens(); }
    std::size_t position() const noexcept { return m_position; }

    SyntheticToken next() {
        if (done()) throw PreconditionError("WorkloadGenerator: stream exhausted");
        SyntheticToken tok;
        tok.page = m_position / m_page_size;
        const std::size_t slot = m_position % m_page_size;
        tok.generated = tok.page >= m_spec.context_pages;

        double amplitude = 0.0;
        if (tok.generated || tok.page >= m_focus_first) {
            amplitude = m_spec.focus_fraction * m_spec.signal_strength;
        } else if (m_is_relevant[tok.page]) {
            amplitude = m_spec.signal_strength;
        }
        tok.key = random_unit();
        if (amplitude != 0.0) {
            for (std::size_t d = 0; d < tok.key.size(); ++d) tok.key[d] += amplitude * m_signal[d];
        }
        tok.value.resize(m_spec.dim);
        for (double& x : tok.value) x = m_value_normal(m_value_rng);

        if (tok.generated) {
            if (slot == 0) m_entropy.begin_page(shift_for(tok.page - m_spec.context_pages));
            tok.distribution = m_entropy.next_distribution();
        }
        ++m_position;
        return tok;
    }

private:
    std::vector<double> random_unit() {
        std::vector<double> v(m_spec.dim);
        double norm = 0.0;
        for (double& x : v) {
            x = m_key_normal(m_key_rng);
            norm += x * x;
        }
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
        return v;
    }

    double shift_for(std::size_t generated_page) const {
        double s = 0.0;
        for (const auto& [page, shift] : m_shift_by_page) {
            if (page == generated_page) s += shift;
        }
        return s;
    }

    // Planted pages avoid the sink prefix and the focus window.
    void place_relevant(const SelectionConfig& config) {
        m_is_relevant.assign(m_spec.context_pages, 0);
        const std::size_t lo = std::min(config.sink_pages, m_focus_first);
        const std::size_t hi = m_focus_first;
        const std::size_t eligible = hi - lo;
        std::size_t want = static_cast<std::size_t>(
            std::llround(m_spec.relevant_page_fraction * static_cast<double>(m_spec.context_pages)));
        want = std::min(want, eligible);
        if (want == 0) return;

        std::mt19937_64 rng(detail::mix_seed(m_spec.seed, 3));
        if (m_spec.clustering == Clustering::scattered) {
            std::vector<std::size_t> pool(eligible);
            for (std::size_t i = 0; i < eligible; ++i) pool[i] = lo + i;
            std::shuffle(pool.begin(), pool.end(), rng);
            for (std::size_t i = 0; i < want; ++i) m_is_relevant[pool[i]] = 1;
        } else {
            // Whole chunks whose pages are all eligible, filled in random order;
            // the last run may be shorter but still starts on a chunk boundary.
            const std::size_t nc = config.pages_per_chunk;
            std::vector<std::size_t> chunks;
            for (std::size_t c = (lo + nc - 1) / nc; (c + 1) * nc <= hi; ++c) chunks.push_back(c);
            std::shuffle(chunks.begin(), chunks.end(), rng);
            std::size_t placed = 0;
            for (std::size_t c : chunks) {
                for (std::size_t p = c * nc; p < (c + 1) * nc && placed < want; ++p, ++placed) m_is_relevant[p] = 1;
                if (placed == want) break;
            }
            // Not enough whole chunks: fall back to the remaining eligible pages in order.
            for (std::size_t p = lo; p < hi && placed < want; ++p) {
                if (!m_is_relevant[p]) {
                    m_is_relevant[p] = 1;
                    ++placed;
                }
            }
        }
        for (std::size_t p = 0; p < m_is_relevant.size(); ++p) {
            if (m_is_relevant[p]) m_relevant.push_back(p);
        }
    }

    WorkloadSpec m_spec;
    std::size_t m_page_size;
    std::mt19937_64 m_key_rng;
    std::mt19937_64 m_value_rng;
    std::normal_distribution<double> m_key_normal{0.0, 1.0};
    std::normal_distribution<double> m_value_normal{0.0, 1.0};
    EntropyModel m_entropy;
    std::vector<double> m_signal;
    std::size_t m_focus_first = 0;
    std::vector<char> m_is_relevant;
    std::vector<std::size_t> m_relevant;
    std::vector<std::pair<std::size_t, double>> m_shift_by_page;
    std::size_t m_position = 0;
};

/// Per-page entropy statistics of `pages` stable generated pages, for offline calibration.
inline std::vector<PageUncertainty> sample_stable_pages(const WorkloadSpec& spec, std::size_t page_size,
                                                        std::size_t pages) {
    spec.validate();
    EntropyModel model(spec, detail::mix_seed(spec.seed, 4));
    std::vector<PageUncertainty> out;
    out.reserve(pages);
    std::vector<double> h(page_size);
    for (std::size_t p = 0; p < pages; ++p) {
        model.begin_page(0.0);
        for (double& x : h) x = entropy(model.next_distribution());
        out.push_back(page_uncertainty(h));
    }
    return out;
}

}  // namespace chess
