// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chess/config.hpp"
#include "chess/errors.hpp"
#include "chess/kv_store.hpp"
#include "chess/selector.hpp"
#include "chess/semantic_index.hpp"
#include "chess/uncertainty.hpp"
#include "chess/workload.hpp"

namespace chess {

/// When to rebuild the working set during generation.
///
/// Every policy except `never` runs one selection when the prompt has been
/// ingested. After that: `dynamic` reselects when the uncertainty trigger fires
/// on a sealed page, `fixed` every `interval` generated pages, `always` after
/// every generated page. `never` is the full-KV baseline: no selection at all,
/// every page stays in the working set.
struct ReconstructionPolicy {
    enum class Kind { dynamic, fixed, never, always };
    Kind kind = Kind::dynamic;
    std::size_t interval = 6;

    static ReconstructionPolicy dynamic() { return {Kind::dynamic, 0}; }
    static ReconstructionPolicy fixed(std::size_t interval) { return {Kind::fixed, interval}; }
    static ReconstructionPolicy never() { return {Kind::never, 0}; }
    static ReconstructionPolicy always() { return {Kind::always, 0}; }

    friend bool operator==(const ReconstructionPolicy&, const ReconstructionPolicy&) = default;
};

/// Accepts "dynamic", "never", "always", "fixed:N" and "fixed(N)".
inline ReconstructionPolicy parse_policy(const std::string& text) {
    if (text == "dynamic") return ReconstructionPolicy::dynamic();
    if (text == "never") return ReconstructionPolicy::never();
    if (text == "always") return ReconstructionPolicy::always();
    std::string digits;
    if (text.rfind("fixed:", 0) == 0) {
        digits = text.substr(6);
    } else if (text.rfind("fixed(", 0) == 0 && text.size() > 7 && text.back() == ')') {
        digits = text.substr(6, text.size() - 7);
    } else {
        throw ConfigError("unknown policy '" + text + "' (expected dynamic, never, always or fixed:N)");
    }
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        throw ConfigError("policy '" + text + "': interval must be a positive integer");
    }
    const auto n = std::stoull(digits);
    if (n == 0) throw ConfigError("policy '" + text + "': interval must be >= 1");
    return ReconstructionPolicy::fixed(static_cast<std::size_t>(n));
}

inline std::string to_string(const ReconstructionPolicy& p) {
    switch (p.kind) {
        case ReconstructionPolicy::Kind::dynamic: return "dynamic";
        case ReconstructionPolicy::Kind::never: return "never";
        case ReconstructionPolicy::Kind::always: return "always";
        case ReconstructionPolicy::Kind::fixed: return "fixed:" + std::to_string(p.interval);
    }
    return "unknown";
}

/// Metrics of one decode step. Step 0 is the end of prefill; step g >= 1 is the
/// sealing of generated page g - 1.
struct StepRecord {
    std::size_t step = 0;
    std::size_t sealed_pages = 0;
    std::size_t working_set_size = 0;
    std::size_t semantic_pages = 0;
    double budget_fraction_semantic = 0.0;  // semantic pages / sealed pages at the last selection
    double budget_fraction_total = 0.0;     // working set / all pages right now
    double recall = 0.0;                    // planted pages kept by the semantic selection
    double precision = 0.0;
    double oracle_recall = 0.0;  // flat top-k at the same page count
    bool reconstructed = false;
    bool trigger_fired = false;  // uncertainty trigger verdict for this page
    std::uint64_t selection_ops = 0;
    std::uint64_t attention_ops = 0;  // attention over the working set for this page's tokens
    double mean_entropy = 0.0;
    double varentropy = 0.0;

    friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

/// Per-selection trace line.
struct SelectionTrace {
    std::size_t step = 0;
    std::string anchor_checksum;
    SplitPoints split;
    std::size_t selected_grids = 0;
    std::size_t selected_chunks = 0;
    std::size_t selected_pages = 0;
    WorkingSet working_set;

    friend bool operator==(const SelectionTrace&, const SelectionTrace&) = default;
};

struct RunSummary {
    std::size_t steps = 0;
    std::size_t relevant_pages = 0;
    double mean_recall = 0.0;
    double mean_precision = 0.0;
    double mean_oracle_recall = 0.0;
    double mean_budget_semantic = 0.0;
    double mean_budget_total = 0.0;
    std::size_t reconstructions = 0;  // including the post-prefill selection
    std::size_t trigger_count = 0;    // reconstructions during generation
    double mean_inter_trigger_gap = 0.0;
    std::size_t max_working_set = 0;
    std::uint64_t total_selection_ops = 0;
    std::uint64_t total_attention_ops = 0;
    std::size_t zero_copy_violations = 0;

    friend bool operator==(const RunSummary&, const RunSummary&) = default;
};

struct RunReport {
    std::vector<StepRecord> steps;
    std::vector<SelectionTrace> traces;
    RunSummary summary;

    friend bool operator==(const RunReport&, const RunReport&) = default;
};

struct RunOptions {
    std::optional<TriggerThresholds> thresholds;
    TriggerMode trigger_mode = TriggerMode::conjunction;
    std::size_t capacity_pages = 0;  // 0: exactly enough for the workload
};

namespace detail {

inline double overlap_fraction(const std::vector<std::size_t>& picked, const std::vector<char>& truth,
                               std::size_t denom) {
    if (denom == 0) return 1.0;
    std::size_t hits = 0;
    for (std::size_t p : picked) hits += (p < truth.size() && truth[p]) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(denom);
}

}  // namespace detail

/// Drives store -> index -> selector -> uncertainty over a synthetic workload.
inline RunReport run_decode_loop(const WorkloadSpec& spec, const SelectionConfig& config,
                                 const ReconstructionPolicy& policy, const RunOptions& options = {}) {
    config.validate();
    if (policy.kind == ReconstructionPolicy::Kind::dynamic && !options.thresholds) {
        throw PreconditionError("run_decode_loop: dynamic policy requires calibrated trigger thresholds");
    }
    if (policy.kind == ReconstructionPolicy::Kind::fixed && policy.interval == 0) {
        throw ConfigError("run_decode_loop: fixed policy interval must be >= 1");
    }

    WorkloadGenerator gen(spec, config);
    const std::size_t needed = spec.context_pages + spec.generation_pages;
    PagedKvStore store(options.capacity_pages ? options.capacity_pages : needed, config, spec.dim);
    SequenceState seq = store.create_sequence();
    HierarchyIndex index(config);
    UncertaintyMonitor monitor(options.thresholds, options.trigger_mode);

    const auto& relevant = gen.relevant_pages();
    std::vector<char> is_relevant(needed, 0);
    for (std::size_t p : relevant) is_relevant[p] = 1;

    std::vector<std::uint64_t> sealed_version;  // by logical page
    RunReport report;
    report.summary.relevant_pages = relevant.size();

    std::vector<std::size_t> semantic;
    std::size_t sealed_at_selection = 0;
    double recall = 0.0, precision = 0.0, oracle_recall = 0.0;
    const bool full_kv = policy.kind == ReconstructionPolicy::Kind::never;

    auto check_zero_copy = [&] {
        for (std::size_t p = 0; p < sealed_version.size(); ++p) {
            if (store.page(seq.page_table[p]).version() != sealed_version[p]) ++report.summary.zero_copy_violations;
        }
    };

    auto reselect = [&](std::size_t step) -> std::uint64_t {
        if (full_kv) {
            semantic.resize(index.page_count());
            for (std::size_t p = 0; p < semantic.size(); ++p) semantic[p] = p;
            sealed_at_selection = index.page_count();
            recall = detail::overlap_fraction(semantic, is_relevant, relevant.size());
            precision = semantic.empty() ? 0.0 : detail::overlap_fraction(semantic, is_relevant, semantic.size());
            oracle_recall = recall;
            return 0;
        }
        const Selection sel = select_pages(index, store.tail_page(seq), config);
        semantic = sel.prune.pages;
        sealed_at_selection = index.page_count();
        recall = detail::overlap_fraction(semantic, is_relevant, relevant.size());
        precision = semantic.empty() ? 0.0 : detail::overlap_fraction(semantic, is_relevant, semantic.size());
        const auto oracle = oracle_flat_topk(sel.anchor.v, index.page_vectors(), semantic.size());
        oracle_recall = detail::overlap_fraction(oracle, is_relevant, relevant.size());

        SelectionTrace trace;
        trace.step = step;
        trace.anchor_checksum = checksum(sel.anchor.v);
        trace.split = sel.split;
        trace.selected_grids = sel.prune.selected_grids;
        trace.selected_chunks = sel.prune.selected_chunks;
        trace.selected_pages = semantic.size();
        trace.working_set = reconstruct_working_set(semantic, seq, config);
        report.traces.push_back(std::move(trace));
        check_zero_copy();
        return sel.ops + seq.page_count();  // plus one pass to form the union
    };

    auto record = [&](std::size_t step, bool reconstructed, bool fired, std::uint64_t sel_ops,
                      const std::optional<PageUncertainty>& stats) {
        StepRecord r;
        r.step = step;
        r.sealed_pages = index.page_count();
        WorkingSet ws;
        if (full_kv) {
            std::vector<std::size_t> all(seq.page_count());
            for (std::size_t p = 0; p < all.size(); ++p) all[p] = p;
            ws = reconstruct_working_set(all, seq, config);
            r.semantic_pages = index.page_count();
            r.budget_fraction_semantic = 1.0;
        } else {
            ws = reconstruct_working_set(semantic, seq, config);
            r.semantic_pages = semantic.size();
            r.budget_fraction_semantic =
                sealed_at_selection == 0 ? 0.0
                                         : static_cast<double>(semantic.size()) / static_cast<double>(sealed_at_selection);
        }
        r.working_set_size = ws.size();
        r.budget_fraction_total =
            seq.page_count() == 0 ? 0.0 : static_cast<double>(ws.size()) / static_cast<double>(seq.page_count());
        r.recall = recall;
        r.precision = precision;
        r.oracle_recall = oracle_recall;
        r.reconstructed = reconstructed;
        r.trigger_fired = fired;
        r.selection_ops = sel_ops;
        if (step > 0) {
            // Each of the page's B decode steps reads K and V of every working-set token.
            const std::uint64_t ws_tokens = static_cast<std::uint64_t>(ws.size()) * config.page_size;
            r.attention_ops = static_cast<std::uint64_t>(config.page_size) * 2 * ws_tokens * spec.dim;
        }
        if (stats) {
            r.mean_entropy = stats->mean_entropy;
            r.varentropy = stats->varentropy;
        }
        report.steps.push_back(r);
    };

    auto ingest = [&](const SyntheticToken& tok) {
        const AppendEvent ev = store.append_token(seq, tok.key, tok.value);
        if (tok.distribution) monitor.observe(entropy(*tok.distribution));
        if (ev.sealed) {
            const KvPage& page = store.page(ev.page_id);
            index.finalize_page(page, ev.logical_index);
            sealed_version.push_back(page.version());
        }
        return ev;
    };

    // Prefill.
    const std::size_t context_tokens = spec.context_pages * config.page_size;
    while (gen.position() < context_tokens) ingest(gen.next());
    record(0, !full_kv, false, reselect(0), std::nullopt);

    // Generation, one page at a time.
    std::vector<std::size_t> positions{0};
    for (std::size_t g = 0; g < spec.generation_pages; ++g) {
        AppendEvent ev;
        do {
            ev = ingest(gen.next());
        } while (!ev.sealed);
        const auto verdict = monitor.close_page();
        const std::size_t step = g + 1;

        bool rebuild = false;
        switch (policy.kind) {
            case ReconstructionPolicy::Kind::dynamic: rebuild = verdict.fired; break;
            case ReconstructionPolicy::Kind::fixed: rebuild = step % policy.interval == 0; break;
            case ReconstructionPolicy::Kind::always: rebuild = true; break;
            case ReconstructionPolicy::Kind::never: rebuild = false; break;
        }
        std::uint64_t ops = 0;
        if (rebuild) {
            ops = reselect(step);
            positions.push_back(step);
        } else if (full_kv) {
            reselect(step);
        }
        record(step, rebuild, verdict.fired, ops, verdict.stats);
    }
    check_zero_copy();

    auto& s = report.summary;
    s.steps = report.steps.size();
    for (const auto& r : report.steps) {
        s.mean_recall += r.recall;
        s.mean_precision += r.precision;
        s.mean_oracle_recall += r.oracle_recall;
        s.mean_budget_semantic += r.budget_fraction_semantic;
        s.mean_budget_total += r.budget_fraction_total;
        s.reconstructions += r.reconstructed ? 1 : 0;
        s.max_working_set = std::max(s.max_working_set, r.working_set_size);
        s.total_selection_ops += r.selection_ops;
        s.total_attention_ops += r.attention_ops;
    }
    const double n = static_cast<double>(s.steps);
    s.mean_recall /= n;
    s.mean_precision /= n;
    s.mean_oracle_recall /= n;
    s.mean_budget_semantic /= n;
    s.mean_budget_total /= n;
    s.trigger_count = positions.size() - 1;
    // With no trigger the whole generation is one uninterrupted interval.
    s.mean_inter_trigger_gap = s.trigger_count == 0
                                   ? static_cast<double>(spec.generation_pages)
                                   : static_cast<double>(positions.back()) / static_cast<double>(s.trigger_count);
    return report;
}

/// Modeled share of selection work in the total selection + attention work of a run.
inline double selection_overhead_profile(const RunReport& report) {
    const double sel = static_cast<double>(report.summary.total_selection_ops);
    const double att = static_cast<double>(report.summary.total_attention_ops);
    if (sel + att == 0.0) return 0.0;
    return sel / (sel + att);
}

}  // namespace chess
