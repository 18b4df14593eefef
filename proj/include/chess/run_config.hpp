// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "chess/config.hpp"
#include "chess/cost_model.hpp"
#include "chess/errors.hpp"
#include "chess/simulator.hpp"
#include "chess/uncertainty.hpp"
#include "chess/workload.hpp"

namespace chess {

struct CalibrationSettings {
    std::size_t pages = 10000;
    double percentile = 0.99;

    friend bool operator==(const CalibrationSettings&, const CalibrationSettings&) = default;
};

/// Axis values for `sweep`.
struct SweepSettings {
    std::vector<std::string> budget{"conservative", "moderate", "aggressive"};
    std::vector<std::uint64_t> context_length{4096, 8192, 16384, 32768, 65536};
    std::vector<std::string> policy{"fixed:6", "dynamic"};

    friend bool operator==(const SweepSettings&, const SweepSettings&) = default;
};

/// Everything one CLI invocation needs, loadable from a single JSON file.
struct RunConfig {
    std::string workload_id = "stable";
    WorkloadSpec workload;
    SelectionConfig selection;
    std::optional<std::string> preset = std::string("aggressive");
    CostModelParams cost_model;
    std::string policy = "dynamic";
    TriggerMode trigger_mode = TriggerMode::conjunction;
    std::optional<std::string> thresholds_path;
    std::string output_dir = "out";
    CalibrationSettings calibration;
    SweepSettings sweep;

    /// Applies a preset by name, replacing the ratios.
    void set_preset(const std::string& name) {
        const auto r = preset_by_name(name);
        if (!r) throw ConfigError("unknown preset '" + name + "' (expected conservative, moderate, aggressive, full)");
        preset = name;
        selection.ratios = *r;
    }

    void validate() const {
        workload.validate();
        selection.validate();
        cost_model.validate();
        (void)parse_policy(policy);
        if (!(calibration.percentile > 0.0 && calibration.percentile < 1.0)) {
            throw ConfigError("calibration.percentile must lie in (0, 1)");
        }
        if (calibration.pages == 0) throw ConfigError("calibration.pages must be >= 1");
        if (preset) {
            const auto r = preset_by_name(*preset);
            if (!r) throw ConfigError("unknown preset '" + *preset + "'");
            if (!(*r == selection.ratios)) throw ConfigError("preset '" + *preset + "' conflicts with explicit ratios");
        }
    }

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace config_json {

using json = nlohmann::json;

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

}  // namespace detail

inline json to_json(const RunConfig& c) {
    const auto& w = c.workload;
    json schedule = json::array();
    for (const auto& [page, shift] : w.instability_schedule) schedule.push_back({page, shift});
    json selection = {{"page_size", c.selection.page_size},
                      {"pages_per_chunk", c.selection.pages_per_chunk},
                      {"chunks_per_grid", c.selection.chunks_per_grid},
                      {"window_pages", c.selection.window_pages},
                      {"sink_pages", c.selection.sink_pages}};
    if (c.preset) {
        selection["preset"] = *c.preset;
    } else {
        selection["ratios"] = {{"grid", c.selection.ratios.grid},
                               {"chunk", c.selection.ratios.chunk},
                               {"page", c.selection.ratios.page}};
    }
    return {
        {"workload",
         {{"id", c.workload_id},
          {"seed", w.seed},
          {"dim", w.dim},
          {"context_pages", w.context_pages},
          {"relevant_page_fraction", w.relevant_page_fraction},
          {"clustering", to_string(w.clustering)},
          {"signal_strength", w.signal_strength},
          {"generation_pages", w.generation_pages},
          {"instability_schedule", schedule},
          {"focus_fraction", w.focus_fraction},
          {"vocab", w.vocab},
          {"log_eps_mean", w.log_eps_mean},
          {"log_eps_page_sigma", w.log_eps_page_sigma},
          {"log_eps_token_sigma", w.log_eps_token_sigma}}},
        {"selection", selection},
        {"cost_model",
         {{"layers", c.cost_model.layers},
          {"kv_heads", c.cost_model.kv_heads},
          {"head_dim", c.cost_model.head_dim},
          {"hidden_dim", c.cost_model.hidden_dim},
          {"vocab", c.cost_model.vocab},
          {"bytes_per_element", c.cost_model.bytes_per_element},
          {"weight_bytes", c.cost_model.weight_bytes}}},
        {"policy", c.policy},
        {"trigger_mode", c.trigger_mode == TriggerMode::conjunction ? "conjunction" : "disjunction"},
        {"thresholds_path", c.thresholds_path ? json(*c.thresholds_path) : json(nullptr)},
        {"output_dir", c.output_dir},
        {"calibration", {{"pages", c.calibration.pages}, {"percentile", c.calibration.percentile}}},
        {"sweep",
         {{"budget", c.sweep.budget}, {"context_length", c.sweep.context_length}, {"policy", c.sweep.policy}}},
    };
}

namespace detail {

inline RunConfig parse(const json& j) {
    using detail::read;
    using detail::reject_unknown;
    RunConfig c;
    reject_unknown(j, {"workload", "selection", "cost_model", "policy", "trigger_mode", "thresholds_path",
                       "output_dir", "calibration", "sweep"},
                   "config");

    if (j.contains("workload")) {
        const auto& w = j["workload"];
        const std::string at = "workload";
        reject_unknown(w,
                       {"id", "seed", "dim", "context_pages", "relevant_page_fraction", "clustering",
                        "signal_strength", "generation_pages", "instability_schedule", "focus_fraction", "vocab",
                        "log_eps_mean", "log_eps_page_sigma", "log_eps_token_sigma"},
                       at);
        auto& s = c.workload;
        read(w, "id", c.workload_id, at);
        read(w, "seed", s.seed, at);
        read(w, "dim", s.dim, at);
        read(w, "context_pages", s.context_pages, at);
        read(w, "relevant_page_fraction", s.relevant_page_fraction, at);
        read(w, "signal_strength", s.signal_strength, at);
        read(w, "generation_pages", s.generation_pages, at);
        read(w, "focus_fraction", s.focus_fraction, at);
        read(w, "vocab", s.vocab, at);
        read(w, "log_eps_mean", s.log_eps_mean, at);
        read(w, "log_eps_page_sigma", s.log_eps_page_sigma, at);
        read(w, "log_eps_token_sigma", s.log_eps_token_sigma, at);
        if (w.contains("clustering")) {
            const std::string v = w["clustering"].is_string() ? w["clustering"].get<std::string>() : "";
            if (v == "clustered") s.clustering = Clustering::clustered;
            else if (v == "scattered") s.clustering = Clustering::scattered;
            else throw ConfigError("workload.clustering must be 'clustered' or 'scattered'");
        }
        if (w.contains("instability_schedule")) {
            s.instability_schedule.clear();
            for (const auto& e : w["instability_schedule"]) {
                if (!e.is_array() || e.size() != 2) {
                    throw ConfigError("workload.instability_schedule entries must be [page, shift]");
                }
                s.instability_schedule.emplace_back(e[0].get<std::size_t>(), e[1].get<double>());
            }
        }
    }

    if (j.contains("selection")) {
        const auto& s = j["selection"];
        const std::string at = "selection";
        reject_unknown(s, {"preset", "ratios", "page_size", "pages_per_chunk", "chunks_per_grid", "window_pages",
                           "sink_pages"},
                       at);
        read(s, "page_size", c.selection.page_size, at);
        read(s, "pages_per_chunk", c.selection.pages_per_chunk, at);
        read(s, "chunks_per_grid", c.selection.chunks_per_grid, at);
        read(s, "window_pages", c.selection.window_pages, at);
        read(s, "sink_pages", c.selection.sink_pages, at);
        if (s.contains("preset") && s.contains("ratios")) {
            throw ConfigError("selection: give either 'preset' or 'ratios', not both");
        }
        if (s.contains("preset")) {
            c.set_preset(s["preset"].get<std::string>());
        } else if (s.contains("ratios")) {
            const auto& r = s["ratios"];
            reject_unknown(r, {"grid", "chunk", "page"}, "selection.ratios");
            c.preset.reset();
            read(r, "grid", c.selection.ratios.grid, "selection.ratios");
            read(r, "chunk", c.selection.ratios.chunk, "selection.ratios");
            read(r, "page", c.selection.ratios.page, "selection.ratios");
        }
    }

    if (j.contains("cost_model")) {
        const auto& m = j["cost_model"];
        const std::string at = "cost_model";
        reject_unknown(m, {"layers", "kv_heads", "head_dim", "hidden_dim", "vocab", "bytes_per_element", "weight_bytes"},
                       at);
        read(m, "layers", c.cost_model.layers, at);
        read(m, "kv_heads", c.cost_model.kv_heads, at);
        read(m, "head_dim", c.cost_model.head_dim, at);
        read(m, "hidden_dim", c.cost_model.hidden_dim, at);
        read(m, "vocab", c.cost_model.vocab, at);
        read(m, "bytes_per_element", c.cost_model.bytes_per_element, at);
        read(m, "weight_bytes", c.cost_model.weight_bytes, at);
    }

    detail::read(j, "policy", c.policy, "config");
    if (j.contains("trigger_mode")) {
        const auto v = j["trigger_mode"].is_string() ? j["trigger_mode"].get<std::string>() : "";
        if (v == "conjunction") c.trigger_mode = TriggerMode::conjunction;
        else if (v == "disjunction") c.trigger_mode = TriggerMode::disjunction;
        else throw ConfigError("trigger_mode must be 'conjunction' or 'disjunction'");
    }
    if (j.contains("thresholds_path")) {
        if (j["thresholds_path"].is_null()) c.thresholds_path.reset();
        else c.thresholds_path = j["thresholds_path"].get<std::string>();
    }
    detail::read(j, "output_dir", c.output_dir, "config");

    if (j.contains("calibration")) {
        const auto& k = j["calibration"];
        reject_unknown(k, {"pages", "percentile"}, "calibration");
        read(k, "pages", c.calibration.pages, "calibration");
        read(k, "percentile", c.calibration.percentile, "calibration");
    }
    if (j.contains("sweep")) {
        const auto& s = j["sweep"];
        reject_unknown(s, {"budget", "context_length", "policy"}, "sweep");
        read(s, "budget", c.sweep.budget, "sweep");
        read(s, "context_length", c.sweep.context_length, "sweep");
        read(s, "policy", c.sweep.policy, "sweep");
    }
    c.validate();
    return c;
}

}  // namespace detail

/// Parses a config; absent keys keep their defaults, unknown keys are errors.
inline RunConfig from_json(const json& j) {
    try {
        return detail::parse(j);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

}  // namespace config_json

}  // namespace chess
