// SPDX-License-Identifier: Apache-2.0

// Command-line driver: calibrate, run, sweep and validate.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "chess/chess.hpp"
#include "chess/io.hpp"
#include "chess/run_config.hpp"

namespace fs = std::filesystem;
using chess::io::json;

namespace {

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> policy;
    std::optional<std::string> preset;
    std::optional<std::string> thresholds;
    bool dry_run = false;
};

chess::RunConfig load_config(const Overrides& o) {
    chess::RunConfig c;
    if (!o.config_path.empty()) c = chess::config_json::from_json(chess::io::read_json(o.config_path));
    if (o.seed) c.workload.seed = *o.seed;
    if (o.out) c.output_dir = *o.out;
    if (o.policy) c.policy = *o.policy;
    if (o.preset) c.set_preset(*o.preset);
    if (o.thresholds) c.thresholds_path = *o.thresholds;
    c.validate();
    return c;
}

std::optional<chess::TriggerThresholds> load_thresholds(const chess::RunConfig& c, bool required) {
    if (!c.thresholds_path) {
        if (required) {
            throw chess::PreconditionError(
                "policy 'dynamic' needs trigger thresholds: run `chess_cli calibrate` first and pass the file "
                "with --thresholds or set \"thresholds_path\" in the config");
        }
        return std::nullopt;
    }
    return chess::io::thresholds_from_json(chess::io::read_json(*c.thresholds_path));
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw chess::IoError("cannot create '" + dir.string() + "': " + ec.message());
}

int cmd_validate(const Overrides& o) {
    const auto c = load_config(o);
    std::cout << chess::config_json::to_json(c).dump(2) << '\n';
    return 0;
}

int cmd_calibrate(const Overrides& o) {
    const auto c = load_config(o);
    if (!c.workload.instability_schedule.empty()) {
        throw chess::ConfigError("calibrate: the workload must be stable (empty instability_schedule)");
    }
    const fs::path out = fs::path(c.output_dir) / "calibration.json";
    if (o.dry_run) {
        std::cout << "would sample " << c.calibration.pages << " stable pages of workload '" << c.workload_id
                  << "' and write " << out.string() << '\n';
        return 0;
    }
    const auto samples = chess::sample_stable_pages(c.workload, c.selection.page_size, c.calibration.pages);
    const auto t = chess::calibrate(samples, c.calibration.percentile);
    for (const auto& w : t.warnings) std::cerr << "warning: " << w << '\n';
    ensure_dir(c.output_dir);
    chess::io::write_text(out, chess::io::thresholds_to_json(t, c.workload_id).dump(2) + "\n");
    std::cout << "tau_H=" << t.tau_entropy << " tau_V=" << t.tau_varentropy << " -> " << out.string() << '\n';
    return 0;
}

chess::RunOptions options_for(const chess::RunConfig& c, const chess::ReconstructionPolicy& policy) {
    chess::RunOptions opts;
    opts.trigger_mode = c.trigger_mode;
    opts.thresholds = load_thresholds(c, policy.kind == chess::ReconstructionPolicy::Kind::dynamic);
    return opts;
}

int cmd_run(const Overrides& o) {
    const auto c = load_config(o);
    const auto policy = chess::parse_policy(c.policy);
    const auto opts = options_for(c, policy);
    if (o.dry_run) {
        std::cout << "would run policy " << chess::to_string(policy) << " on " << c.workload.context_pages
                  << " context pages + " << c.workload.generation_pages << " generated pages, writing to "
                  << c.output_dir << '\n';
        return 0;
    }
    const auto report = chess::run_decode_loop(c.workload, c.selection, policy, opts);
    ensure_dir(c.output_dir);
    json extra = {{"policy", chess::to_string(policy)}, {"workload", c.workload_id}, {"seed", c.workload.seed}};
    chess::io::write_report(c.output_dir, report, extra);
    std::cout << chess::io::report_summary_to_json(report).dump(2) << '\n';
    return 0;
}

int cmd_sweep(const Overrides& o) {
    const auto c = load_config(o);
    const auto& s = c.sweep;
    if (s.budget.empty()) throw chess::ConfigError("sweep: axis 'budget' is empty");
    if (s.context_length.empty()) throw chess::ConfigError("sweep: axis 'context_length' is empty");
    if (s.policy.empty()) throw chess::ConfigError("sweep: axis 'policy' is empty");

    // Check every grid point before running any.
    std::vector<chess::ReconstructionPolicy> policies;
    bool needs_thresholds = false;
    for (const auto& p : s.policy) {
        policies.push_back(chess::parse_policy(p));
        needs_thresholds |= policies.back().kind == chess::ReconstructionPolicy::Kind::dynamic;
    }
    for (const auto& b : s.budget) {
        if (!chess::preset_by_name(b)) throw chess::ConfigError("sweep: unknown budget preset '" + b + "'");
    }
    for (auto len : s.context_length) {
        if (len < c.selection.page_size) throw chess::ConfigError("sweep: context_length below one page");
    }
    const auto thresholds = load_thresholds(c, needs_thresholds);

    const fs::path out = fs::path(c.output_dir) / "sweep.csv";
    const std::size_t points = s.budget.size() * s.context_length.size() * policies.size();
    if (o.dry_run) {
        std::cout << "would run " << points << " configurations and write " << out.string() << '\n';
        return 0;
    }

    chess::io::CsvTable table({"budget", "context_length", "policy", "mean_recall", "mean_oracle_recall",
                               "mean_budget_semantic", "max_working_set", "reconstructions", "mean_inter_trigger_gap",
                               "selection_overhead", "kv_bytes_full", "kv_bytes_working_set", "attention_ratio_full",
                               "attention_ratio_working_set"});
    for (const auto& b : s.budget) {
        for (auto len : s.context_length) {
            for (const auto& policy : policies) {
                chess::WorkloadSpec w = c.workload;
                w.context_pages = static_cast<std::size_t>(len / c.selection.page_size);
                chess::SelectionConfig sel = c.selection;
                sel.ratios = *chess::preset_by_name(b);
                chess::RunOptions opts;
                opts.trigger_mode = c.trigger_mode;
                opts.thresholds = thresholds;
                const auto r = chess::run_decode_loop(w, sel, policy, opts);
                const std::uint64_t full_tokens = (w.context_pages + w.generation_pages) * sel.page_size;
                const std::uint64_t ws_tokens = r.summary.max_working_set * sel.page_size;
                const auto full = chess::cost_model_step(c.cost_model, full_tokens);
                const auto ws = chess::cost_model_step(c.cost_model, ws_tokens);
                table.add_row(b, len, chess::to_string(policy), r.summary.mean_recall, r.summary.mean_oracle_recall,
                              r.summary.mean_budget_semantic, r.summary.max_working_set, r.summary.reconstructions,
                              r.summary.mean_inter_trigger_gap, chess::selection_overhead_profile(r), full.kv_bytes,
                              ws.kv_bytes, full.attention_ratio, ws.attention_ratio);
            }
        }
    }
    std::ostringstream csv;
    table.write(csv);
    ensure_dir(c.output_dir);
    chess::io::write_text(out, csv.str());
    std::cout << "wrote " << table.rows() << " rows to " << out.string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical KV page selection simulator"};
    app.require_subcommand(1);
    Overrides o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Workload seed override");
        sub->add_option("--out", o.out, "Output directory override");
        sub->add_option("--policy", o.policy, "dynamic | fixed:N | always | never");
        sub->add_option("--preset", o.preset, "conservative | moderate | aggressive | full");
        sub->add_option("--thresholds", o.thresholds, "Calibration file from `calibrate`");
        sub->add_flag("--dry-run", o.dry_run, "Validate and describe the work without writing output");
    };
    auto* calibrate = app.add_subcommand("calibrate", "Fit trigger thresholds on a stable workload");
    auto* run = app.add_subcommand("run", "Simulate one decode run and write its report");
    auto* sweep = app.add_subcommand("sweep", "Run the budget x context_length x policy grid");
    auto* validate = app.add_subcommand("validate", "Check a configuration and print it with defaults filled in");
    for (auto* sub : {calibrate, run, sweep, validate}) add_common(sub);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*calibrate) return cmd_calibrate(o);
        if (*run) return cmd_run(o);
        if (*sweep) return cmd_sweep(o);
        if (*validate) return cmd_validate(o);
    } catch (const chess::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
