// SPDX-License-Identifier: Apache-2.0

#pragma once

// JSON and CSV encodings of the library's data: page dumps, index snapshots,
// calibration files, selection traces and run reports.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chess/errors.hpp"
#include "chess/kv_store.hpp"
#include "chess/semantic_index.hpp"
#include "chess/simulator.hpp"
#include "chess/uncertainty.hpp"

namespace chess::io {

using json = nlohmann::json;

/// Page dump: {"page_id", "page_size", "dim", "fill", "keys", "values"}; keys and
/// values hold the first `fill` rows flattened row-major as float64.
inline json page_to_json(PageId id, const KvPage& page) {
    std::vector<double> keys, values;
    keys.reserve(page.fill() * page.dim());
    values.reserve(page.fill() * page.dim());
    for (std::size_t r = 0; r < page.fill(); ++r) {
        const auto k = page.key(r);
        const auto v = page.value(r);
        keys.insert(keys.end(), k.begin(), k.end());
        values.insert(values.end(), v.begin(), v.end());
    }
    return {{"page_id", id.value}, {"page_size", page.capacity()}, {"dim", page.dim()},
            {"fill", page.fill()},   {"keys", keys},                  {"values", values}};
}

inline std::pair<PageId, KvPage> page_from_json(const json& j) {
    try {
        const auto page_size = j.at("page_size").get<std::size_t>();
        const auto dim = j.at("dim").get<std::size_t>();
        const auto fill = j.at("fill").get<std::size_t>();
        const auto keys = j.at("keys").get<std::vector<double>>();
        const auto values = j.at("values").get<std::vector<double>>();
        if (fill > page_size || keys.size() != fill * dim || values.size() != fill * dim) {
            throw InputError("page dump: payload size does not match fill x dim");
        }
        Matrix k(fill, dim), v(fill, dim);
        std::copy(keys.begin(), keys.end(), k.data().begin());
        std::copy(values.begin(), values.end(), v.data().begin());
        return {PageId{j.at("page_id").get<std::size_t>()}, KvPage::from_rows(page_size, k, v)};
    } catch (const json::exception& e) {
        throw InputError(std::string("page dump: ") + e.what());
    }
}

inline json index_snapshot(const HierarchyIndex& index) {
    return {{"N_c", index.pages_per_chunk()},
            {"N_g", index.chunks_per_grid()},
            {"P", index.page_count()},
            {"C", index.chunk_count()},
            {"G", index.grid_count()},
            {"checksums",
             {{"V_p", checksum(index.page_vectors().data())},
              {"V_c", checksum(index.chunk_vectors().data())},
              {"V_g", checksum(index.grid_vectors().data())}}}};
}

/// Calibration file: {"percentile", "tau_H", "tau_V", "sample_count", "created_from"}.
inline json thresholds_to_json(const TriggerThresholds& t, const std::string& created_from) {
    return {{"percentile", t.percentile},
            {"tau_H", t.tau_entropy},
            {"tau_V", t.tau_varentropy},
            {"sample_count", t.sample_count},
            {"created_from", created_from}};
}

inline TriggerThresholds thresholds_from_json(const json& j) {
    try {
        TriggerThresholds t;
        t.percentile = j.at("percentile").get<double>();
        t.tau_entropy = j.at("tau_H").get<double>();
        t.tau_varentropy = j.at("tau_V").get<double>();
        t.sample_count = j.at("sample_count").get<std::size_t>();
        if (!(t.percentile > 0.0 && t.percentile < 1.0)) throw InputError("calibration file: percentile outside (0,1)");
        return t;
    } catch (const json::exception& e) {
        throw InputError(std::string("calibration file: ") + e.what());
    }
}

inline json trace_to_json(const SelectionTrace& t) {
    std::vector<std::string> provenance;
    for (Provenance p : t.working_set.provenance) provenance.emplace_back(to_string(p));
    return {{"step", t.step},
            {"anchor_checksum", t.anchor_checksum},
            {"counts",
             {{"G", t.split.grids},
              {"C", t.split.chunks},
              {"P", t.split.pages},
              {"selected_g", t.selected_grids},
              {"selected_c", t.selected_chunks},
              {"selected_p", t.selected_pages}}},
            {"working_set", t.working_set.pages},
            {"provenance", provenance}};
}

inline json step_to_json(const StepRecord& r) {
    return {{"step", r.step},
            {"sealed_pages", r.sealed_pages},
            {"working_set_size", r.working_set_size},
            {"semantic_pages", r.semantic_pages},
            {"budget_fraction_semantic", r.budget_fraction_semantic},
            {"budget_fraction_total", r.budget_fraction_total},
            {"recall", r.recall},
            {"precision", r.precision},
            {"oracle_recall", r.oracle_recall},
            {"reconstructed", r.reconstructed},
            {"trigger_fired", r.trigger_fired},
            {"selection_ops", r.selection_ops},
            {"attention_ops", r.attention_ops},
            {"mean_entropy", r.mean_entropy},
            {"varentropy", r.varentropy}};
}

inline json summary_to_json(const RunSummary& s) {
    return {{"steps", s.steps},
            {"relevant_pages", s.relevant_pages},
            {"mean_recall", s.mean_recall},
            {"mean_precision", s.mean_precision},
            {"mean_oracle_recall", s.mean_oracle_recall},
            {"mean_budget_semantic", s.mean_budget_semantic},
            {"mean_budget_total", s.mean_budget_total},
            {"reconstructions", s.reconstructions},
            {"trigger_count", s.trigger_count},
            {"mean_inter_trigger_gap", s.mean_inter_trigger_gap},
            {"max_working_set", s.max_working_set},
            {"total_selection_ops", s.total_selection_ops},
            {"total_attention_ops", s.total_attention_ops},
            {"zero_copy_violations", s.zero_copy_violations}};
}

inline json report_summary_to_json(const RunReport& report) {
    json j = summary_to_json(report.summary);
    j["selection_overhead"] = selection_overhead_profile(report);
    return j;
}

/// Minimal CSV table: a header row and rows of preformatted cells.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : m_header(std::move(header)) {}

    template <typename... Cells>
    void add_row(const Cells&... cells) {
        std::vector<std::string> row;
        (row.push_back(cell(cells)), ...);
        if (row.size() != m_header.size()) throw ShapeError("CsvTable: row width differs from header");
        m_rows.push_back(std::move(row));
    }

    void write(std::ostream& os) const {
        write_line(os, m_header);
        for (const auto& r : m_rows) write_line(os, r);
    }

    std::size_t rows() const noexcept { return m_rows.size(); }

private:
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    static std::string cell(bool b) { return b ? "1" : "0"; }
    static std::string cell(double d) {
        std::ostringstream os;
        os << std::setprecision(17) << d;
        return os.str();
    }
    template <typename T>
    static std::string cell(const T& v) {
        return std::to_string(v);
    }

    static void write_line(std::ostream& os, const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
        os << '\n';
    }

    std::vector<std::string> m_header;
    std::vector<std::vector<std::string>> m_rows;
};

inline CsvTable steps_csv(const RunReport& report) {
    CsvTable t({"step", "sealed_pages", "working_set_size", "semantic_pages", "budget_fraction_semantic",
                "budget_fraction_total", "recall", "precision", "oracle_recall", "reconstructed", "trigger_fired",
                "selection_ops", "attention_ops", "mean_entropy", "varentropy"});
    for (const auto& r : report.steps) {
        t.add_row(r.step, r.sealed_pages, r.working_set_size, r.semantic_pages, r.budget_fraction_semantic,
                  r.budget_fraction_total, r.recall, r.precision, r.oracle_recall, r.reconstructed, r.trigger_fired,
                  r.selection_ops, r.attention_ops, r.mean_entropy, r.varentropy);
    }
    return t;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    os << text;
    if (!os) throw IoError("failed writing '" + path.string() + "'");
}

inline json read_json(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path.string() + "'");
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw InputError("'" + path.string() + "': " + e.what());
    }
}

/// Writes `<dir>/trace.jsonl`, `<dir>/steps.jsonl`, `<dir>/summary.json` and `<dir>/steps.csv`.
inline void write_report(const std::filesystem::path& dir, const RunReport& report, const json& extra_summary = {}) {
    std::ostringstream trace, steps, csv;
    for (const auto& t : report.traces) trace << trace_to_json(t).dump() << '\n';
    for (const auto& s : report.steps) steps << step_to_json(s).dump() << '\n';
    steps_csv(report).write(csv);
    json summary = report_summary_to_json(report);
    if (extra_summary.is_object()) summary.update(extra_summary);
    write_text(dir / "trace.jsonl", trace.str());
    write_text(dir / "steps.jsonl", steps.str());
    write_text(dir / "steps.csv", csv.str());
    write_text(dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace chess::io
