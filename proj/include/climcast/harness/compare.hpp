#pragma once

#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "climcast/harness/io.hpp"
#include "climcast/harness/run.hpp"
#include "climcast/metrics.hpp"

namespace climcast::harness {

struct ComparisonTable {
    std::string wide_csv;
    nlohmann::json json;
    std::string focus_csv;  ///< model,mse rows for the comparison city; empty if none
};

/// Reads every successful report of a run directory.
inline std::vector<metrics::EvalReport> load_reports(const fs::path& run_dir, const RunManifest& manifest) {
    std::vector<metrics::EvalReport> out;
    for (const auto& p : manifest.pairs) {
        if (p.status != PairStatus::Success) continue;
        const auto path = run_dir / sanitize_name(p.city) / sanitize_name(p.model) / "report.json";
        out.push_back(metrics::report_from_json(read_json(path).at("report")));
    }
    return out;
}

/**
 * Per-city rows with an MSE and rank column per model; models without a report are marked
 * "absent". Ranks are within task (see rank_reports) and best_model prefers the top regression
 * model. Also writes comparison_wide.csv, comparison.json and, when the run names a comparison
 * city, comparison_<city>.csv.
 */
inline ComparisonTable compare(const fs::path& run_dir) {
    const auto manifest_path = run_dir / "manifest.json";
    const auto manifest = manifest_from_json(read_json(manifest_path));
    const auto reports = load_reports(run_dir, manifest);
    if (reports.empty()) throw std::runtime_error("no evaluation reports in " + run_dir.generic_string());

    std::map<std::pair<std::string, std::string>, std::pair<metrics::EvalReport, int>> cell;
    for (const auto& [r, rank] : rank_reports(manifest.cities, reports)) cell.insert({{r.city, r.model_name}, {r, rank}});

    ComparisonTable table;
    std::ostringstream wide;
    wide << "city";
    for (const auto& m : manifest.models) wide << ',' << m << "_mse," << m << "_rank";
    wide << ",best_model\n";
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& city : manifest.cities) {
        wide << metrics::detail::csv_field(city);
        nlohmann::json row{{"city", city}, {"models", nlohmann::json::object()}};
        std::string best = "absent";
        for (const auto& m : manifest.models) {
            const auto it = cell.find({city, m});
            if (it == cell.end()) {
                wide << ",absent,absent";
                row["models"][m] = "absent";
                continue;
            }
            const auto& [r, rank] = it->second;
            wide << ',' << fmt_num(r.scores.mse) << ',' << rank;
            row["models"][m] = {{"mse", r.scores.mse}, {"rmse", r.scores.rmse}, {"mae", r.scores.mae},
                                {"rank", rank},           {"task", task_of(m)}};
            if (rank == 1 && (best == "absent" || !is_classifier(m))) best = m;
        }
        wide << ',' << best << '\n';
        row["best_model"] = best;
        rows.push_back(std::move(row));
    }
    table.wide_csv = wide.str();
    table.json = {{"config_hash", manifest.config_hash}, {"models", manifest.models}, {"rows", rows}};

    write_text(run_dir / "comparison_wide.csv", table.wide_csv);
    write_json(run_dir / "comparison.json", table.json);

    if (manifest.comparison_city) {
        std::ostringstream focus;
        focus << "model,mse\n";
        for (const auto& m : manifest.models) {
            const auto it = cell.find({*manifest.comparison_city, m});
            focus << m << ',' << (it == cell.end() ? std::string("absent") : fmt_num(it->second.first.scores.mse))
                  << '\n';
        }
        table.focus_csv = focus.str();
        write_text(run_dir / ("comparison_" + sanitize_name(*manifest.comparison_city) + ".csv"), table.focus_csv);
    }
    return table;
}

}  // namespace climcast::harness
