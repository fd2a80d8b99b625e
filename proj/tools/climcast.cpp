#include <cmath>
#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "climcast/climcast.hpp"

namespace {

namespace h = climcast::harness;

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, std::size_t jobs, bool verbose) {
    auto cfg = h::load_config(config_path);
    if (seed) cfg.seed = *seed;
    h::RunOptions opts;
    opts.jobs = jobs;
    if (verbose) opts.log = &std::cerr;
    const auto manifest = h::run(cfg, opts);
    std::size_t ok = 0, failed = 0, skipped = 0;
    for (const auto& p : manifest.pairs) {
        if (p.status == h::PairStatus::Success) ++ok;
        if (p.status == h::PairStatus::Failed) ++failed;
        if (p.status == h::PairStatus::Skipped) ++skipped;
    }
    std::cout << "run " << manifest.config_hash << ": " << ok << " succeeded, " << failed << " failed, " << skipped
              << " skipped -> " << cfg.output_dir.generic_string() << '\n';
    for (const auto& p : manifest.pairs) {
        if (p.status != h::PairStatus::Success) {
            std::cout << "  " << p.city << " / " << p.model << ": " << h::to_string(p.status) << " (" << p.reason
                      << ")\n";
        }
    }
    return manifest.exit_code();
}

int cmd_plots(const std::string& run_dir) {
    const auto files = h::emit_plots(run_dir);
    for (const auto& f : files) std::cout << f.generic_string() << '\n';
    return 0;
}

int cmd_compare(const std::string& run_dir) {
    const auto table = h::compare(run_dir);
    std::cout << table.wide_csv;
    if (!table.focus_csv.empty()) std::cout << '\n' << table.focus_csv;
    return 0;
}

int cmd_adf(const std::string& csv, const std::string& column, std::optional<int> max_lag) {
    const auto table = h::read_csv(csv);
    std::vector<double> values;
    for (double v : table.numbers(column, csv)) {
        if (std::isfinite(v)) values.push_back(v);
    }
    const auto r = climcast::stats::adf_test(values, max_lag);
    nlohmann::json j{{"column", column},
                     {"n_values", values.size()},
                     {"statistic", r.statistic},
                     {"lags_used", r.lags_used},
                     {"n_obs", r.n_obs},
                     {"critical_values", {{"1%", r.critical_values.one_pct}, {"5%", r.critical_values.five_pct},
                                          {"10%", r.critical_values.ten_pct}}},
                     {"stationary_at_5pct", r.is_stationary_5pct}};
    std::cout << j.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"climcast: monthly temperature forecasting experiments"};
    app.require_subcommand(1);
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
    bool verbose = false;
    app.add_option("--seed", seed, "Override the config seed");
    app.add_option("--jobs", jobs, "Parallel (city, model) pairs")->check(CLI::PositiveNumber);
    app.add_flag("--verbose,-v", verbose, "Progress on stderr");

    std::string config_path, run_dir, csv_path, column;
    std::optional<int> max_lag;
    auto* run = app.add_subcommand("run", "Run an experiment config");
    run->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
    auto* plots = app.add_subcommand("plots", "Write SVG charts for a run directory");
    plots->add_option("--run", run_dir, "Run directory")->required();
    auto* cmp = app.add_subcommand("compare", "Build the comparison tables of a run directory");
    cmp->add_option("--run", run_dir, "Run directory")->required();
    auto* adf = app.add_subcommand("adf", "Augmented Dickey-Fuller test on one CSV column");
    adf->add_option("--csv", csv_path, "Input CSV")->required()->check(CLI::ExistingFile);
    adf->add_option("--column", column, "Column name")->required();
    adf->add_option("--max-lag", max_lag, "Lag order (default: Schwert rule)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*run) return cmd_run(config_path, seed, jobs, verbose);
        if (*plots) return cmd_plots(run_dir);
        if (*cmp) return cmd_compare(run_dir);
        if (*adf) return cmd_adf(csv_path, column, max_lag);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
