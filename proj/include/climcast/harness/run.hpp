#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "climcast/error.hpp"
#include "climcast/harness/config.hpp"
#include "climcast/harness/io.hpp"
#include "climcast/harness/pipeline.hpp"
#include "climcast/ingest.hpp"
#include "climcast/metrics.hpp"
#include "climcast/random.hpp"

namespace climcast::harness {

enum class PairStatus { Success, Failed, Skipped };

inline std::string to_string(PairStatus s) {
    switch (s) {
        case PairStatus::Success: return "success";
        case PairStatus::Failed: return "failed";
        case PairStatus::Skipped: return "skipped";
    }
    return "failed";
}

struct PairRecord {
    std::string city;
    std::string model;
    PairStatus status = PairStatus::Failed;
    std::string reason;
    double wall_seconds = 0.0;
    std::vector<std::string> artifacts;  ///< relative to the run directory
    std::optional<metrics::EvalReport> report;
};

struct RunManifest {
    std::string tool_version = kToolVersion;
    std::string config_hash;
    nlohmann::json config;
    std::vector<std::string> cities;
    std::vector<std::string> models;
    std::optional<std::string> comparison_city;
    std::vector<PairRecord> pairs;

    /// 0 when nothing failed, 2 otherwise. Skipped pairs are not failures.
    [[nodiscard]] int exit_code() const {
        return std::any_of(pairs.begin(), pairs.end(), [](const PairRecord& p) { return p.status == PairStatus::Failed; })
                   ? 2
                   : 0;
    }
};

inline nlohmann::json to_json(const RunManifest& m) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : m.pairs) {
        pairs.push_back({{"city", p.city},
                         {"model", p.model},
                         {"status", to_string(p.status)},
                         {"reason", p.reason},
                         {"wall_time_s", p.wall_seconds},
                         {"artifacts", p.artifacts}});
    }
    return {{"tool_version", m.tool_version},
            {"config_hash", m.config_hash},
            {"config", m.config},
            {"cities", m.cities},
            {"models", m.models},
            {"comparison_city", m.comparison_city ? nlohmann::json(*m.comparison_city) : nlohmann::json(nullptr)},
            {"pairs", pairs}};
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
    RunManifest m;
    m.tool_version = j.at("tool_version").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.config = j.value("config", nlohmann::json::object());
    m.cities = j.at("cities").get<std::vector<std::string>>();
    m.models = j.at("models").get<std::vector<std::string>>();
    if (j.contains("comparison_city") && !j.at("comparison_city").is_null()) {
        m.comparison_city = j.at("comparison_city").get<std::string>();
    }
    for (const auto& pj : j.at("pairs")) {
        PairRecord p;
        p.city = pj.at("city").get<std::string>();
        p.model = pj.at("model").get<std::string>();
        const auto status = pj.at("status").get<std::string>();
        p.status = status == "success" ? PairStatus::Success
                   : status == "skipped" ? PairStatus::Skipped
                                         : PairStatus::Failed;
        p.reason = pj.value("reason", "");
        p.wall_seconds = pj.value("wall_time_s", 0.0);
        p.artifacts = pj.value("artifacts", std::vector<std::string>{});
        m.pairs.push_back(std::move(p));
    }
    return m;
}

/// The spiking model predicts a binary class, so its MSE is a misclassification rate.
inline bool is_classifier(std::string_view model) { return model == "snn"; }

inline const char* task_of(std::string_view model) { return is_classifier(model) ? "classification" : "regression"; }

/**
 * Per city, successful pairs ordered by MSE within each task (regression models first,
 * then classifiers); ties keep model-name order. Rank starts at 1 within each task.
 */
inline std::vector<std::pair<metrics::EvalReport, int>> rank_reports(const std::vector<std::string>& cities,
                                                                     const std::vector<metrics::EvalReport>& reports) {
    std::vector<std::pair<metrics::EvalReport, int>> out;
    for (const auto& city : cities) {
        for (bool classifier : {false, true}) {
            std::vector<metrics::EvalReport> rows;
            for (const auto& r : reports) {
                if (r.city == city && is_classifier(r.model_name) == classifier) rows.push_back(r);
            }
            std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.model_name < b.model_name; });
            std::stable_sort(rows.begin(), rows.end(),
                             [](const auto& a, const auto& b) { return a.scores.mse < b.scores.mse; });
            for (std::size_t i = 0; i < rows.size(); ++i) out.emplace_back(rows[i], static_cast<int>(i + 1));
        }
    }
    return out;
}

/// Long-format table: one row per successful (city, model) pair.
inline std::string comparison_csv(const std::vector<std::string>& cities,
                                  const std::vector<metrics::EvalReport>& reports) {
    std::ostringstream out;
    out << metrics::kReportCsvHeader << ",task,rank\n";
    for (const auto& [r, rank] : rank_reports(cities, reports)) {
        out << metrics::to_csv_row(r) << ',' << task_of(r.model_name) << ',' << rank << '\n';
    }
    return out.str();
}

struct RunOptions {
    std::size_t jobs = 1;
    std::ostream* log = nullptr;  ///< progress lines when set
    /// When set, receives the index audit of every (city, model) pair.
    std::map<std::pair<std::string, std::string>, IndexAudit>* audits = nullptr;
};

namespace detail {

struct CitySelection {
    std::string name;                  ///< as requested / displayed
    std::optional<CityKey> key;        ///< resolved key
    std::string problem;               ///< why unresolved
};

inline std::vector<CitySelection> select_cities(const ExperimentConfig& cfg, const std::set<CityKey>& available) {
    std::vector<CitySelection> out;
    if (cfg.random_cities) {
        std::vector<CityKey> keys(available.begin(), available.end());
        Rng rng(cfg.seed);
        shuffle(std::span<CityKey>(keys), rng);
        keys.resize(std::min(keys.size(), *cfg.random_cities));
        std::sort(keys.begin(), keys.end());
        for (const auto& k : keys) out.push_back({k.city + "/" + k.country, k, {}});
        return out;
    }
    for (const auto& name : cfg.cities) {
        CitySelection sel{name, std::nullopt, {}};
        const auto slash = name.find('/');
        std::vector<CityKey> matches;
        for (const auto& k : available) {
            const bool hit = slash == std::string::npos
                                 ? k.city == name
                                 : (k.city == name.substr(0, slash) && k.country == name.substr(slash + 1));
            if (hit) matches.push_back(k);
        }
        if (matches.empty()) {
            sel.problem = "city not found in temperature data";
        } else if (matches.size() > 1) {
            sel.problem = "city name is ambiguous; use City/Country";
        } else {
            sel.key = matches.front();
        }
        out.push_back(std::move(sel));
    }
    return out;
}

inline std::set<CityKey> list_cities(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open temperature CSV " + path.generic_string());
    std::set<CityKey> keys;
    parse_temperature_csv(in, [&](const CityKey& k) {
        keys.insert(k);
        return false;
    });
    return keys;
}

}  // namespace detail

/**
 * Executes every requested (city, model) pair and writes the run directory.
 *
 * Input files that cannot be opened or parsed throw (fatal). Anything that goes wrong inside
 * a pair is caught and recorded in the manifest.
 */
inline RunManifest run(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
    cfg.validate();
    std::mutex log_mutex;
    auto log = [&](const std::string& line) {
        if (!opts.log) return;
        std::lock_guard lock(log_mutex);
        *opts.log << line << '\n';
    };

    const auto selection = detail::select_cities(cfg, detail::list_cities(cfg.temperature_csv));
    std::set<CityKey> wanted;
    for (const auto& s : selection) {
        if (s.key) wanted.insert(*s.key);
    }
    std::map<CityKey, std::vector<RawRecord>> by_city;
    {
        std::ifstream in(cfg.temperature_csv, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open temperature CSV " + cfg.temperature_csv.generic_string());
        by_city = split_by_city(parse_temperature_csv(in, [&](const CityKey& k) { return wanted.count(k) > 0; }));
    }

    const bool needs_co2 = std::find(cfg.models.begin(), cfg.models.end(), "sarimax") != cfg.models.end();
    std::optional<std::vector<Co2Record>> co2;
    if (needs_co2 && cfg.co2_csv) {
        std::ifstream in(*cfg.co2_csv, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open CO2 CSV " + cfg.co2_csv->generic_string());
        co2 = parse_co2_csv(in, cfg.co2_columns);
    }

    RunManifest manifest;
    manifest.config_hash = config_hash(cfg);
    manifest.config = to_json(cfg);
    manifest.config.erase("output_dir");
    manifest.models = cfg.models;
    manifest.comparison_city = cfg.comparison_city;

    struct Task {
        std::size_t city_index;
        std::string model;
    };
    std::vector<std::optional<CityInput>> inputs(selection.size());
    std::vector<std::string> city_problem(selection.size());
    std::vector<bool> city_skipped(selection.size(), false);
    std::vector<Task> tasks;

    fs::create_directories(cfg.output_dir);
    for (std::size_t c = 0; c < selection.size(); ++c) {
        const auto& sel = selection[c];
        manifest.cities.push_back(sel.name);
        if (!sel.key) {
            city_problem[c] = sel.problem;
        } else {
            try {
                auto temps = repair_and_resample(by_city.at(*sel.key), cfg.min_months);
                CityInput input{sel.name, sel.key->country, std::move(temps), std::nullopt, {}};
                if (needs_co2) {
                    if (!co2) {
                        input.co2_problem = "sarimax requires co2_csv in the config";
                    } else {
                        try {
                            input.co2 = align_exogenous(input.temps, *co2, sel.key->country);
                        } catch (const AlignmentError& e) {
                            input.co2_problem = e.what();
                        }
                    }
                }
                std::ostringstream hist;
                hist << "index,month,value\n";
                for (std::size_t i = 0; i < input.temps.size(); ++i) {
                    hist << i << ',' << input.temps.month_at(i).to_string() << ','
                         << fmt_num(input.temps.values()[i]) << '\n';
                }
                write_text(cfg.output_dir / sanitize_name(sel.name) / "history.csv", hist.str());
                inputs[c] = std::move(input);
            } catch (const InsufficientDataError& e) {
                city_skipped[c] = true;
                city_problem[c] = std::string("insufficient data: ") + e.what();
            }
        }
        for (const auto& m : cfg.models) tasks.push_back({c, m});
    }

    std::vector<PairRecord> records(tasks.size());
    std::vector<IndexAudit> audits(tasks.size());
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (std::size_t t = next++; t < tasks.size(); t = next++) {
            const auto& task = tasks[t];
            PairRecord& rec = records[t];
            rec.city = selection[task.city_index].name;
            rec.model = task.model;
            if (!inputs[task.city_index]) {
                rec.status = city_skipped[task.city_index] ? PairStatus::Skipped : PairStatus::Failed;
                rec.reason = city_problem[task.city_index];
                log(rec.city + " / " + rec.model + ": " + to_string(rec.status) + " (" + rec.reason + ")");
                continue;
            }
            const auto& input = *inputs[task.city_index];
            const auto rel = fs::path(sanitize_name(rec.city)) / sanitize_name(rec.model);
            const auto dir = cfg.output_dir / rel;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                fs::create_directories(dir);
                const auto result = run_model(cfg, input, task.model, opts.audits ? &audits[t] : nullptr, dir);
                auto [report, files] = write_pair_artifacts(dir, cfg, result, task.model, rec.city, input.temps);
                rec.report = report;
                for (const auto& f : files) rec.artifacts.push_back((rel / f).generic_string());
                rec.status = PairStatus::Success;
            } catch (const InsufficientDataError& e) {
                rec.status = PairStatus::Skipped;
                rec.reason = std::string("insufficient data: ") + e.what();
            } catch (const std::exception& e) {
                rec.status = PairStatus::Failed;
                rec.reason = e.what();
            }
            rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            log(rec.city + " / " + rec.model + ": " + to_string(rec.status) +
                (rec.reason.empty() ? "" : " (" + rec.reason + ")"));
        }
    };

    const std::size_t n_threads = std::max<std::size_t>(1, std::min(opts.jobs, tasks.size()));
    if (n_threads == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(work);
    }

    std::vector<metrics::EvalReport> reports;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        if (records[t].report) reports.push_back(*records[t].report);
        if (opts.audits) (*opts.audits)[{records[t].city, records[t].model}] = std::move(audits[t]);
    }
    manifest.pairs = std::move(records);
    write_text(cfg.output_dir / "comparison.csv", comparison_csv(manifest.cities, reports));
    write_json(cfg.output_dir / "manifest.json", to_json(manifest));
    return manifest;
}

}  // namespace climcast::harness
