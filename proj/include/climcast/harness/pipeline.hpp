#pragma once

// One (city, model) pair: split, scale, fit or train, evaluate on the held-out part, and
// forecast past the end of the data.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "climcast/arima.hpp"
#include "climcast/harness/config.hpp"
#include "climcast/harness/io.hpp"
#include "climcast/ingest.hpp"
#include "climcast/lstm.hpp"
#include "climcast/metrics.hpp"
#include "climcast/series.hpp"
#include "climcast/snn.hpp"

namespace climcast::harness {

inline constexpr std::size_t kSeason = 12;

/// Series indices read while fitting, grouped by phase ("scaler", "fit").
class IndexAudit {
public:
    void record(const std::string& phase, std::size_t index) { phases_[phase].insert(index); }
    void record_range(const std::string& phase, std::size_t first, std::size_t last_exclusive) {
        auto& s = phases_[phase];
        for (std::size_t i = first; i < last_exclusive; ++i) s.insert(i);
    }
    [[nodiscard]] const std::map<std::string, std::set<std::size_t>>& phases() const { return phases_; }
    [[nodiscard]] std::set<std::size_t> all() const {
        std::set<std::size_t> out;
        for (const auto& [_, s] : phases_) out.insert(s.begin(), s.end());
        return out;
    }

private:
    std::map<std::string, std::set<std::size_t>> phases_;
};

struct CityInput {
    std::string name;
    std::string country;
    TimeSeries temps;
    std::optional<TimeSeries> co2;  ///< aligned to temps
    std::string co2_problem;        ///< why co2 is absent
};

struct ModelRun {
    std::vector<std::size_t> test_index;  ///< series index of each evaluated target
    std::vector<double> actual, predicted;
    std::vector<double> actual_scaled, predicted_scaled;
    std::vector<double> baseline, baseline_scaled;  ///< seasonal naive on the same targets
    std::string forecast_csv;
    std::vector<EpochLoss> history;
    std::optional<nlohmann::json> checkpoint;
    nlohmann::json details = nlohmann::json::object();
};

namespace detail {

inline std::string point_forecast_csv(const TimeSeries& temps, const std::vector<double>& mean,
                                      const std::vector<double>* lower = nullptr,
                                      const std::vector<double>* upper = nullptr) {
    std::ostringstream out;
    out << "step,month,mean,lower,upper\n";
    for (std::size_t h = 0; h < mean.size(); ++h) {
        out << (h + 1) << ',' << temps.month_at(temps.size() + h).to_string() << ',' << fmt_num(mean[h]) << ','
            << (lower ? fmt_num((*lower)[h]) : "") << ',' << (upper ? fmt_num((*upper)[h]) : "") << '\n';
    }
    return out.str();
}

inline std::vector<double> gather(std::span<const double> values, std::span<const std::size_t> idx) {
    std::vector<double> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(values[i]);
    return out;
}

inline void fill_baseline(ModelRun& run, std::span<const double> y, const series::ScalerParams& scaler) {
    for (auto t : run.test_index) {
        if (t < kSeason) throw InsufficientDataError("test target precedes one full season of history");
        run.baseline.push_back(y[t - kSeason]);
        run.baseline_scaled.push_back(scaler.apply(y[t - kSeason]));
    }
}

inline series::SplitIndices chronological_split(std::size_t n) {
    return series::split_80_20(n, series::SplitMode::Chronological);
}

inline ModelRun run_arima(const ExperimentConfig& cfg, const CityInput& city, bool exogenous, IndexAudit* audit) {
    const auto y = city.temps.values();
    const auto n = y.size();
    const auto split = chronological_split(n);
    const std::size_t n_train = split.train.size();
    if (exogenous && !city.co2) throw std::runtime_error(city.co2_problem);

    const auto train = gather(y, split.train);
    if (audit) {
        audit->record_range("scaler", 0, n_train);
        audit->record_range("fit", 0, n_train);
    }
    const auto scaler = series::fit_minmax(train);
    const auto& spec = exogenous ? cfg.sarimax_spec : cfg.arima_spec;

    std::optional<std::span<const double>> exog_train;
    if (exogenous) exog_train = city.co2->values().first(n_train);
    const auto fitted = arima::fit(train, spec, exog_train, exogenous ? cfg.sarimax_fit : cfg.arima_fit);

    // Parameters stay fixed; the full history only supplies lagged values for one-step predictions.
    const auto conditioned =
        arima::condition_on(fitted, y, exogenous ? city.co2->values() : std::span<const double>{});
    const auto one_step = arima::one_step_predictions(conditioned);

    ModelRun run;
    for (std::size_t t = n_train; t < n; ++t) {
        if (t < one_step.first_index) continue;
        run.test_index.push_back(t);
        run.actual.push_back(y[t]);
        run.predicted.push_back(one_step.values[t - one_step.first_index]);
        run.actual_scaled.push_back(scaler.apply(y[t]));
        run.predicted_scaled.push_back(scaler.apply(run.predicted.back()));
    }
    fill_baseline(run, y, scaler);

    std::optional<std::vector<double>> future_exog;
    if (exogenous) {
        // Emissions are held at their last observed level beyond the data.
        future_exog = std::vector<double>(static_cast<std::size_t>(cfg.horizon), city.co2->values().back());
    }
    const auto fc = arima::forecast(conditioned, cfg.horizon,
                                    future_exog ? std::optional<std::span<const double>>(*future_exog) : std::nullopt);
    run.forecast_csv = point_forecast_csv(city.temps, fc.mean, &fc.lower, &fc.upper);
    run.checkpoint = arima::to_json(fitted);
    run.details["spec"] = spec.to_string();
    run.details["converged"] = fitted.converged;
    run.details["aic"] = fitted.aic;
    run.details["bic"] = fitted.bic;
    if (exogenous) run.details["beta_exog"] = fitted.beta_exog;
    return run;
}

inline ModelRun run_seasonal_naive(const ExperimentConfig& cfg, const CityInput& city, IndexAudit* audit) {
    const auto y = city.temps.values();
    const auto n = y.size();
    if (n < 2 * kSeason) throw InsufficientDataError("seasonal naive needs two full seasons");
    const auto split = chronological_split(n);
    const std::size_t n_train = split.train.size();
    if (audit) audit->record_range("scaler", 0, n_train);
    const auto scaler = series::fit_minmax(gather(y, split.train));
    ModelRun run;
    for (std::size_t t = std::max(n_train, kSeason); t < n; ++t) run.test_index.push_back(t);
    fill_baseline(run, y, scaler);
    for (auto t : run.test_index) {
        run.actual.push_back(y[t]);
        run.actual_scaled.push_back(scaler.apply(y[t]));
    }
    run.predicted = run.baseline;
    run.predicted_scaled = run.baseline_scaled;
    std::vector<double> mean;
    for (int h = 0; h < cfg.horizon; ++h) mean.push_back(y[n - kSeason + static_cast<std::size_t>(h) % kSeason]);
    run.forecast_csv = point_forecast_csv(city.temps, mean);
    return run;
}

/// Window split shared by the neural models; the scaler sees only values that training windows touch.
struct WindowPlan {
    series::SplitIndices split;
    std::vector<std::size_t> touched;
    series::ScalerParams scaler;
    std::vector<double> scaled;
    series::WindowedDataset windows;
};

inline WindowPlan plan_windows(const ExperimentConfig& cfg, std::span<const double> y, std::size_t window_len,
                               IndexAudit* audit) {
    if (y.size() <= window_len + kSeason) {
        throw InsufficientDataError("series of " + std::to_string(y.size()) + " months is too short for window " +
                                    std::to_string(window_len));
    }
    WindowPlan plan;
    plan.split = series::split_80_20(y.size() - window_len, cfg.split_mode, cfg.seed);
    std::set<std::size_t> touched;
    for (auto i : plan.split.train) {
        for (std::size_t k = 0; k <= window_len; ++k) touched.insert(i + k);
    }
    plan.touched.assign(touched.begin(), touched.end());
    if (audit) {
        for (auto i : plan.touched) {
            audit->record("scaler", i);
            audit->record("fit", i);
        }
    }
    plan.scaler = series::fit_minmax(gather(y, plan.touched));
    plan.scaled = plan.scaler.apply(y);
    plan.windows = series::make_windows(plan.scaled, window_len);
    std::sort(plan.split.test.begin(), plan.split.test.end());
    return plan;
}

inline ModelRun run_lstm(const ExperimentConfig& cfg, const CityInput& city, IndexAudit* audit) {
    const auto y = city.temps.values();
    auto tc = cfg.lstm.train;
    tc.seed = cfg.seed;
    const auto plan = plan_windows(cfg, y, tc.window_len, audit);
    const auto trained = lstm::train(plan.windows.subset(plan.split.train), tc);

    const auto test = plan.windows.subset(plan.split.test);
    const Eigen::VectorXd pred = lstm::predict(trained.params, test.inputs);
    ModelRun run;
    for (std::size_t k = 0; k < plan.split.test.size(); ++k) {
        const std::size_t t = plan.split.test[k] + tc.window_len;
        run.test_index.push_back(t);
        run.actual.push_back(y[t]);
        run.actual_scaled.push_back(plan.scaled[t]);
        run.predicted_scaled.push_back(pred(static_cast<Eigen::Index>(k)));
        run.predicted.push_back(plan.scaler.invert(run.predicted_scaled.back()));
    }
    fill_baseline(run, y, plan.scaler);

    const std::span<const double> last_window(plan.scaled.data() + plan.scaled.size() - tc.window_len, tc.window_len);
    auto fc = lstm::forecast_recursive(trained.params, last_window, cfg.horizon);
    for (auto& v : fc) v = plan.scaler.invert(v);
    run.forecast_csv = point_forecast_csv(city.temps, fc);
    run.history = trained.history;
    run.details["best_epoch"] = trained.best_epoch;
    auto ck = lstm::checkpoint_json(trained.params);
    ck["scaler"] = {{"min", plan.scaler.min}, {"max", plan.scaler.max}};
    run.checkpoint = std::move(ck);
    run.details["window_len"] = tc.window_len;
    run.details["split"] = cfg.split_mode == series::SplitMode::Chronological ? "chronological" : "shuffled";
    return run;
}

inline ModelRun run_snn(const ExperimentConfig& cfg, const CityInput& city, IndexAudit* audit,
                        const fs::path& pair_dir) {
    const auto y = city.temps.values();
    auto tc = cfg.snn.train;
    tc.seed = cfg.seed;
    const auto plan = plan_windows(cfg, y, tc.window_len, audit);
    const auto batch = series::encode_latency(plan.windows, cfg.snn.time_steps);
    const auto trained = snn::train_snn(batch.subset(plan.split.train), tc, cfg.snn.lif);

    const auto test = batch.subset(plan.split.test);
    const auto forecasts = snn::predict(trained.params, test);
    ModelRun run;
    std::vector<int> truth, guess, naive;
    std::ostringstream fc;
    fc << "month,target,binary_prediction,spike_count,surrogate_rate\n";
    for (std::size_t k = 0; k < plan.split.test.size(); ++k) {
        const std::size_t t = plan.split.test[k] + tc.window_len;
        if (t < kSeason) throw InsufficientDataError("test target precedes one full season of history");
        const int label = test.binary_targets[k];
        const int pred = forecasts[k].binary_prediction;
        const int base = plan.scaled[t - kSeason] >= series::kSpikeClassThreshold ? 1 : 0;
        truth.push_back(label);
        guess.push_back(pred);
        naive.push_back(base);
        run.test_index.push_back(t);
        for (auto* v : {&run.actual, &run.actual_scaled}) v->push_back(label);
        for (auto* v : {&run.predicted, &run.predicted_scaled}) v->push_back(pred);
        for (auto* v : {&run.baseline, &run.baseline_scaled}) v->push_back(base);
        fc << city.temps.month_at(t).to_string() << ',' << label << ',' << pred << ',' << forecasts[k].spike_count
           << ',' << fmt_num(forecasts[k].surrogate_rate) << '\n';
    }
    run.forecast_csv = fc.str();
    run.history = trained.history;
    run.details["best_epoch"] = trained.best_epoch;
    auto ck = snn::checkpoint_json(trained.params);
    ck["scaler"] = {{"min", plan.scaler.min}, {"max", plan.scaler.max}};
    ck["time_steps"] = cfg.snn.time_steps;
    run.checkpoint = std::move(ck);
    const double miss = metrics::evaluate_binary(truth, guess);
    run.details["misclassification_rate"] = miss;
    run.details["accuracy"] = 1.0 - miss;
    run.details["baseline_misclassification_rate"] = metrics::evaluate_binary(truth, naive);
    run.details["time_window"] = tc.window_len;
    run.details["time_steps"] = cfg.snn.time_steps;
    if (cfg.snn.write_raster) {
        std::ostringstream raster;
        snn::write_spike_raster_csv(raster, test);
        write_text(pair_dir / "spike_raster.csv", raster.str());
    }
    return run;
}

}  // namespace detail

/// Runs one model on one city. Throws on failure; the caller isolates errors.
inline ModelRun run_model(const ExperimentConfig& cfg, const CityInput& city, const std::string& model,
                          IndexAudit* audit = nullptr, const fs::path& pair_dir = {}) {
    if (model == "arima") return detail::run_arima(cfg, city, false, audit);
    if (model == "sarimax") return detail::run_arima(cfg, city, true, audit);
    if (model == "lstm") return detail::run_lstm(cfg, city, audit);
    if (model == "snn") return detail::run_snn(cfg, city, audit, pair_dir);
    if (model == "seasonal_naive") return detail::run_seasonal_naive(cfg, city, audit);
    throw std::invalid_argument("unknown model '" + model + "'");
}

struct PairReports {
    metrics::EvalReport physical;
    metrics::EvalReport scaled;
    metrics::EvalReport baseline_physical;
    metrics::EvalReport baseline_scaled;
};

inline PairReports make_reports(const ModelRun& run, const std::string& model, const std::string& city, int horizon) {
    return {metrics::make_report(model, city, horizon, run.actual, run.predicted),
            metrics::make_report(model, city, horizon, run.actual_scaled, run.predicted_scaled),
            metrics::make_report("seasonal_naive", city, horizon, run.actual, run.baseline),
            metrics::make_report("seasonal_naive", city, horizon, run.actual_scaled, run.baseline_scaled)};
}

/// Writes report.json, predictions.csv, forecast.csv, loss.csv and checkpoint.json; returns
/// the chosen-space report and the file names written.
inline std::pair<metrics::EvalReport, std::vector<std::string>> write_pair_artifacts(
    const fs::path& dir, const ExperimentConfig& cfg, const ModelRun& run, const std::string& model,
    const std::string& city, const TimeSeries& temps) {
    const auto reports = make_reports(run, model, city, cfg.horizon);
    const bool physical = cfg.metric_space == MetricSpace::Physical;
    const auto& chosen = physical ? reports.physical : reports.scaled;
    std::vector<std::string> files;

    nlohmann::json rj{{"model", model},
                      {"city", city},
                      {"metric_space", physical ? "physical" : "scaled"},
                      {"report", metrics::to_json(chosen)},
                      {"physical", metrics::to_json(reports.physical)},
                      {"scaled", metrics::to_json(reports.scaled)},
                      {"baseline",
                       {{"model", "seasonal_naive"},
                        {"physical", metrics::to_json(reports.baseline_physical)},
                        {"scaled", metrics::to_json(reports.baseline_scaled)}}},
                      {"details", run.details}};
    write_json(dir / "report.json", rj);
    files.push_back("report.json");

    std::ostringstream pred;
    pred << "index,month,actual,predicted,actual_scaled,predicted_scaled,baseline\n";
    for (std::size_t k = 0; k < run.test_index.size(); ++k) {
        pred << run.test_index[k] << ',' << temps.month_at(run.test_index[k]).to_string() << ',' << fmt_num(run.actual[k]) << ',' << fmt_num(run.predicted[k])
             << ',' << fmt_num(run.actual_scaled[k]) << ',' << fmt_num(run.predicted_scaled[k]) << ','
             << fmt_num(run.baseline[k]) << '\n';
    }
    write_text(dir / "predictions.csv", pred.str());
    files.push_back("predictions.csv");

    write_text(dir / "forecast.csv", run.forecast_csv);
    files.push_back("forecast.csv");
    if (!run.history.empty()) {
        std::ostringstream loss;
        write_loss_csv(loss, run.history);
        write_text(dir / "loss.csv", loss.str());
        files.push_back("loss.csv");
    }
    if (run.checkpoint) {
        write_json(dir / "checkpoint.json", *run.checkpoint);
        files.push_back("checkpoint.json");
    }
    if (fs::exists(dir / "spike_raster.csv")) files.push_back("spike_raster.csv");
    return {chosen, files};
}

}  // namespace climcast::harness
