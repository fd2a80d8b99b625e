#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "climcast/arima.hpp"
#include "climcast/ingest.hpp"
#include "climcast/series.hpp"
#include "climcast/snn.hpp"
#include "climcast/training.hpp"

namespace climcast::harness {

inline constexpr const char* kToolVersion = "0.1.0";

/// Thrown for unusable configuration documents (exit code 1 at the CLI).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& known_models() {
    static const std::vector<std::string> models{"arima", "sarimax", "lstm", "snn", "seasonal_naive"};
    return models;
}

enum class MetricSpace { Physical, Scaled };

struct LstmBlock {
    TrainConfig train{};
};

struct SnnBlock {
    TrainConfig train = [] {
        TrainConfig t;
        t.epochs = 100;
        t.window_len = 30;
        return t;
    }();
    std::size_t time_steps = 2;
    snn::LifConfig lif{};
    bool write_raster = false;
};

struct ExperimentConfig {
    std::filesystem::path temperature_csv;
    std::optional<std::filesystem::path> co2_csv;
    Co2Columns co2_columns{};

    std::vector<std::string> cities;   ///< explicit names ("City" or "City/Country")
    std::optional<std::size_t> random_cities;  ///< "random:k"
    std::optional<std::string> comparison_city;

    std::vector<std::string> models;
    series::SplitMode split_mode = series::SplitMode::Shuffled;  ///< neural models only; ARIMA is always chronological
    std::uint64_t seed = 0;
    int horizon = 120;
    std::size_t min_months = kMinUsableMonths;
    MetricSpace metric_space = MetricSpace::Physical;
    std::filesystem::path output_dir;

    arima::ArimaSpec arima_spec{};
    arima::ArimaSpec sarimax_spec = [] {
        arima::ArimaSpec s;
        s.seasonal = arima::SeasonalOrder{1, 0, 1, 12};
        s.use_exogenous = true;
        return s;
    }();
    /// (5,1,3) on a few hundred months often needs 2000-7000 simplex steps in its first descent.
    arima::FitOptions arima_fit{10000, 1e-8};
    /// The seasonal search has 11 parameters by default.
    arima::FitOptions sarimax_fit{10000, 1e-8};
    LstmBlock lstm{};
    SnnBlock snn{};

    void validate() const {
        if (cities.empty() && !random_cities) throw ConfigError("config: at least one city is required");
        if (random_cities && *random_cities == 0) throw ConfigError("config: random:k needs k >= 1");
        if (models.empty()) throw ConfigError("config: at least one model is required");
        std::set<std::string> seen;
        for (const auto& m : models) {
            if (std::find(known_models().begin(), known_models().end(), m) == known_models().end()) {
                throw ConfigError("config: unknown model '" + m + "'");
            }
            if (!seen.insert(m).second) throw ConfigError("config: model '" + m + "' listed twice");
        }
        if (horizon < 1) throw ConfigError("config: horizon must be >= 1");
        if (temperature_csv.empty()) throw ConfigError("config: temperature_csv is required");
        if (output_dir.empty()) throw ConfigError("config: output_dir is required");
        try {
            arima_spec.validate();
            sarimax_spec.validate();
            lstm.train.validate();
            if (arima_fit.max_iterations < 1 || sarimax_fit.max_iterations < 1) {
                throw std::invalid_argument("fit.max_iterations must be >= 1");
            }
            snn.train.validate();
            snn.lif.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
        if (!sarimax_spec.use_exogenous) throw ConfigError("config: sarimax block must use the exogenous series");
        if (arima_spec.use_exogenous) throw ConfigError("config: arima block cannot use the exogenous series");
        if (snn.time_steps < 2) throw ConfigError("config: snn.time_steps must be >= 2");
    }
};

namespace detail {

inline arima::ArimaSpec spec_from_json(const nlohmann::json& j, arima::ArimaSpec spec) {
    spec.p = j.value("p", spec.p);
    spec.d = j.value("d", spec.d);
    spec.q = j.value("q", spec.q);
    if (j.contains("seasonal")) {
        const auto& s = j.at("seasonal");
        if (s.is_null()) {
            spec.seasonal.reset();
        } else {
            arima::SeasonalOrder so = spec.seasonal.value_or(arima::SeasonalOrder{});
            so.P = s.value("P", so.P);
            so.D = s.value("D", so.D);
            so.Q = s.value("Q", so.Q);
            so.s = s.value("s", so.s);
            spec.seasonal = so;
        }
    }
    return spec;
}

inline nlohmann::json spec_to_json(const arima::ArimaSpec& s) {
    nlohmann::json j{{"p", s.p}, {"d", s.d}, {"q", s.q}};
    j["seasonal"] = s.seasonal ? nlohmann::json{{"P", s.seasonal->P}, {"D", s.seasonal->D}, {"Q", s.seasonal->Q},
                                                {"s", s.seasonal->s}}
                               : nlohmann::json(nullptr);
    return j;
}

inline TrainConfig train_from_json(const nlohmann::json& j, TrainConfig t) {
    t.epochs = j.value("epochs", t.epochs);
    t.window_len = j.value("window_len", t.window_len);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.hidden_size = j.value("hidden_size", t.hidden_size);
    t.learning_rate = j.value("learning_rate", t.learning_rate);
    t.validation_fraction = j.value("validation_fraction", t.validation_fraction);
    t.restore_best = j.value("restore_best", t.restore_best);
    return t;
}

inline nlohmann::json train_to_json(const TrainConfig& t) {
    return {{"epochs", t.epochs},
            {"window_len", t.window_len},
            {"batch_size", t.batch_size},
            {"hidden_size", t.hidden_size},
            {"learning_rate", t.learning_rate},
            {"validation_fraction", t.validation_fraction},
            {"restore_best", t.restore_best}};
}

inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace detail

/**
 * Builds a config from JSON. Relative paths resolve against `base_dir` (normally the
 * directory holding the config file). Unknown top-level keys are rejected.
 */
inline ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    static const std::set<std::string> allowed{"temperature_csv", "co2_csv", "co2_columns", "cities",
                                               "comparison_city", "models", "split", "seed", "horizon",
                                               "min_months", "metric_space", "output_dir", "arima", "sarimax",
                                               "lstm", "snn", "fit"};
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) throw ConfigError("config: unknown key '" + key + "'");
    }
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    };
    ExperimentConfig c;
    try {
        c.temperature_csv = resolve(j.at("temperature_csv").get<std::string>());
        if (j.contains("co2_csv") && !j.at("co2_csv").is_null()) c.co2_csv = resolve(j.at("co2_csv").get<std::string>());
        if (j.contains("co2_columns")) {
            const auto& cc = j.at("co2_columns");
            c.co2_columns.country = cc.value("country", c.co2_columns.country);
            c.co2_columns.year = cc.value("year", c.co2_columns.year);
            c.co2_columns.emissions = cc.value("emissions", c.co2_columns.emissions);
        }
        const auto& cities = j.at("cities");
        if (cities.is_string()) {
            const auto s = cities.get<std::string>();
            if (s.rfind("random:", 0) != 0) throw ConfigError("config: cities string must be random:<k>");
            const auto k = climcast::detail::parse_int(std::string_view(s).substr(7));
            if (!k || *k < 1) throw ConfigError("config: bad city count in '" + s + "'");
            c.random_cities = static_cast<std::size_t>(*k);
        } else {
            c.cities = cities.get<std::vector<std::string>>();
        }
        if (j.contains("comparison_city") && !j.at("comparison_city").is_null()) {
            c.comparison_city = j.at("comparison_city").get<std::string>();
        }
        c.models = j.at("models").get<std::vector<std::string>>();
        c.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("split")) {
            const auto mode = j.at("split").value("mode", std::string("shuffled"));
            if (mode == "chronological") {
                c.split_mode = series::SplitMode::Chronological;
            } else if (mode == "shuffled") {
                c.split_mode = series::SplitMode::Shuffled;
            } else {
                throw ConfigError("config: split.mode must be chronological or shuffled");
            }
        }
        c.horizon = j.value("horizon", c.horizon);
        c.min_months = j.value("min_months", c.min_months);
        const auto space = j.value("metric_space", std::string("physical"));
        if (space == "physical") {
            c.metric_space = MetricSpace::Physical;
        } else if (space == "scaled") {
            c.metric_space = MetricSpace::Scaled;
        } else {
            throw ConfigError("config: metric_space must be physical or scaled");
        }
        c.output_dir = resolve(j.at("output_dir").get<std::string>());
        auto fit_from = [](const nlohmann::json& f, arima::FitOptions o) {
            o.max_iterations = f.value("max_iterations", o.max_iterations);
            o.tolerance = f.value("tolerance", o.tolerance);
            return o;
        };
        if (j.contains("fit")) {
            c.arima_fit = fit_from(j.at("fit"), c.arima_fit);
            c.sarimax_fit = fit_from(j.at("fit"), c.sarimax_fit);
        }
        if (j.contains("arima")) {
            c.arima_spec = detail::spec_from_json(j.at("arima"), c.arima_spec);
            if (j.at("arima").contains("fit")) c.arima_fit = fit_from(j.at("arima").at("fit"), c.arima_fit);
        }
        if (j.contains("sarimax")) {
            c.sarimax_spec = detail::spec_from_json(j.at("sarimax"), c.sarimax_spec);
            if (j.at("sarimax").contains("fit")) c.sarimax_fit = fit_from(j.at("sarimax").at("fit"), c.sarimax_fit);
        }
        if (j.contains("lstm")) c.lstm.train = detail::train_from_json(j.at("lstm"), c.lstm.train);
        if (j.contains("snn")) {
            const auto& s = j.at("snn");
            c.snn.train = detail::train_from_json(s, c.snn.train);
            if (s.contains("time_window")) c.snn.train.window_len = s.at("time_window").get<std::size_t>();
            c.snn.time_steps = s.value("time_steps", c.snn.time_steps);
            c.snn.lif.threshold = s.value("threshold", c.snn.lif.threshold);
            c.snn.lif.beta = s.value("beta", c.snn.lif.beta);
            c.snn.lif.alpha = s.value("alpha", c.snn.lif.alpha);
            c.snn.write_raster = s.value("write_raster", c.snn.write_raster);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

/// Canonical, fully-defaulted form; keys are sorted by the JSON library.
inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["temperature_csv"] = c.temperature_csv.generic_string();
    j["co2_csv"] = c.co2_csv ? nlohmann::json(c.co2_csv->generic_string()) : nlohmann::json(nullptr);
    j["co2_columns"] = {{"country", c.co2_columns.country}, {"year", c.co2_columns.year},
                        {"emissions", c.co2_columns.emissions}};
    if (c.random_cities) {
        j["cities"] = "random:" + std::to_string(*c.random_cities);
    } else {
        j["cities"] = c.cities;
    }
    j["comparison_city"] = c.comparison_city ? nlohmann::json(*c.comparison_city) : nlohmann::json(nullptr);
    j["models"] = c.models;
    j["split"] = {{"mode", c.split_mode == series::SplitMode::Chronological ? "chronological" : "shuffled"}};
    j["seed"] = c.seed;
    j["horizon"] = c.horizon;
    j["min_months"] = c.min_months;
    j["metric_space"] = c.metric_space == MetricSpace::Physical ? "physical" : "scaled";
    j["output_dir"] = c.output_dir.generic_string();
    j["arima"] = detail::spec_to_json(c.arima_spec);
    j["arima"]["fit"] = {{"max_iterations", c.arima_fit.max_iterations}, {"tolerance", c.arima_fit.tolerance}};
    j["sarimax"] = detail::spec_to_json(c.sarimax_spec);
    j["sarimax"]["fit"] = {{"max_iterations", c.sarimax_fit.max_iterations}, {"tolerance", c.sarimax_fit.tolerance}};
    j["lstm"] = detail::train_to_json(c.lstm.train);
    auto snn_j = detail::train_to_json(c.snn.train);
    snn_j.erase("window_len");
    snn_j["time_window"] = c.snn.train.window_len;
    snn_j["time_steps"] = c.snn.time_steps;
    snn_j["threshold"] = c.snn.lif.threshold;
    snn_j["beta"] = c.snn.lif.beta;
    snn_j["alpha"] = c.snn.lif.alpha;
    snn_j["write_raster"] = c.snn.write_raster;
    j["snn"] = snn_j;
    return j;
}

/// 16 hex digits of FNV-1a over the canonical JSON text, output_dir excluded.
inline std::string config_hash(const ExperimentConfig& c) {
    auto j = to_json(c);
    j.erase("output_dir");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(detail::fnv1a(j.dump())));
    return buf;
}

}  // namespace climcast::harness
