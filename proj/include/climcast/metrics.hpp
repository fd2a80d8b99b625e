#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "climcast/error.hpp"

namespace climcast::metrics {

struct Scores {
    double mse = 0.0;
    double rmse = 0.0;
    double mae = 0.0;
    std::optional<double> r_squared;           ///< empty when y_true is constant
    std::optional<double> explained_variance;  ///< empty when y_true is constant
};

/// Regression scores. Requires equal, non-zero lengths and finite values.
inline Scores evaluate(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.size() != y_pred.size()) {
        throw std::invalid_argument("evaluate: length mismatch (" + std::to_string(y_true.size()) + " vs " +
                                    std::to_string(y_pred.size()) + ")");
    }
    if (y_true.empty()) throw std::invalid_argument("evaluate: empty input");
    const auto n = static_cast<double>(y_true.size());
    double sse = 0.0, sae = 0.0, sum_e = 0.0, sum_y = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (!std::isfinite(y_true[i]) || !std::isfinite(y_pred[i])) {
            throw NumericError("evaluate: non-finite value at index " + std::to_string(i));
        }
        const double e = y_true[i] - y_pred[i];
        sse += e * e;
        sae += std::abs(e);
        sum_e += e;
        sum_y += y_true[i];
    }
    const double mean_y = sum_y / n;
    const double mean_e = sum_e / n;
    double ss_tot = 0.0, ss_e = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double dy = y_true[i] - mean_y;
        const double de = (y_true[i] - y_pred[i]) - mean_e;
        ss_tot += dy * dy;
        ss_e += de * de;
    }
    Scores s;
    s.mse = sse / n;
    s.rmse = std::sqrt(s.mse);
    s.mae = sae / n;
    if (ss_tot > 0.0) {
        s.r_squared = 1.0 - sse / ss_tot;
        s.explained_variance = 1.0 - ss_e / ss_tot;
    }
    return s;
}

/// Fraction of mismatched labels; equals MAE on {0,1} vectors.
inline double evaluate_binary(std::span<const int> y_true, std::span<const int> y_pred) {
    if (y_true.size() != y_pred.size()) throw std::invalid_argument("evaluate_binary: length mismatch");
    if (y_true.empty()) throw std::invalid_argument("evaluate_binary: empty input");
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if ((y_true[i] != 0 && y_true[i] != 1) || (y_pred[i] != 0 && y_pred[i] != 1)) {
            throw std::invalid_argument("evaluate_binary: non-binary value at index " + std::to_string(i));
        }
        wrong += y_true[i] != y_pred[i] ? 1 : 0;
    }
    return static_cast<double>(wrong) / static_cast<double>(y_true.size());
}

/// Predicts y[t] = y[t - season] for t in [first, y.size()).
inline std::vector<double> seasonal_naive(std::span<const double> y, std::size_t first, std::size_t season = 12) {
    if (season == 0) throw std::invalid_argument("seasonal_naive: season must be >= 1");
    if (first < season) throw std::invalid_argument("seasonal_naive: first index precedes one full season");
    if (first > y.size()) throw std::invalid_argument("seasonal_naive: first index past the end");
    std::vector<double> out;
    out.reserve(y.size() - first);
    for (std::size_t t = first; t < y.size(); ++t) out.push_back(y[t - season]);
    return out;
}

struct EvalReport {
    std::string model_name;
    std::string city;
    std::size_t n_points = 0;
    int horizon_months = 0;
    Scores scores;
};

inline EvalReport make_report(std::string model, std::string city, int horizon, std::span<const double> y_true,
                              std::span<const double> y_pred) {
    return {std::move(model), std::move(city), y_true.size(), horizon, evaluate(y_true, y_pred)};
}

inline constexpr const char* kReportCsvHeader = "model,city,n,horizon,mse,rmse,mae,r2,ev";

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("NA"); }

inline nlohmann::json opt_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline std::optional<double> opt_from_json(const nlohmann::json& j) {
    return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

}  // namespace detail

/// One CSV row in kReportCsvHeader order; undefined r2/ev are written as NA.
inline std::string to_csv_row(const EvalReport& r) {
    return detail::csv_field(r.model_name) + ',' + detail::csv_field(r.city) + ',' + std::to_string(r.n_points) +
           ',' + std::to_string(r.horizon_months) + ',' + detail::fmt(r.scores.mse) + ',' +
           detail::fmt(r.scores.rmse) + ',' + detail::fmt(r.scores.mae) + ',' + detail::fmt(r.scores.r_squared) +
           ',' + detail::fmt(r.scores.explained_variance);
}

/// Undefined r2/ev serialize as null.
inline nlohmann::json to_json(const EvalReport& r) {
    return {{"model", r.model_name},
            {"city", r.city},
            {"n", r.n_points},
            {"horizon", r.horizon_months},
            {"mse", r.scores.mse},
            {"rmse", r.scores.rmse},
            {"mae", r.scores.mae},
            {"r2", detail::opt_json(r.scores.r_squared)},
            {"ev", detail::opt_json(r.scores.explained_variance)}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport r;
    r.model_name = j.at("model").get<std::string>();
    r.city = j.at("city").get<std::string>();
    r.n_points = j.at("n").get<std::size_t>();
    r.horizon_months = j.at("horizon").get<int>();
    r.scores.mse = j.at("mse").get<double>();
    r.scores.rmse = j.at("rmse").get<double>();
    r.scores.mae = j.at("mae").get<double>();
    r.scores.r_squared = detail::opt_from_json(j.at("r2"));
    r.scores.explained_variance = detail::opt_from_json(j.at("ev"));
    return r;
}

}  // namespace climcast::metrics
