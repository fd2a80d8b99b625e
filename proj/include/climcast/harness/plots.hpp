#pragma once

// Minimal deterministic SVG line charts: fixed number formatting, no timestamps or ids.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "climcast/harness/io.hpp"
#include "climcast/harness/run.hpp"

namespace climcast::harness {

struct PlotLine {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    std::string color;
    bool dashed = false;
};

struct PlotBand {
    std::vector<double> x;
    std::vector<double> lower;
    std::vector<double> upper;
    std::string color;
};

namespace detail {

inline std::string f2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace detail

inline std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                                  const std::vector<PlotLine>& lines, const std::vector<PlotBand>& bands = {}) {
    constexpr double W = 800, H = 420, L = 70, R = 160, T = 40, B = 50;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    auto extend = [&](const std::vector<double>& xs, const std::vector<double>& ys) {
        for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i) {
            if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) continue;
            x0 = std::min(x0, xs[i]);
            x1 = std::max(x1, xs[i]);
            y0 = std::min(y0, ys[i]);
            y1 = std::max(y1, ys[i]);
        }
    };
    for (const auto& l : lines) extend(l.x, l.y);
    for (const auto& b : bands) {
        extend(b.x, b.lower);
        extend(b.x, b.upper);
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << ' ' << H << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
      << detail::xml_escape(title) << "</text>\n";
    s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double yv = y0 + (y1 - y0) * k / 4.0;
        const double xv = x0 + (x1 - x0) * k / 4.0;
        s << "<text x=\"" << L - 6 << "\" y=\"" << detail::f2(py(yv) + 4)
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt_num(std::round(yv * 1000) / 1000)
          << "</text>\n";
        s << "<text x=\"" << detail::f2(px(xv)) << "\" y=\"" << H - B + 16
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fmt_num(std::round(xv))
          << "</text>\n";
    }
    s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << detail::xml_escape(x_label)
      << "</text>\n";
    s << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 16 " << (T + H - B) / 2
      << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << detail::xml_escape(y_label)
      << "</text>\n";

    for (const auto& b : bands) {
        std::ostringstream pts;
        for (std::size_t i = 0; i < b.x.size(); ++i) pts << detail::f2(px(b.x[i])) << ',' << detail::f2(py(b.upper[i])) << ' ';
        for (std::size_t i = b.x.size(); i-- > 0;) pts << detail::f2(px(b.x[i])) << ',' << detail::f2(py(b.lower[i])) << ' ';
        s << "<polygon points=\"" << pts.str() << "\" fill=\"" << b.color << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    }
    int legend = 0;
    for (const auto& l : lines) {
        std::ostringstream pts;
        for (std::size_t i = 0; i < l.x.size() && i < l.y.size(); ++i) {
            if (!std::isfinite(l.y[i])) continue;
            pts << detail::f2(px(l.x[i])) << ',' << detail::f2(py(l.y[i])) << ' ';
        }
        s << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << l.color << "\" stroke-width=\"1.5\""
          << (l.dashed ? " stroke-dasharray=\"6 3\"" : "") << "/>\n";
        const double ly = T + 10 + 18 * legend++;
        s << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
          << "\" stroke=\"" << l.color << "\" stroke-width=\"2\"" << (l.dashed ? " stroke-dasharray=\"6 3\"" : "")
          << "/>\n";
        s << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\" font-family=\"sans-serif\" font-size=\"11\">"
          << detail::xml_escape(l.name) << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

inline constexpr std::size_t kPlotHistoryMonths = 240;

namespace detail {

struct ForecastData {
    std::vector<double> x, mean, lower, upper;
    bool has_band = false;
};

inline ForecastData read_forecast(const fs::path& path, double x_offset) {
    const auto t = read_csv(path);
    ForecastData d;
    const auto steps = t.numbers("step", path);
    d.mean = t.numbers("mean", path);
    d.lower = t.numbers("lower", path);
    d.upper = t.numbers("upper", path);
    for (double s : steps) d.x.push_back(x_offset + s - 1);
    d.has_band = !d.lower.empty() && std::all_of(d.lower.begin(), d.lower.end(), [](double v) { return std::isfinite(v); });
    return d;
}

}  // namespace detail

/**
 * Writes SVG charts under <run>/<city>/plots/: a history + forecast overlay for each model
 * with a point forecast, a loss chart for each trained model, and a with/without CO2
 * overlay when both arima and sarimax succeeded. Returns the files written.
 */
inline std::vector<fs::path> emit_plots(const fs::path& run_dir) {
    const auto manifest = manifest_from_json(read_json(run_dir / "manifest.json"));
    std::vector<fs::path> written;
    static const std::map<std::string, std::string> colors{
        {"arima", "#1f77b4"}, {"sarimax", "#d62728"}, {"lstm", "#2ca02c"}, {"snn", "#9467bd"}, {"seasonal_naive", "#7f7f7f"}};
    auto color_of = [&](const std::string& m) {
        const auto it = colors.find(m);
        return it == colors.end() ? std::string("#000000") : it->second;
    };

    for (const auto& city : manifest.cities) {
        std::map<std::string, const PairRecord*> ok;
        for (const auto& p : manifest.pairs) {
            if (p.city == city && p.status == PairStatus::Success) ok[p.model] = &p;
        }
        if (ok.empty()) continue;
        const auto city_dir = run_dir / sanitize_name(city);
        const auto hist_path = city_dir / "history.csv";
        const auto hist = read_csv(hist_path);
        const auto idx = hist.numbers("index", hist_path);
        const auto val = hist.numbers("value", hist_path);
        const std::size_t first = idx.size() > kPlotHistoryMonths ? idx.size() - kPlotHistoryMonths : 0;
        PlotLine history{"observed", {idx.begin() + first, idx.end()}, {val.begin() + first, val.end()}, "#000000"};
        const double x_next = idx.empty() ? 0.0 : idx.back() + 1;
        const auto plot_dir = city_dir / "plots";

        std::map<std::string, detail::ForecastData> forecasts;
        for (const auto& [model, pair] : ok) {
            const auto model_dir = city_dir / sanitize_name(model);
            if (model != "snn") {
                auto fc = detail::read_forecast(model_dir / "forecast.csv", x_next);
                std::vector<PlotBand> bands;
                if (fc.has_band) bands.push_back({fc.x, fc.lower, fc.upper, color_of(model)});
                const auto svg = line_chart_svg(city + ": " + model + " forecast", "month index", "temperature",
                                                {history, {model, fc.x, fc.mean, color_of(model)}}, bands);
                const auto path = plot_dir / ("forecast_" + sanitize_name(model) + ".svg");
                write_text(path, svg);
                written.push_back(path);
                forecasts[model] = std::move(fc);
            }
            const bool has_loss = std::find(pair->artifacts.begin(), pair->artifacts.end(),
                                            (fs::path(sanitize_name(city)) / sanitize_name(model) / "loss.csv")
                                                .generic_string()) != pair->artifacts.end();
            if (has_loss) {
                const auto loss_path = model_dir / "loss.csv";
                const auto t = read_csv(loss_path);
                const auto ep = t.numbers("epoch", loss_path);
                std::vector<PlotLine> lines{{"train", ep, t.numbers("train_loss", loss_path), "#1f77b4"}};
                const auto val_loss = t.numbers("val_loss", loss_path);
                if (std::any_of(val_loss.begin(), val_loss.end(), [](double v) { return std::isfinite(v); })) {
                    lines.push_back({"validation", ep, val_loss, "#ff7f0e", true});
                }
                const auto path = plot_dir / ("loss_" + sanitize_name(model) + ".svg");
                write_text(path, line_chart_svg(city + ": " + model + " loss", "epoch", "MSE", lines));
                written.push_back(path);
            }
        }
        if (forecasts.count("arima") && forecasts.count("sarimax")) {
            const auto& a = forecasts.at("arima");
            const auto& s = forecasts.at("sarimax");
            const auto svg = line_chart_svg(city + ": with and without CO2", "month index", "temperature",
                                            {history,
                                             {"without CO2 (arima)", a.x, a.mean, color_of("arima"), true},
                                             {"with CO2 (sarimax)", s.x, s.mean, color_of("sarimax")}});
            const auto path = plot_dir / "co2_vs_no_co2.svg";
            write_text(path, svg);
            written.push_back(path);
        }
    }
    return written;
}

}  // namespace climcast::harness
