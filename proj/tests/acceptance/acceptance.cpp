// Acceptance gate: one PASS/FAIL/SKIP line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "climcast/arima.hpp"
#include "climcast/harness/compare.hpp"
#include "climcast/harness/run.hpp"
#include "climcast/lstm.hpp"
#include "climcast/metrics.hpp"
#include "climcast/series.hpp"
#include "climcast/snn.hpp"
#include "climcast/stattests.hpp"
#include "gradcheck.hpp"
#include "synthetic.hpp"

using namespace climcast;
namespace fs = std::filesystem;

namespace {

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
    Verdict verdict = Verdict::Fail;
    std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Verdict::Pass : Verdict::Fail, std::move(detail)}; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
    std::ostringstream out;
    out.precision(digits);
    out << v;
    return out.str();
}

Outcome arima_recovery(const fs::path&) {
    arima::ArimaSpec ar, ma;
    ar.p = 1, ar.d = 0, ar.q = 0;
    ma.p = 0, ma.d = 0, ma.q = 1;
    int ar_ok = 0, ma_ok = 0;
    double slowest = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto t0 = std::chrono::steady_clock::now();
        const auto fa = arima::fit(testsupport::ar1(2000, 0.7, seed), ar);
        slowest = std::max(slowest, seconds_since(t0));
        ar_ok += std::abs(fa.phi[0] - 0.7) <= 0.07 ? 1 : 0;
        t0 = std::chrono::steady_clock::now();
        const auto fm = arima::fit(testsupport::ma1(2000, 0.5, seed), ma);
        slowest = std::max(slowest, seconds_since(t0));
        ma_ok += std::abs(fm.theta[0] - 0.5) <= 0.07 ? 1 : 0;
    }
    return verdict(ar_ok >= 9 && ma_ok >= 9 && slowest < 10.0,
                   "AR(1) within 0.07 in " + std::to_string(ar_ok) + "/10, MA(1) in " + std::to_string(ma_ok) +
                       "/10, slowest fit " + fmt(slowest) + " s");
}

Outcome difference_round_trip(const fs::path&) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed + 500);
        std::vector<double> x(3 + uniform_index(rng, 200));
        for (auto& v : x) v = standard_normal(rng);
        for (int d = 0; d <= 2; ++d) {
            const auto back = series::undifference(series::difference(x, d));
            if (back.size() != x.size()) return verdict(false, "length changed");
            for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(back[i] - x[i]));
        }
    }
    return verdict(worst <= 1e-12, "max abs error " + fmt(worst) + " over 100 N(0,1) series, d = 0..2");
}

Outcome adf_discrimination(const fs::path&) {
    int noise_flagged = 0, walk_flagged = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        const auto seed = static_cast<std::uint64_t>(t) + 9000;
        noise_flagged += stats::adf_test(testsupport::white_noise(500, seed)).is_stationary_5pct ? 0 : 1;
        walk_flagged += stats::adf_test(testsupport::random_walk(500, seed)).is_stationary_5pct ? 0 : 1;
    }
    const double noise_rate = noise_flagged / static_cast<double>(trials);
    const double walk_rate = walk_flagged / static_cast<double>(trials);
    return verdict(noise_rate <= 0.10 && walk_rate >= 0.90,
                   "white noise called non-stationary " + fmt(100 * noise_rate) + "%, random walk " +
                       fmt(100 * walk_rate) + "%");
}

Outcome lstm_gradients(const fs::path&) {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::string worst_block;
    for (std::uint64_t k = 0; k < 10; ++k) {
        Rng rng(k + 300);
        const int hidden = 2 + static_cast<int>(uniform_index(rng, 5));
        std::vector<double> window(3 + uniform_index(rng, 6));
        for (auto& v : window) v = uniform(rng, 0.0, 1.0);
        const double target = uniform(rng, 0.0, 1.0);
        const auto p = lstm::LstmParams::init(hidden, rng);
        const auto analytic = lstm::loss_and_gradient(p, window, target).second.flatten();
        const auto numeric = testsupport::numeric_gradient(
            p, [&](const lstm::LstmParams& q) { return lstm::loss_and_gradient(q, window, target).first; }, 1e-5);
        for (const auto& [block, err] : testsupport::block_errors(p, analytic, numeric)) {
            if (err > worst) {
                worst = err;
                worst_block = block;
            }
        }
    }
    const double elapsed = seconds_since(t0);
    return verdict(worst < 1e-4 && elapsed < 30.0,
                   "worst block " + worst_block + " rel error " + fmt(worst) + ", " + fmt(elapsed) + " s");
}

Outcome snn_surrogate(const fs::path&) {
    const snn::LifConfig lif;
    Rng rng(77);
    double worst_point = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double v = uniform(rng, -2.0, 3.0);
        const double h = 1e-6;
        const double numeric = (snn::smoothed_spike(v + h, lif) - snn::smoothed_spike(v - h, lif)) / (2.0 * h);
        const double analytic = snn::surrogate_grad(v, lif);
        worst_point = std::max(worst_point, std::abs(numeric - analytic) / std::max(1.0, std::abs(analytic)));
    }

    // Toy network: 4 inputs, 5 hidden units, 3 time steps.
    series::WindowedDataset ds;
    ds.window_len = 4;
    ds.inputs.resize(8, 4);
    ds.targets.resize(8);
    for (Eigen::Index i = 0; i < 8; ++i) {
        for (Eigen::Index j = 0; j < 4; ++j) ds.inputs(i, j) = uniform(rng, 0.0, 1.0);
        ds.targets(i) = uniform(rng, 0.0, 1.0);
    }
    const auto batch = series::encode_latency(ds, 3);
    std::vector<std::size_t> rows(batch.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    auto p = snn::SnnParams::init(5, 4, lif, rng);
    p.W2 *= 3.0;
    auto loss = [&](const snn::SnnParams& q) {
        return snn::loss_and_gradient(q, batch, rows, snn::SpikeMode::Smooth).first;
    };
    const auto analytic = snn::loss_and_gradient(p, batch, rows, snn::SpikeMode::Smooth).second.flatten();
    const double end_to_end = testsupport::relative_error(analytic, testsupport::numeric_gradient(p, loss, 1e-6));
    return verdict(worst_point <= 1e-6 && end_to_end <= 1e-3,
                   "surrogate worst " + fmt(worst_point) + " at 100 points, smoothed network rel error " +
                       fmt(end_to_end));
}

Outcome metric_identities(const fs::path&) {
    std::vector<std::string> broken;
    const double eps = std::numeric_limits<double>::epsilon();
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto t = testsupport::seasonal_series(60, seed);
        auto p = testsupport::white_noise(60, seed + 1000);
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = t[i] + 0.7 * p[i] + 0.1;
        const auto s = metrics::evaluate(t, p);
        if (std::abs(s.rmse * s.rmse - s.mse) > 4 * eps * s.mse) broken.push_back("rmse^2=mse");
        if (s.mae > s.rmse) broken.push_back("mae<=rmse");
        if (*metrics::evaluate(t, t).r_squared != 1.0) broken.push_back("perfect r2");
        const double mean = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
        if (std::abs(*metrics::evaluate(t, std::vector<double>(t.size(), mean)).r_squared) > 1e-12) {
            broken.push_back("mean r2");
        }
        for (double a : {0.5, -3.0, 12.0}) {
            std::vector<double> ta(t.size()), pa(t.size());
            for (std::size_t i = 0; i < t.size(); ++i) {
                ta[i] = a * t[i] - 4.0;
                pa[i] = a * p[i] - 4.0;
            }
            const auto sa = metrics::evaluate(ta, pa);
            if (std::abs(sa.mse - a * a * s.mse) > 1e-9 * a * a * s.mse) broken.push_back("mse scale");
            if (std::abs(*sa.r_squared - *s.r_squared) > 1e-9) broken.push_back("r2 invariance");
            if (std::abs(*sa.explained_variance - *s.explained_variance) > 1e-9) broken.push_back("ev invariance");
        }
    }
    return verdict(broken.empty(), broken.empty() ? "all identities hold on 100 random pairs"
                                                  : "first broken identity: " + broken.front());
}

nlohmann::json single_city_config(const fs::path& dir, std::vector<std::string> models) {
    return {{"temperature_csv", (dir / "temps.csv").string()},
            {"co2_csv", (dir / "co2.csv").string()},
            {"cities", {"Synthville"}},
            {"models", std::move(models)},
            {"split", {{"mode", "chronological"}}},
            {"seed", 11},
            {"output_dir", (dir / "run").string()}};
}

void write_synthetic_inputs(const fs::path& dir, std::size_t months) {
    fs::create_directories(dir);
    std::ofstream temps(dir / "temps.csv");
    testsupport::write_temperature_csv(
        temps, {testsupport::make_city("Synthville", "Nowhere", YearMonth(1940, 1),
                                       testsupport::seasonal_series(months, 2024, 10.0, 8.0, 0.0015, 0.8))});
    std::ofstream co2(dir / "co2.csv");
    std::vector<testsupport::Co2Row> rows;
    for (int y = 1930; y <= 2030; ++y) rows.push_back({"Nowhere", y, 50.0 + 2.5 * (y - 1930)});
    testsupport::write_co2_csv(co2, rows);
}

Outcome desk_end_to_end(const fs::path& work) {
    const auto dir = work / "desk";
    fs::remove_all(dir);
    write_synthetic_inputs(dir, 960);
    const auto cfg = harness::config_from_json(single_city_config(dir, {"arima", "lstm", "snn"}));
    const auto t0 = std::chrono::steady_clock::now();
    const auto manifest = harness::run(cfg);
    const double elapsed = seconds_since(t0);
    if (manifest.exit_code() != 0) {
        for (const auto& p : manifest.pairs) {
            if (p.status != harness::PairStatus::Success) return verdict(false, p.model + " " + p.reason);
        }
    }
    auto report = [&](const std::string& model) {
        return harness::read_json(cfg.output_dir / "Synthville" / model / "report.json");
    };
    const auto arima = report("arima"), lstm = report("lstm"), snn = report("snn");
    const double arima_mse = arima["report"]["mse"], arima_base = arima["baseline"]["physical"]["mse"];
    const double lstm_mse = lstm["report"]["mse"], lstm_base = lstm["baseline"]["physical"]["mse"];
    const double acc = snn["details"]["accuracy"];
    const int steps = snn["details"]["time_steps"];
    std::cout << "  time_steps=" << steps << " arima_spec=" << arima["details"]["spec"].get<std::string>() << '\n';
    return verdict(arima_mse < arima_base && lstm_mse < lstm_base && acc >= 0.8 && elapsed < 300.0,
                   "ARIMA mse " + fmt(arima_mse) + " vs naive " + fmt(arima_base) + ", LSTM " + fmt(lstm_mse) +
                       " vs naive " + fmt(lstm_base) + ", SNN accuracy " + fmt(acc) + ", " + fmt(elapsed, 3) + " s");
}

Outcome real_data_smoke(const fs::path& work) {
    const char* temps = std::getenv("CLIMCAST_TEMPERATURE_CSV");
    const char* co2 = std::getenv("CLIMCAST_CO2_CSV");
    if (!temps || !co2 || !fs::exists(temps) || !fs::exists(co2)) {
        return {Verdict::Skip, "set CLIMCAST_TEMPERATURE_CSV and CLIMCAST_CO2_CSV to the real data files"};
    }
    const std::vector<std::string> cities{"Jiddah", "Acapulco", "Edmonton", "Irkutsk", "Bac Lieu"};
    nlohmann::json j{{"temperature_csv", temps}, {"co2_csv", co2},          {"cities", cities},
                     {"models", {"lstm"}},       {"metric_space", "scaled"}, {"output_dir", (work / "real_lstm").string()}};
    const auto lstm_cfg = harness::config_from_json(j);
    const auto lstm_run = harness::run(lstm_cfg);
    std::string worst;
    bool ok = true;
    for (const auto& p : lstm_run.pairs) {
        if (!p.report) {
            ok = false;
            worst += p.city + " " + harness::to_string(p.status) + "; ";
            continue;
        }
        const double mse = p.report->scores.mse;
        if (mse < 0.0005 || mse > 0.05) ok = false;
        worst += p.city + " " + fmt(mse) + "; ";
    }

    j["cities"] = {"Irkutsk"};
    j["models"] = {"arima", "sarimax", "lstm"};
    j["comparison_city"] = "Irkutsk";
    j["output_dir"] = (work / "real_irkutsk").string();
    const auto cmp_cfg = harness::config_from_json(j);
    harness::run(cmp_cfg);
    const auto table = harness::compare(cmp_cfg.output_dir);
    const bool table_ok = !table.focus_csv.empty() && table.focus_csv.find("absent") == std::string::npos &&
                          std::count(table.focus_csv.begin(), table.focus_csv.end(), '\n') == 4;
    return verdict(ok && table_ok, "scaled MSE " + worst + (table_ok ? "Irkutsk table complete" : "Irkutsk table incomplete"));
}

Outcome exogenous_plumbing(const fs::path&) {
    arima::ArimaSpec base;
    base.p = 2, base.d = 1, base.q = 1;
    arima::ArimaSpec with_x = base;
    with_x.use_exogenous = true;
    const arima::FitOptions opts{10000, 1e-8};

    const auto y = testsupport::seasonal_series(480, 31);
    const std::vector<double> zeros(y.size(), 0.0), future(120, 0.0);
    const auto plain = arima::forecast(arima::fit(y, base, std::nullopt, opts), 120);
    const auto zero_fit = arima::fit(y, with_x, std::span<const double>(zeros), opts);
    const auto zero_fc = arima::forecast(zero_fit, 120, std::span<const double>(future));
    const bool identical = plain.mean == zero_fc.mean && plain.lower == zero_fc.lower && plain.upper == zero_fc.upper;

    Rng rng(4242);
    const auto noise = testsupport::seasonal_series(480, 32, 0.0, 6.0, 0.0, 0.7);
    std::vector<double> x(480), yx(480);
    double level = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        level += 0.05 + standard_normal(rng);
        x[i] = level;
        yx[i] = x[i] + noise[i];
    }
    const double beta = arima::fit(yx, with_x, std::span<const double>(x), opts).beta_exog;
    return verdict(identical && zero_fit.beta_exog == 0.0 && beta >= 0.8 && beta <= 1.2,
                   std::string(identical ? "zero-CO2 forecast identical" : "zero-CO2 forecast differs") +
                       ", injected beta 1 recovered as " + fmt(beta));
}

std::string strip_wall_times(const fs::path& manifest) {
    auto j = harness::read_json(manifest);
    for (auto& p : j["pairs"]) p.erase("wall_time_s");
    return j.dump(2);
}

Outcome determinism(const fs::path& work) {
    const auto dir = work / "determinism";
    fs::remove_all(dir);
    write_synthetic_inputs(dir, 300);
    auto j = single_city_config(dir, {"arima", "sarimax", "lstm", "snn", "seasonal_naive"});
    j["split"] = {{"mode", "shuffled"}};
    j["lstm"] = {{"epochs", 5}, {"hidden_size", 8}};
    j["snn"] = {{"epochs", 5}, {"hidden_size", 8}};
    std::vector<std::string> csv, manifest;
    for (const char* name : {"a", "b"}) {
        j["output_dir"] = (dir / name).string();
        harness::RunOptions opts;
        opts.jobs = name[0] == 'a' ? 1 : 2;
        const auto m = harness::run(harness::config_from_json(j), opts);
        if (m.exit_code() != 0) return verdict(false, "run exited with " + std::to_string(m.exit_code()));
        csv.push_back(harness::read_text(dir / name / "comparison.csv"));
        manifest.push_back(strip_wall_times(dir / name / "manifest.json"));
    }
    const bool same_csv = csv[0] == csv[1], same_manifest = manifest[0] == manifest[1];
    return verdict(same_csv && same_manifest, std::string("comparison.csv ") + (same_csv ? "identical" : "differs") +
                                                  ", manifest " + (same_manifest ? "identical" : "differs") +
                                                  " (1 vs 2 worker threads)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"climcast acceptance checks"};
    std::string workdir = "acceptance_work";
    std::vector<std::string> only;
    app.add_option("--workdir", workdir, "scratch directory for end-to-end runs");
    app.add_option("--only", only, "run just these checks");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome(const fs::path&)>>> checks{
        {"arima_recovery", arima_recovery},
        {"difference_round_trip", difference_round_trip},
        {"adf_discrimination", adf_discrimination},
        {"lstm_gradient_check", lstm_gradients},
        {"snn_surrogate_check", snn_surrogate},
        {"metric_identities", metric_identities},
        {"desk_end_to_end", desk_end_to_end},
        {"real_data_smoke", real_data_smoke},
        {"exogenous_plumbing", exogenous_plumbing},
        {"determinism", determinism},
    };

    const fs::path work(workdir);
    fs::create_directories(work);
    int failed = 0;
    for (const auto& [name, check] : checks) {
        if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
        Outcome o;
        try {
            o = check(work);
        } catch (const std::exception& e) {
            o = {Verdict::Fail, std::string("threw: ") + e.what()};
        }
        const char* tag = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Skip ? "SKIP" : "FAIL";
        std::cout << tag << ' ' << name << ": " << o.detail << std::endl;
        failed += o.verdict == Verdict::Fail ? 1 : 0;
    }
    return failed == 0 ? 0 : 1;
}
