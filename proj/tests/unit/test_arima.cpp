#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "climcast/arima.hpp"
#include "synthetic.hpp"

using namespace climcast;
using namespace climcast::arima;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ArimaSpec order(int p, int d, int q) {
    ArimaSpec s;
    s.p = p;
    s.d = d;
    s.q = q;
    return s;
}

// A hand-built fit with the given AR coefficients and intercept, conditioned on `history`.
ArimaFit manual_fit(ArimaSpec spec, std::vector<double> phi, double intercept, std::vector<double> history) {
    ArimaFit f;
    f.spec = spec;
    f.phi = std::move(phi);
    f.intercept = intercept;
    f.sigma2 = 1.0;
    return condition_on(f, history);
}

}  // namespace

TEST_CASE("AR(1) coefficient is recovered") {
    const auto y = testsupport::ar1(2000, 0.7, 1);
    const auto f = fit(y, order(1, 0, 0));
    REQUIRE(f.phi.size() == 1);
    CHECK(f.phi[0] >= 0.65);
    CHECK(f.phi[0] <= 0.75);
    CHECK(f.converged);
}

TEST_CASE("MA(1) coefficient is recovered") {
    const auto y = testsupport::ma1(2000, 0.5, 1);
    const auto f = fit(y, order(0, 0, 1));
    REQUIRE(f.theta.size() == 1);
    CHECK(f.theta[0] >= 0.43);
    CHECK(f.theta[0] <= 0.57);
}

TEST_CASE("specs without ARMA terms are rejected") {
    const auto y = testsupport::white_noise(200, 2);
    CHECK_THROWS_AS(fit(y, order(0, 1, 0)), std::invalid_argument);
    CHECK_THROWS_AS(order(-1, 0, 1).validate(), std::invalid_argument);
    ArimaSpec bad_season = order(1, 0, 0);
    bad_season.seasonal = SeasonalOrder{1, 0, 0, 1};
    CHECK_THROWS_AS(bad_season.validate(), std::invalid_argument);
}

TEST_CASE("fit preconditions") {
    const auto y = testsupport::white_noise(30, 2);
    CHECK_THROWS_AS(fit(y, order(5, 1, 3)), InsufficientDataError);
    const auto long_y = testsupport::white_noise(300, 2);
    ArimaSpec ex = order(1, 0, 0);
    ex.use_exogenous = true;
    CHECK_THROWS_AS(fit(long_y, ex), std::invalid_argument);
    const std::vector<double> x(long_y.size(), 0.0);
    CHECK_THROWS_AS(fit(long_y, order(1, 0, 0), std::span<const double>(x)), std::invalid_argument);
    auto nan_y = long_y;
    nan_y[10] = NAN;
    CHECK_THROWS_AS(fit(nan_y, order(1, 0, 0)), std::invalid_argument);
}

TEST_CASE("information criteria follow their definitions") {
    const auto y = testsupport::ar1(500, 0.4, 3);
    const auto f = fit(y, order(2, 0, 1));
    const double k = 2 + 1 + 2;  // phi, theta, intercept, sigma2
    const double n = static_cast<double>(f.n_obs);
    CHECK(f.n_params() == 5);
    CHECK(f.aic == -2.0 * f.loglik + 2.0 * k);
    CHECK(f.bic == -2.0 * f.loglik + k * std::log(n));
    CHECK_THAT(f.loglik, WithinRel(-0.5 * n * (std::log(2.0 * std::numbers::pi * f.sigma2) + 1.0), 1e-14));
}

TEST_CASE("AR(1) forecast halves each step") {
    const auto f = manual_fit(order(1, 0, 0), {0.5}, 0.0, {3.0, 1.0, 8.0});
    const auto fc = forecast(f, 4);
    CHECK(fc.mean == std::vector<double>{4.0, 2.0, 1.0, 0.5});
}

TEST_CASE("integrated drift continues the line") {
    std::vector<double> y(20);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 + static_cast<double>(i);
    const auto f = manual_fit(order(0, 1, 0), {}, 1.0, y);
    const auto fc = forecast(f, 5);
    for (int h = 0; h < 5; ++h) CHECK_THAT(fc.mean[static_cast<std::size_t>(h)], WithinAbs(21.0 + h, 1e-12));
}

TEST_CASE("one-step interval is 1.96 sigma") {
    const auto y = testsupport::ar1(400, 0.6, 5);
    const auto f = fit(y, order(1, 0, 1));
    const auto fc = forecast(f, 3);
    const double half = 1.96 * std::sqrt(f.sigma2);
    CHECK_THAT(fc.upper[0] - fc.mean[0], WithinAbs(half, 1e-12));
    CHECK_THAT(fc.mean[0] - fc.lower[0], WithinAbs(half, 1e-12));
    CHECK(fc.upper[2] - fc.lower[2] > fc.upper[0] - fc.lower[0]);
}

TEST_CASE("AR(1) forecasts converge geometrically") {
    const auto zero_mean = manual_fit(order(1, 0, 0), {0.8}, 0.0, {5.0, 7.0});
    CHECK_THAT(forecast(zero_mean, 200).mean.back(), WithinAbs(0.0, 1e-6));
    const auto with_c = manual_fit(order(1, 0, 0), {0.8}, 2.0, {5.0, 7.0});
    CHECK_THAT(with_c.intercept / (1.0 - 0.8), WithinAbs(10.0, 1e-12));
    CHECK_THAT(forecast(with_c, 200).mean.back(), WithinAbs(10.0, 1e-6));
}

TEST_CASE("forecast argument checks") {
    const auto f = manual_fit(order(1, 0, 0), {0.5}, 0.0, {1.0, 2.0});
    CHECK_THROWS_AS(forecast(f, 0), std::invalid_argument);
    const std::vector<double> x{1.0};
    CHECK_THROWS_AS(forecast(f, 1, std::span<const double>(x)), std::invalid_argument);
}

TEST_CASE("fitted models keep roots outside the unit circle") {
    const std::vector<ArimaSpec> specs{order(2, 0, 2), order(5, 1, 3), order(1, 1, 1)};
    for (const auto& spec : specs) {
        for (std::uint64_t seed : {1u, 2u}) {
            const auto y = testsupport::seasonal_series(360, seed);
            ArimaFit f;
            try {
                f = fit(y, spec, std::nullopt, {20000, 1e-8});
            } catch (const ConvergenceError&) {
                continue;
            }
            CHECK(arima::detail::ar_admissible(f.phi));
            CHECK(arima::detail::ma_admissible(f.theta));
            CHECK(arima::detail::ar_admissible(full_ar(f)));
        }
    }
}

TEST_CASE("one-step predictions plus residuals rebuild the working series") {
    ArimaSpec spec = order(2, 1, 1);
    spec.seasonal = SeasonalOrder{1, 0, 1, 12};
    const auto y = testsupport::seasonal_series(400, 7);
    const auto f = fit(y, spec, std::nullopt, {10000, 1e-8});
    const auto fitted = working_fitted(f);
    const std::size_t r = full_ar(f).size();
    REQUIRE(fitted.size() + r == f.working.size());
    for (std::size_t i = 0; i < fitted.size(); ++i) CHECK_THAT(fitted[i] + f.residuals[i], WithinAbs(f.working[i + r], 1e-10));
    const auto pred = one_step_predictions(f);
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
        CHECK_THAT(pred.values[i] + f.residuals[i], WithinAbs(y[pred.first_index + i], 1e-10));
    }
}

TEST_CASE("seasonal expansion multiplies the factors") {
    const std::vector<double> phi{0.5}, sphi{0.3};
    const auto a = arima::detail::expand_ar(phi, sphi, 4);
    // (1 - 0.5B)(1 - 0.3B^4) = 1 - 0.5B - 0.3B^4 + 0.15B^5
    CHECK(a == std::vector<double>{0.5, 0, 0, 0.3, -0.15});
    const std::vector<double> theta{0.2}, stheta{0.4};
    const auto m = arima::detail::expand_ma(theta, stheta, 2);
    CHECK(m == std::vector<double>{0.2, 0.4, 0.2 * 0.4});
}

TEST_CASE("zero exogenous series changes no forecast") {
    const auto y = testsupport::seasonal_series(300, 9);
    const std::vector<double> zeros(y.size(), 0.0), future(24, 0.0);
    ArimaSpec base = order(2, 1, 1);
    ArimaSpec ex = base;
    ex.use_exogenous = true;
    const auto plain = fit(y, base, std::nullopt, {10000, 1e-8});
    const auto with_x = fit(y, ex, std::span<const double>(zeros), {10000, 1e-8});
    CHECK(with_x.beta_exog == 0.0);
    const auto a = forecast(plain, 24);
    const auto b = forecast(with_x, 24, std::span<const double>(future));
    CHECK(a.mean == b.mean);
    CHECK(a.lower == b.lower);
}

TEST_CASE("injected exogenous effect is recovered") {
    Rng rng(1017);  // independent of the noise stream
    const std::size_t n = 480;
    const auto noise = testsupport::seasonal_series(n, 17, 0.0, 6.0, 0.0, 0.7);
    std::vector<double> x(n), y(n);
    double level = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        level += 0.05 + standard_normal(rng);
        x[i] = level;
        y[i] = 1.0 * x[i] + noise[i];
    }
    ArimaSpec spec = order(2, 1, 1);
    spec.use_exogenous = true;
    const auto f = fit(y, spec, std::span<const double>(x), {10000, 1e-8});
    CHECK(f.beta_exog >= 0.8);
    CHECK(f.beta_exog <= 1.2);
}

TEST_CASE("grid search ranks by AIC") {
    const auto y = testsupport::ar1(2000, 0.7, 4);
    const auto ranked = grid_search(y, {order(5, 1, 3), order(1, 0, 0)}, std::nullopt, {20000, 1e-8});
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0].spec.to_string() == "(1,0,0)");

    const auto single = grid_search(y, {order(1, 0, 0)});
    REQUIRE(single.size() == 1);
    CHECK(single[0].fit);
    CHECK_THROWS_AS(grid_search(y, {}), std::invalid_argument);
}

TEST_CASE("grid search keeps failures after successes") {
    const auto y = testsupport::ar1(100, 0.5, 4);
    const auto ranked = grid_search(y, {order(9, 1, 9), order(1, 0, 0)});
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0].fit);
    CHECK_FALSE(ranked[1].fit);
    CHECK_FALSE(ranked[1].error.empty());
}

TEST_CASE("fit summary serializes") {
    ArimaSpec spec = order(1, 0, 0);
    spec.seasonal = SeasonalOrder{1, 0, 0, 12};
    const auto f = fit(testsupport::seasonal_series(300, 3), spec, std::nullopt, {10000, 1e-8});
    const auto j = to_json(f);
    CHECK(j["spec"]["seasonal"]["s"] == 12);
    CHECK(j["coefficients"]["phi"].size() == 1);
    CHECK(j["aic"].get<double>() == f.aic);
    CHECK(spec.to_string() == "(1,0,0)x(1,0,0,12)");
}
