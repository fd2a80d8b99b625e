#include <catch_amalgamated.hpp>

#include <cmath>

#include "climcast/stattests.hpp"
#include "synthetic.hpp"

using namespace climcast;
using namespace climcast::stats;
using Catch::Matchers::WithinAbs;

TEST_CASE("OLS fits an exact line") {
    Eigen::MatrixXd X(3, 2);
    X << 1, 0, 1, 1, 1, 2;
    Eigen::VectorXd y(3);
    y << 1, 3, 5;
    const auto f = ols(X, y);
    CHECK_THAT(f.coefficients(0), WithinAbs(1.0, 1e-12));
    CHECK_THAT(f.coefficients(1), WithinAbs(2.0, 1e-12));
    CHECK(f.residuals.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(f.df_resid == 1);
}

TEST_CASE("OLS recovers known coefficients from noiseless data") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        Eigen::MatrixXd X(40, 4);
        for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = standard_normal(rng) * (1 + i % 3);
        Eigen::VectorXd beta(4);
        beta << 0.5, -2.0, 3.25, 1e3;
        const auto f = ols(X, X * beta);
        CHECK((f.coefficients - beta).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("OLS residuals are orthogonal to the design") {
    Rng rng(4);
    Eigen::MatrixXd X(200, 3);
    X.col(0).setOnes();
    for (Eigen::Index i = 0; i < 200; ++i) {
        X(i, 1) = standard_normal(rng);
        X(i, 2) = 50.0 + 10.0 * standard_normal(rng);
    }
    Eigen::VectorXd y(200);
    for (Eigen::Index i = 0; i < 200; ++i) y(i) = 1.0 + X(i, 1) - 0.1 * X(i, 2) + standard_normal(rng);
    const auto f = ols(X, y);
    const Eigen::VectorXd xr = X.transpose() * f.residuals;
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(std::abs(xr(j)) <= 1e-8 * X.col(j).norm() * f.residuals.norm());
    CHECK(f.standard_errors.allFinite());
    CHECK((f.standard_errors.array() > 0).all());
}

TEST_CASE("OLS standard errors match the textbook formula") {
    Rng rng(8);
    Eigen::MatrixXd X(60, 2);
    X.col(0).setOnes();
    for (Eigen::Index i = 0; i < 60; ++i) X(i, 1) = standard_normal(rng);
    Eigen::VectorXd y(60);
    for (Eigen::Index i = 0; i < 60; ++i) y(i) = 2.0 + 0.3 * X(i, 1) + standard_normal(rng);
    const auto f = ols(X, y);
    const Eigen::MatrixXd cov = f.sigma2 * (X.transpose() * X).inverse();
    for (Eigen::Index j = 0; j < 2; ++j) CHECK_THAT(f.standard_errors(j), WithinAbs(std::sqrt(cov(j, j)), 1e-10));
}

TEST_CASE("OLS rejects singular or undersized designs") {
    Eigen::MatrixXd X(5, 2);
    X << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10;
    CHECK_THROWS_AS(ols(X, Eigen::VectorXd::Ones(5)), SingularDesignError);
    CHECK_THROWS_AS(ols(Eigen::MatrixXd::Ones(2, 2), Eigen::VectorXd::Ones(2)), std::invalid_argument);
    CHECK_THROWS_AS(ols(Eigen::MatrixXd::Ones(4, 1), Eigen::VectorXd::Ones(3)), std::invalid_argument);
}

TEST_CASE("ADF separates white noise from a random walk") {
    const auto noise = testsupport::white_noise(500, 12);
    const auto walk = testsupport::random_walk(500, 12);
    CHECK(adf_test(noise).is_stationary_5pct);
    CHECK_FALSE(adf_test(walk).is_stationary_5pct);
}

TEST_CASE("ADF precondition and lag choice") {
    CHECK_THROWS_AS(adf_test(testsupport::white_noise(10, 1)), InsufficientDataError);
    CHECK_THROWS_AS(adf_test(testsupport::white_noise(30, 1), -1), std::invalid_argument);
    CHECK(schwert_lag(100) == 12);
    const auto r = adf_test(testsupport::white_noise(500, 3), 2);
    CHECK(r.lags_used == 2);
    CHECK(r.n_obs == 497);
    CHECK(r.critical_values.five_pct == -2.86);
}

TEST_CASE("ADF statistic ignores shifts and positive scaling") {
    const auto x = testsupport::ar1(300, 0.6, 21);
    const double base = adf_test(x).statistic;
    std::vector<double> shifted = x, scaled = x;
    for (auto& v : shifted) v += 37.5;
    for (auto& v : scaled) v *= 4.2;
    CHECK_THAT(adf_test(shifted).statistic, WithinAbs(base, 1e-9));
    CHECK_THAT(adf_test(scaled).statistic, WithinAbs(base, 1e-9));
}
