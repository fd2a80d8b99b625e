#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "climcast/error.hpp"

namespace climcast::stats {

struct OlsFit {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd residuals;
    Eigen::VectorXd standard_errors;
    std::size_t n_obs = 0;
    std::size_t df_resid = 0;
    double sigma2 = 0.0;  ///< residual variance, SSE / df_resid
};

/**
 * @brief Least squares via column-pivoted Householder QR.
 *
 * Columns are scaled to unit norm before factorization so the rank threshold is
 * independent of regressor magnitudes.
 *
 * @throws std::invalid_argument if shapes disagree or rows <= cols
 * @throws SingularDesignError if the design is rank deficient
 */
inline OlsFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    const Eigen::Index n = X.rows();
    const Eigen::Index k = X.cols();
    if (n != y.size()) throw std::invalid_argument("ols: row count differs from response length");
    if (k == 0 || n <= k) {
        throw std::invalid_argument("ols: need more rows (" + std::to_string(n) + ") than columns (" +
                                    std::to_string(k) + ")");
    }
    Eigen::VectorXd norms = X.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < k; ++j) {
        if (!(norms(j) > 0.0) || !std::isfinite(norms(j))) {
            throw SingularDesignError("ols: column " + std::to_string(j) + " is zero or non-finite");
        }
    }
    const Eigen::MatrixXd Xs = X * norms.cwiseInverse().asDiagonal();

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
    qr.setThreshold(1e-10);
    if (qr.rank() < k) throw SingularDesignError("ols: design matrix is rank deficient");

    const Eigen::VectorXd beta_scaled = qr.solve(y);
    OlsFit fit;
    fit.coefficients = beta_scaled.cwiseQuotient(norms);
    fit.residuals = y - X * fit.coefficients;
    fit.n_obs = static_cast<std::size_t>(n);
    fit.df_resid = static_cast<std::size_t>(n - k);
    fit.sigma2 = fit.residuals.squaredNorm() / static_cast<double>(fit.df_resid);

    // (Xs'Xs)^-1 = P R^-1 R^-T P'
    const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
    const Eigen::MatrixXd Rinv =
        R.template triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
    const Eigen::VectorXd diag_perm = Rinv.rowwise().squaredNorm();
    Eigen::VectorXd diag(k);
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index j = 0; j < k; ++j) diag(perm(j)) = diag_perm(j);
    fit.standard_errors = (fit.sigma2 * diag).cwiseSqrt().cwiseQuotient(norms);
    return fit;
}

struct AdfCriticalValues {
    double one_pct = -3.43;
    double five_pct = -2.86;
    double ten_pct = -2.57;
};

struct AdfResult {
    double statistic = 0.0;
    int lags_used = 0;
    std::size_t n_obs = 0;
    AdfCriticalValues critical_values;
    bool is_stationary_5pct = false;
};

inline constexpr std::size_t kAdfMinLength = 20;

/// Schwert rule: floor(12 * (n / 100)^(1/4)).
inline int schwert_lag(std::size_t n) {
    return static_cast<int>(std::floor(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
}

/**
 * Augmented Dickey-Fuller test, constant and no trend:
 *
 *   dy_t = a + g * y_{t-1} + sum_{i=1..k} b_i * dy_{t-i} + e_t
 *
 * The statistic is the t-ratio of g, compared against the asymptotic constant-only
 * critical values. `max_lag` fixes k; nullopt picks it with the Schwert rule.
 */
inline AdfResult adf_test(std::span<const double> series, std::optional<int> max_lag = std::nullopt) {
    const std::size_t n = series.size();
    if (n < kAdfMinLength) {
        throw InsufficientDataError("adf_test: need at least " + std::to_string(kAdfMinLength) +
                                    " observations, got " + std::to_string(n));
    }
    const int k = max_lag.value_or(schwert_lag(n));
    if (k < 0) throw std::invalid_argument("adf_test: negative lag");

    // Usable rows: t = k+1 .. n-1 (needs dy_{t-k} with index >= 1).
    const auto uk = static_cast<std::size_t>(k);
    if (n < uk + 2) throw InsufficientDataError("adf_test: series too short for lag " + std::to_string(k));
    const std::size_t rows = n - 1 - uk;
    const std::size_t cols = 2 + uk;
    if (rows <= cols) throw InsufficientDataError("adf_test: series too short for lag " + std::to_string(k));

    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t t = r + uk + 1;
        const auto ri = static_cast<Eigen::Index>(r);
        y(ri) = series[t] - series[t - 1];
        X(ri, 0) = 1.0;
        X(ri, 1) = series[t - 1];
        for (std::size_t i = 1; i <= uk; ++i) {
            X(ri, static_cast<Eigen::Index>(1 + i)) = series[t - i] - series[t - i - 1];
        }
    }
    const OlsFit fit = ols(X, y);

    AdfResult res;
    res.statistic = fit.coefficients(1) / fit.standard_errors(1);
    res.lags_used = k;
    res.n_obs = rows;
    res.is_stationary_5pct = res.statistic < res.critical_values.five_pct;
    return res;
}

}  // namespace climcast::stats
