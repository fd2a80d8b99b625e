#pragma once

// ARIMA / seasonal ARIMA with an optional exogenous regressor, estimated by conditional
// sum of squares with a Nelder-Mead search.
//
// Model on the working series w (differenced, exogenous effect removed):
//
//   A(B) w_t = c + M(B) e_t
//   A(B) = (1 - sum phi_i B^i)(1 - sum Phi_j B^{s j})
//   M(B) = (1 + sum theta_i B^i)(1 + sum Theta_j B^{s j})

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "climcast/error.hpp"
#include "climcast/optim/nelder_mead.hpp"
#include "climcast/stattests.hpp"

namespace climcast::arima {

struct SeasonalOrder {
    int P = 0;
    int D = 0;
    int Q = 0;
    int s = 12;
};

struct ArimaSpec {
    int p = 5;
    int d = 1;
    int q = 3;
    std::optional<SeasonalOrder> seasonal;
    bool use_exogenous = false;

    [[nodiscard]] int P() const { return seasonal ? seasonal->P : 0; }
    [[nodiscard]] int D() const { return seasonal ? seasonal->D : 0; }
    [[nodiscard]] int Q() const { return seasonal ? seasonal->Q : 0; }
    [[nodiscard]] int period() const { return seasonal ? seasonal->s : 1; }

    [[nodiscard]] int n_arma_params() const { return p + q + P() + Q(); }

    void validate() const {
        if (p < 0 || d < 0 || q < 0) throw std::invalid_argument("ArimaSpec: negative order");
        if (seasonal) {
            if (seasonal->P < 0 || seasonal->D < 0 || seasonal->Q < 0) {
                throw std::invalid_argument("ArimaSpec: negative seasonal order");
            }
            if (seasonal->s < 2) throw std::invalid_argument("ArimaSpec: seasonal period must be >= 2");
        }
        if (n_arma_params() == 0) {
            throw std::invalid_argument("ArimaSpec: " + to_string() + " has no estimable ARMA parameters");
        }
    }

    [[nodiscard]] std::string to_string() const {
        std::string out = "(" + std::to_string(p) + "," + std::to_string(d) + "," + std::to_string(q) + ")";
        if (seasonal) {
            out += "x(" + std::to_string(seasonal->P) + "," + std::to_string(seasonal->D) + "," +
                   std::to_string(seasonal->Q) + "," + std::to_string(seasonal->s) + ")";
        }
        if (use_exogenous) out += "+exog";
        return out;
    }
};

struct FitOptions {
    int max_iterations = 2000;
    double tolerance = 1e-8;
};

/// Smallest admissible root modulus for the AR and MA polynomials.
inline constexpr double kRootMargin = 1.0 + 1e-6;

struct ArimaFit {
    ArimaSpec spec;
    std::vector<double> phi;
    std::vector<double> theta;
    std::vector<double> seasonal_phi;
    std::vector<double> seasonal_theta;
    double beta_exog = 0.0;
    double intercept = 0.0;
    double sigma2 = 0.0;
    std::vector<double> residuals;  ///< CSS innovations for working indices >= ar_lags()
    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    std::size_t n_obs = 0;
    bool converged = true;
    int iterations = 0;

    // Conditioning state used by forecast().
    std::vector<double> history;       ///< original-scale series
    std::vector<double> exog_history;  ///< original-scale exogenous series (empty without exog)
    std::vector<double> working;       ///< differenced series minus beta * differenced exog

    [[nodiscard]] int n_params() const {
        return spec.n_arma_params() + 2 + (spec.use_exogenous ? 1 : 0);  // + intercept + sigma2
    }
};

struct ArimaForecast {
    std::vector<double> mean;
    std::vector<double> lower;
    std::vector<double> upper;
};

namespace detail {

/// Lags of the differencing operators, seasonal first.
inline std::vector<int> difference_lags(const ArimaSpec& spec) {
    std::vector<int> lags(static_cast<std::size_t>(spec.D()), spec.period());
    lags.insert(lags.end(), static_cast<std::size_t>(spec.d), 1);
    return lags;
}

inline std::size_t total_lag(const ArimaSpec& spec) {
    const auto lags = difference_lags(spec);
    return static_cast<std::size_t>(std::accumulate(lags.begin(), lags.end(), 0));
}

inline std::vector<double> lag_difference(std::span<const double> x, int lag) {
    const auto L = static_cast<std::size_t>(lag);
    if (x.size() <= L) throw InsufficientDataError("series too short to difference at lag " + std::to_string(lag));
    std::vector<double> out(x.size() - L);
    for (std::size_t i = L; i < x.size(); ++i) out[i - L] = x[i] - x[i - L];
    return out;
}

inline std::vector<double> apply_differences(std::span<const double> x, const std::vector<int>& lags) {
    std::vector<double> cur(x.begin(), x.end());
    for (int lag : lags) cur = lag_difference(cur, lag);
    return cur;
}

/// Coefficients a of 1 - sum a_k B^k = (1 - sum phi_i B^i)(1 - sum Phi_j B^{s j}).
inline std::vector<double> expand_ar(std::span<const double> phi, std::span<const double> sphi, int s) {
    const std::size_t len = phi.size() + sphi.size() * static_cast<std::size_t>(s);
    std::vector<double> poly_a(phi.size() + 1, 0.0), poly_b(sphi.size() * static_cast<std::size_t>(s) + 1, 0.0);
    poly_a[0] = 1.0;
    for (std::size_t i = 0; i < phi.size(); ++i) poly_a[i + 1] = -phi[i];
    poly_b[0] = 1.0;
    for (std::size_t j = 0; j < sphi.size(); ++j) poly_b[(j + 1) * static_cast<std::size_t>(s)] = -sphi[j];
    std::vector<double> prod(len + 1, 0.0);
    for (std::size_t i = 0; i < poly_a.size(); ++i) {
        for (std::size_t j = 0; j < poly_b.size(); ++j) prod[i + j] += poly_a[i] * poly_b[j];
    }
    std::vector<double> a(len);
    for (std::size_t k = 0; k < len; ++k) a[k] = -prod[k + 1];
    return a;
}

/// Coefficients m of 1 + sum m_k B^k = (1 + sum theta_i B^i)(1 + sum Theta_j B^{s j}).
inline std::vector<double> expand_ma(std::span<const double> theta, std::span<const double> stheta, int s) {
    std::vector<double> neg_t(theta.size()), neg_st(stheta.size());
    std::transform(theta.begin(), theta.end(), neg_t.begin(), [](double v) { return -v; });
    std::transform(stheta.begin(), stheta.end(), neg_st.begin(), [](double v) { return -v; });
    // (1 + sum t B^i) = (1 - sum (-t) B^i); reuse expand_ar and flip the sign back.
    auto m = expand_ar(neg_t, neg_st, s);
    for (auto& v : m) v = -v;
    return m;
}

/// True when every root of 1 - sum c_i z^i has modulus > margin.
inline bool roots_outside(std::span<const double> c, double margin) {
    std::size_t p = c.size();
    while (p > 0 && c[p - 1] == 0.0) --p;
    if (p == 0) return true;
    for (std::size_t i = 0; i < p; ++i) {
        if (!std::isfinite(c[i])) return false;
    }
    const double bound = 1.0 / margin;
    if (p == 1) return std::abs(c[0]) < bound;
    // Eigenvalues of the companion matrix are the reciprocal roots.
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < p; ++i) comp(0, static_cast<Eigen::Index>(i)) = c[i];
    for (std::size_t i = 1; i < p; ++i) comp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    if (es.info() != Eigen::Success) return false;
    return es.eigenvalues().cwiseAbs().maxCoeff() < bound;
}

inline bool ar_admissible(std::span<const double> coeffs, int power = 1) {
    return roots_outside(coeffs, std::pow(kRootMargin, power));
}

inline bool ma_admissible(std::span<const double> coeffs, int power = 1) {
    std::vector<double> neg(coeffs.size());
    std::transform(coeffs.begin(), coeffs.end(), neg.begin(), [](double v) { return -v; });
    return roots_outside(neg, std::pow(kRootMargin, power));
}

/// CSS innovations for t >= a.size(); innovations before that are taken as zero.
inline std::vector<double> css_residuals(std::span<const double> w, double c, std::span<const double> a,
                                         std::span<const double> m) {
    const std::size_t r = a.size();
    const std::size_t n = w.size();
    if (n <= r) return {};
    std::vector<double> e(n, 0.0);
    for (std::size_t t = r; t < n; ++t) {
        double pred = c;
        for (std::size_t k = 0; k < r; ++k) pred += a[k] * w[t - k - 1];
        const std::size_t mq = std::min(m.size(), t);
        for (std::size_t k = 0; k < mq; ++k) pred += m[k] * e[t - k - 1];
        e[t] = w[t] - pred;
    }
    return {e.begin() + static_cast<std::ptrdiff_t>(r), e.end()};
}

/// Levinson-Durbin solution of the Yule-Walker equations (always a stationary AR).
inline std::vector<double> yule_walker(std::span<const double> x, int p) {
    std::vector<double> phi(static_cast<std::size_t>(p), 0.0);
    if (p == 0 || x.size() <= static_cast<std::size_t>(p)) return phi;
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    std::vector<double> acov(static_cast<std::size_t>(p) + 1, 0.0);
    for (std::size_t k = 0; k <= static_cast<std::size_t>(p); ++k) {
        for (std::size_t t = k; t < x.size(); ++t) acov[k] += (x[t] - mean) * (x[t - k] - mean);
        acov[k] /= static_cast<double>(x.size());
    }
    if (!(acov[0] > 0.0)) return phi;
    std::vector<double> prev;
    double err = acov[0];
    for (std::size_t k = 1; k <= static_cast<std::size_t>(p); ++k) {
        double acc = acov[k];
        for (std::size_t j = 1; j < k; ++j) acc -= prev[j - 1] * acov[k - j];
        const double refl = acc / err;
        std::vector<double> cur(k);
        for (std::size_t j = 1; j < k; ++j) cur[j - 1] = prev[j - 1] - refl * prev[k - j - 1];
        cur[k - 1] = refl;
        err *= (1.0 - refl * refl);
        prev = std::move(cur);
        if (!(err > 0.0)) break;
    }
    prev.resize(static_cast<std::size_t>(p), 0.0);
    return prev;
}

struct Unpacked {
    double mu;
    std::span<const double> phi, theta, sphi, stheta;
};

inline Unpacked unpack(std::span<const double> x, const ArimaSpec& spec) {
    const auto p = static_cast<std::size_t>(spec.p), q = static_cast<std::size_t>(spec.q);
    const auto P = static_cast<std::size_t>(spec.P()), Q = static_cast<std::size_t>(spec.Q());
    return {x[0], x.subspan(1, p), x.subspan(1 + p, q), x.subspan(1 + p + q, P), x.subspan(1 + p + q + P, Q)};
}

inline bool admissible(const Unpacked& u, int s) {
    return ar_admissible(u.phi) && ma_admissible(u.theta) && ar_admissible(u.sphi, s) && ma_admissible(u.stheta, s);
}

inline double ar_sum_factor(std::span<const double> a) {
    return 1.0 - std::accumulate(a.begin(), a.end(), 0.0);
}

/// psi weights of the integrated model: M(B) / (A(B) * prod (1 - B^lag)).
inline std::vector<double> psi_weights(std::span<const double> a, std::span<const double> m,
                                       const std::vector<int>& lags, std::size_t count) {
    std::vector<double> poly(a.size() + 1, 0.0);
    poly[0] = 1.0;
    for (std::size_t k = 0; k < a.size(); ++k) poly[k + 1] = -a[k];
    for (int lag : lags) {
        std::vector<double> next(poly.size() + static_cast<std::size_t>(lag), 0.0);
        for (std::size_t i = 0; i < poly.size(); ++i) {
            next[i] += poly[i];
            next[i + static_cast<std::size_t>(lag)] -= poly[i];
        }
        poly = std::move(next);
    }
    std::vector<double> psi(count, 0.0);
    for (std::size_t j = 0; j < count; ++j) {
        double v = j == 0 ? 1.0 : (j - 1 < m.size() ? m[j - 1] : 0.0);
        for (std::size_t i = 1; i < poly.size() && i <= j; ++i) v -= poly[i] * psi[j - i];
        psi[j] = v;
    }
    return psi;
}

}  // namespace detail

/// Expanded AR coefficients a_k of the fitted model (seasonal factors multiplied out).
inline std::vector<double> full_ar(const ArimaFit& fit) {
    return detail::expand_ar(fit.phi, fit.seasonal_phi, fit.spec.period());
}

inline std::vector<double> full_ma(const ArimaFit& fit) {
    return detail::expand_ma(fit.theta, fit.seasonal_theta, fit.spec.period());
}

inline std::size_t min_fit_length(const ArimaSpec& spec) {
    return 10 * static_cast<std::size_t>(spec.n_arma_params() + 1) + detail::total_lag(spec);
}

/// Recomputes working series and residuals of `fit` conditioned on a new history.
inline ArimaFit condition_on(const ArimaFit& fit, std::span<const double> series,
                             std::span<const double> exog = {}) {
    if (fit.spec.use_exogenous && exog.size() != series.size()) {
        throw std::invalid_argument("condition_on: exogenous series length differs from series");
    }
    ArimaFit out = fit;
    const auto lags = detail::difference_lags(fit.spec);
    out.history.assign(series.begin(), series.end());
    out.working = detail::apply_differences(series, lags);
    if (fit.spec.use_exogenous) {
        out.exog_history.assign(exog.begin(), exog.end());
        const auto xd = detail::apply_differences(exog, lags);
        for (std::size_t i = 0; i < out.working.size(); ++i) out.working[i] -= fit.beta_exog * xd[i];
    } else {
        out.exog_history.clear();
    }
    out.residuals = detail::css_residuals(out.working, fit.intercept, full_ar(fit), full_ma(fit));
    return out;
}

/**
 * Fits ARIMA(p,d,q)[x(P,D,Q)s] by conditional sum of squares.
 *
 * With an exogenous series, the differenced series is first regressed on the identically
 * differenced regressor; the ARMA part is then estimated on what remains. The search runs
 * over (mean, phi, theta, Phi, Theta); parameter vectors with AR or MA roots inside the
 * unit-circle margin score +inf.
 *
 * Throws ConvergenceError (carrying the best point) if the simplex does not converge.
 */
inline ArimaFit fit(std::span<const double> series, const ArimaSpec& spec,
                    std::optional<std::span<const double>> exog = std::nullopt, const FitOptions& opts = {}) {
    spec.validate();
    if (spec.use_exogenous != exog.has_value()) {
        throw std::invalid_argument(spec.use_exogenous ? "fit: exogenous spec without exogenous series"
                                                       : "fit: exogenous series given to a non-exogenous spec");
    }
    if (exog && exog->size() != series.size()) {
        throw std::invalid_argument("fit: exogenous series length differs from series");
    }
    if (series.size() < min_fit_length(spec)) {
        throw InsufficientDataError("fit: " + spec.to_string() + " needs at least " +
                                    std::to_string(min_fit_length(spec)) + " observations, got " +
                                    std::to_string(series.size()));
    }
    for (double v : series) {
        if (!std::isfinite(v)) throw std::invalid_argument("fit: non-finite observation");
    }

    const auto lags = detail::difference_lags(spec);
    const int s = spec.period();
    std::vector<double> working = detail::apply_differences(series, lags);

    double beta = 0.0;
    if (exog) {
        const auto xd = detail::apply_differences(*exog, lags);
        const bool all_zero = std::all_of(xd.begin(), xd.end(), [](double v) { return v == 0.0; });
        if (!all_zero) {
            const auto n = static_cast<Eigen::Index>(working.size());
            Eigen::MatrixXd X(n, 2);
            X.col(0).setOnes();
            X.col(1) = Eigen::Map<const Eigen::VectorXd>(xd.data(), n);
            const auto ols_fit = stats::ols(X, Eigen::Map<const Eigen::VectorXd>(working.data(), n));
            beta = ols_fit.coefficients(1);
            for (std::size_t i = 0; i < working.size(); ++i) working[i] -= beta * xd[i];
        }
    }

    const std::size_t r = static_cast<std::size_t>(spec.p + s * spec.P());
    if (working.size() <= r + static_cast<std::size_t>(spec.n_arma_params()) + 1) {
        throw InsufficientDataError("fit: working series too short after differencing");
    }

    // Start: Yule-Walker phi, zero MA and seasonal terms, mean of the working series.
    const auto np = static_cast<std::size_t>(1 + spec.n_arma_params());
    std::vector<double> x0(np, 0.0);
    const double mean = std::accumulate(working.begin(), working.end(), 0.0) / static_cast<double>(working.size());
    double var = 0.0;
    for (double v : working) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(working.size()));
    x0[0] = mean;
    auto yw = detail::yule_walker(working, spec.p);
    for (int shrink = 0; shrink < 50 && !detail::ar_admissible(yw); ++shrink) {
        for (auto& v : yw) v *= 0.9;
    }
    std::copy(yw.begin(), yw.end(), x0.begin() + 1);

    std::vector<double> steps(np, 0.1);
    steps[0] = sd > 0.0 ? 0.1 * sd : 0.1;

    const double n_eff = static_cast<double>(working.size() - r);
    auto objective = [&](const std::vector<double>& x) {
        const auto u = detail::unpack(x, spec);
        if (!detail::admissible(u, s)) return std::numeric_limits<double>::infinity();
        const auto a = detail::expand_ar(u.phi, u.sphi, s);
        const auto m = detail::expand_ma(u.theta, u.stheta, s);
        const double c = u.mu * detail::ar_sum_factor(a);
        const auto e = detail::css_residuals(working, c, a, m);
        double sse = 0.0;
        for (double v : e) sse += v * v;
        return std::isfinite(sse) ? sse / n_eff : std::numeric_limits<double>::infinity();
    };

    optim::NelderMeadOptions nm;
    nm.max_iterations = opts.max_iterations;
    nm.tolerance = opts.tolerance;
    const auto best = optim::nelder_mead(objective, x0, steps, nm);
    if (!best.converged) {
        throw ConvergenceError("fit: " + spec.to_string() + " did not converge in " +
                                   std::to_string(best.iterations) + " simplex iterations",
                               best.x, best.fx, best.iterations);
    }

    ArimaFit out;
    out.spec = spec;
    const auto u = detail::unpack(best.x, spec);
    out.phi.assign(u.phi.begin(), u.phi.end());
    out.theta.assign(u.theta.begin(), u.theta.end());
    out.seasonal_phi.assign(u.sphi.begin(), u.sphi.end());
    out.seasonal_theta.assign(u.stheta.begin(), u.stheta.end());
    out.beta_exog = beta;
    out.intercept = u.mu * detail::ar_sum_factor(full_ar(out));
    out.iterations = best.iterations;
    out.converged = true;
    out.history.assign(series.begin(), series.end());
    if (exog) out.exog_history.assign(exog->begin(), exog->end());
    out.working = std::move(working);
    out.residuals = detail::css_residuals(out.working, out.intercept, full_ar(out), full_ma(out));

    double sse = 0.0;
    for (double v : out.residuals) sse += v * v;
    out.n_obs = out.residuals.size();
    const double n = static_cast<double>(out.n_obs);
    out.sigma2 = sse / n;
    if (!(out.sigma2 > 0.0)) out.sigma2 = std::numeric_limits<double>::min();
    out.loglik = -0.5 * n * (std::log(2.0 * std::numbers::pi * out.sigma2) + 1.0);
    const double k = static_cast<double>(out.n_params());
    out.aic = -2.0 * out.loglik + 2.0 * k;
    out.bic = -2.0 * out.loglik + k * std::log(n);
    return out;
}

/// One-step-ahead fitted values of the working series, aligned with fit.residuals.
inline std::vector<double> working_fitted(const ArimaFit& fit) {
    const std::size_t r = full_ar(fit).size();
    std::vector<double> out(fit.residuals.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fit.working[i + r] - fit.residuals[i];
    return out;
}

/// One-step-ahead predictions on the original scale.
struct InSamplePredictions {
    std::size_t first_index = 0;  ///< history index of values[0]
    std::vector<double> values;
};

inline InSamplePredictions one_step_predictions(const ArimaFit& fit) {
    InSamplePredictions out;
    out.first_index = detail::total_lag(fit.spec) + full_ar(fit).size();
    out.values.resize(fit.residuals.size());
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = fit.history[out.first_index + i] - fit.residuals[i];
    }
    return out;
}

/**
 * Point forecasts and 95% intervals for `horizon` steps past the end of fit.history.
 *
 * Future innovations are zero; differencing is undone level by level from the stored
 * history, and the exogenous effect is added on the differenced scale first. The interval
 * half width at step h is 1.96 * sqrt(sigma2 * sum_{j<h} psi_j^2), with psi the MA(inf)
 * weights of the integrated model.
 */
inline ArimaForecast forecast(const ArimaFit& fit, int horizon,
                              std::optional<std::span<const double>> future_exog = std::nullopt) {
    if (horizon < 1) throw std::invalid_argument("forecast: horizon must be >= 1");
    if (fit.spec.use_exogenous != future_exog.has_value()) {
        throw std::invalid_argument(fit.spec.use_exogenous ? "forecast: model needs future exogenous values"
                                                           : "forecast: model has no exogenous regressor");
    }
    const auto H = static_cast<std::size_t>(horizon);
    if (future_exog && future_exog->size() != H) {
        throw std::invalid_argument("forecast: future exogenous length " + std::to_string(future_exog->size()) +
                                    " differs from horizon " + std::to_string(H));
    }
    const auto a = full_ar(fit);
    const auto m = full_ma(fit);
    const auto lags = detail::difference_lags(fit.spec);
    const std::size_t r = a.size();

    std::vector<double> w = fit.working;
    std::vector<double> e(w.size(), 0.0);
    for (std::size_t i = 0; i < fit.residuals.size(); ++i) e[i + r] = fit.residuals[i];
    const std::size_t n_w = w.size();
    for (std::size_t h = 0; h < H; ++h) {
        const std::size_t t = n_w + h;
        double v = fit.intercept;
        for (std::size_t k = 0; k < r && k < t; ++k) v += a[k] * w[t - k - 1];
        for (std::size_t k = 0; k < m.size() && k < t; ++k) v += m[k] * e[t - k - 1];
        w.push_back(v);
        e.push_back(0.0);
    }
    std::vector<double> z(w.begin() + static_cast<std::ptrdiff_t>(n_w), w.end());

    if (future_exog) {
        std::vector<double> xs = fit.exog_history;
        xs.insert(xs.end(), future_exog->begin(), future_exog->end());
        const auto xd = detail::apply_differences(xs, lags);
        for (std::size_t h = 0; h < H; ++h) z[h] += fit.beta_exog * xd[xd.size() - H + h];
    }

    // Undo differencing: levels[k] is the history after the first k differencing operators.
    std::vector<std::vector<double>> levels{fit.history};
    for (int lag : lags) levels.push_back(detail::lag_difference(levels.back(), lag));
    std::vector<double> future = std::move(z);
    for (std::size_t k = lags.size(); k-- > 0;) {
        auto ext = levels[k];
        const auto L = static_cast<std::size_t>(lags[k]);
        for (std::size_t h = 0; h < H; ++h) ext.push_back(future[h] + ext[ext.size() - L]);
        future.assign(ext.end() - static_cast<std::ptrdiff_t>(H), ext.end());
    }

    const auto psi = detail::psi_weights(a, m, lags, H);
    ArimaForecast out;
    out.mean = std::move(future);
    out.lower.resize(H);
    out.upper.resize(H);
    double acc = 0.0;
    for (std::size_t h = 0; h < H; ++h) {
        acc += psi[h] * psi[h];
        const double half = 1.96 * std::sqrt(fit.sigma2 * acc);
        out.lower[h] = out.mean[h] - half;
        out.upper[h] = out.mean[h] + half;
    }
    return out;
}

struct GridEntry {
    ArimaSpec spec;
    std::optional<ArimaFit> fit;
    std::string error;
};

/// Fits every candidate; successes are ranked by AIC (BIC breaks ties), failures follow.
inline std::vector<GridEntry> grid_search(std::span<const double> series, const std::vector<ArimaSpec>& specs,
                                          std::optional<std::span<const double>> exog = std::nullopt,
                                          const FitOptions& opts = {}) {
    if (specs.empty()) throw std::invalid_argument("grid_search: no candidate specs");
    std::vector<GridEntry> ok, failed;
    for (const auto& spec : specs) {
        try {
            const auto ex = spec.use_exogenous ? exog : std::nullopt;
            ok.push_back({spec, fit(series, spec, ex, opts), {}});
        } catch (const std::exception& err) {
            failed.push_back({spec, std::nullopt, err.what()});
        }
    }
    if (ok.empty()) {
        std::string msg = "grid_search: all " + std::to_string(specs.size()) + " candidates failed";
        for (const auto& f : failed) msg += "; " + f.spec.to_string() + ": " + f.error;
        throw std::runtime_error(msg);
    }
    std::stable_sort(ok.begin(), ok.end(), [](const GridEntry& x, const GridEntry& y) {
        if (x.fit->aic != y.fit->aic) return x.fit->aic < y.fit->aic;
        return x.fit->bic < y.fit->bic;
    });
    ok.insert(ok.end(), failed.begin(), failed.end());
    return ok;
}

inline nlohmann::json to_json(const ArimaSpec& spec) {
    nlohmann::json j{{"p", spec.p}, {"d", spec.d}, {"q", spec.q}, {"exogenous", spec.use_exogenous}};
    if (spec.seasonal) {
        j["seasonal"] = {{"P", spec.seasonal->P}, {"D", spec.seasonal->D}, {"Q", spec.seasonal->Q},
                         {"s", spec.seasonal->s}};
    }
    return j;
}

/// Fit summary: spec, coefficients, sigma2, loglik, aic, bic, convergence status.
inline nlohmann::json to_json(const ArimaFit& fit) {
    nlohmann::json coeffs{{"intercept", fit.intercept}, {"phi", fit.phi}, {"theta", fit.theta}};
    if (fit.spec.seasonal) {
        coeffs["seasonal_phi"] = fit.seasonal_phi;
        coeffs["seasonal_theta"] = fit.seasonal_theta;
    }
    if (fit.spec.use_exogenous) coeffs["beta_exog"] = fit.beta_exog;
    return {{"spec", to_json(fit.spec)}, {"coefficients", coeffs}, {"sigma2", fit.sigma2},
            {"loglik", fit.loglik},      {"aic", fit.aic},         {"bic", fit.bic},
            {"n_obs", fit.n_obs},        {"converged", fit.converged}, {"iterations", fit.iterations}};
}

}  // namespace climcast::arima
