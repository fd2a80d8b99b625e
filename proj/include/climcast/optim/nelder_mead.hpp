#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

namespace climcast::optim {

struct NelderMeadOptions {
    /// Iteration cap for each descent (the initial one and every restart).
    int max_iterations = 2000;
    /// Converged when f_worst - f_best <= tolerance * (1 + |f_best|).
    double tolerance = 1e-8;
    /// Each restart rebuilds the simplex around the incumbent; stops once a restart no longer improves.
    int max_restarts = 5;
    double reflection = 1.0;
    double expansion = 2.0;
    double contraction = 0.5;
    double shrink = 0.5;
};

struct NelderMeadResult {
    std::vector<double> x;
    double fx = std::numeric_limits<double>::infinity();
    int iterations = 0;  ///< total over all descents
    int evaluations = 0;
    int restarts = 0;
    bool converged = false;
};

/**
 * Derivative-free downhill simplex minimization.
 *
 * `f` may return +inf to reject infeasible points; the initial point must be feasible.
 * `steps[i]` is the initial simplex edge along coordinate i.
 */
template <class Objective>
NelderMeadResult nelder_mead(Objective&& f, std::vector<double> x0, const std::vector<double>& steps,
                             const NelderMeadOptions& opts = {}) {
    const std::size_t n = x0.size();
    NelderMeadResult res;
    res.x = x0;
    res.fx = f(x0);
    res.evaluations = 1;
    if (n == 0) {
        res.converged = true;
        return res;
    }

    std::vector<std::vector<double>> pts(n + 1);
    std::vector<double> fv(n + 1);
    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), xr(n), xe(n), xc(n);

    auto eval = [&](const std::vector<double>& x) {
        ++res.evaluations;
        const double v = f(x);
        return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    };

    auto build_simplex = [&](const std::vector<double>& base, double base_f, double scale) {
        pts[0] = base;
        fv[0] = base_f;
        for (std::size_t i = 0; i < n; ++i) {
            pts[i + 1] = base;
            double step = steps[i] * scale;
            if (step == 0.0) step = 1e-4;
            pts[i + 1][i] += step;
            fv[i + 1] = eval(pts[i + 1]);
            // Stay inside the feasible region: step back toward the base, then flip.
            for (int tries = 0; !std::isfinite(fv[i + 1]) && tries < 30; ++tries) {
                step *= (tries % 2 == 0) ? -1.0 : 0.5;
                pts[i + 1][i] = base[i] + step;
                fv[i + 1] = eval(pts[i + 1]);
            }
        }
    };

    auto converged_now = [&] {
        const double fb = fv[order.front()];
        const double fw = fv[order.back()];
        return std::isfinite(fw) && (fw - fb) <= opts.tolerance * (1.0 + std::abs(fb));
    };

    build_simplex(res.x, res.fx, 1.0);
    int restarts = 0;
    double scale = 1.0;
    while (true) {
        bool inner_converged = false;
        for (int it = 0;; ++it) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
            if (converged_now()) {
                inner_converged = true;
                break;
            }
            if (it >= opts.max_iterations) break;
            ++res.iterations;
            const std::size_t worst = order[n];
            const std::size_t second = order[n - 1];
            const std::size_t best = order[0];

            std::fill(centroid.begin(), centroid.end(), 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                for (std::size_t i = 0; i < n; ++i) centroid[i] += pts[order[j]][i];
            }
            for (auto& c : centroid) c /= static_cast<double>(n);

            for (std::size_t i = 0; i < n; ++i) {
                xr[i] = centroid[i] + opts.reflection * (centroid[i] - pts[worst][i]);
            }
            const double fr = eval(xr);
            if (fr < fv[best]) {
                for (std::size_t i = 0; i < n; ++i) xe[i] = centroid[i] + opts.expansion * (xr[i] - centroid[i]);
                const double fe = eval(xe);
                if (fe < fr) {
                    pts[worst] = xe;
                    fv[worst] = fe;
                } else {
                    pts[worst] = xr;
                    fv[worst] = fr;
                }
                continue;
            }
            if (fr < fv[second]) {
                pts[worst] = xr;
                fv[worst] = fr;
                continue;
            }
            // Contraction: outside if the reflection beat the worst point, inside otherwise.
            const bool outside = fr < fv[worst];
            for (std::size_t i = 0; i < n; ++i) {
                xc[i] = outside ? centroid[i] + opts.contraction * (xr[i] - centroid[i])
                                : centroid[i] + opts.contraction * (pts[worst][i] - centroid[i]);
            }
            const double fc = eval(xc);
            if (fc < (outside ? fr : fv[worst])) {
                pts[worst] = xc;
                fv[worst] = fc;
                continue;
            }
            for (std::size_t j = 1; j <= n; ++j) {
                const std::size_t idx = order[j];
                for (std::size_t i = 0; i < n; ++i) {
                    pts[idx][i] = pts[best][i] + opts.shrink * (pts[idx][i] - pts[best][i]);
                }
                fv[idx] = eval(pts[idx]);
            }
        }

        const auto best_it = std::min_element(fv.begin(), fv.end());
        const auto best_idx = static_cast<std::size_t>(best_it - fv.begin());
        const double previous = res.fx;
        if (fv[best_idx] <= res.fx) {
            res.fx = fv[best_idx];
            res.x = pts[best_idx];
        }
        if (!inner_converged) {
            res.converged = false;
            return res;
        }
        const bool improved = previous - res.fx > opts.tolerance * (1.0 + std::abs(res.fx));
        if ((restarts > 0 && !improved) || restarts >= opts.max_restarts) {
            res.converged = true;
            return res;
        }
        ++restarts;
        res.restarts = restarts;
        scale *= 0.5;
        build_simplex(res.x, res.fx, scale);
    }
}

}  // namespace climcast::optim
