#pragma once

// Feedforward spiking classifier: flattened spike column -> dense ReLU hidden layer ->
// dense scalar current -> one leaky integrate-and-fire output neuron. Trained through time
// with an arctan surrogate for the spike derivative.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "climcast/error.hpp"
#include "climcast/optim/adam.hpp"
#include "climcast/random.hpp"
#include "climcast/series.hpp"
#include "climcast/training.hpp"

namespace climcast::snn {

struct LifConfig {
    double threshold = 0.5;
    double beta = 0.9;   ///< membrane decay per step
    double alpha = 2.0;  ///< surrogate sharpness

    void validate() const {
        if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("LifConfig: beta must lie in (0, 1)");
        if (!(threshold > 0.0)) throw std::invalid_argument("LifConfig: threshold must be > 0");
        if (!(alpha > 0.0)) throw std::invalid_argument("LifConfig: alpha must be > 0");
    }
};

struct LifStep {
    double v_next = 0.0;
    bool spike = false;
};

/// Discrete LIF update with hard reset: v' = beta v + I; spike iff v' >= v_th; reset to 0.
inline LifStep lif_step(double v, double input_current, const LifConfig& cfg) {
    const double v_pre = cfg.beta * v + input_current;
    const bool spike = v_pre >= cfg.threshold;
    return {spike ? 0.0 : v_pre, spike};
}

/// Smoothed spike (1/pi) atan(pi alpha (v - v_th) / 2) + 1/2.
inline double smoothed_spike(double v_pre, const LifConfig& cfg) {
    return std::atan(std::numbers::pi * cfg.alpha * (v_pre - cfg.threshold) / 2.0) / std::numbers::pi + 0.5;
}

/// Derivative of smoothed_spike; peaks at alpha / 2 on the threshold.
inline double surrogate_grad(double v_pre, const LifConfig& cfg) {
    const double u = std::numbers::pi * cfg.alpha * (v_pre - cfg.threshold) / 2.0;
    return cfg.alpha / (2.0 * (1.0 + u * u));
}

struct SnnParams {
    Eigen::MatrixXd W1;  ///< hidden x time_window
    Eigen::VectorXd b1;
    Eigen::RowVectorXd W2;  ///< 1 x hidden
    double b2 = 0.0;
    LifConfig lif;

    [[nodiscard]] Eigen::Index hidden() const { return W1.rows(); }
    [[nodiscard]] Eigen::Index time_window() const { return W1.cols(); }

    static SnnParams zeros(Eigen::Index hidden, Eigen::Index time_window, LifConfig lif = {}) {
        SnnParams p;
        p.W1.setZero(hidden, time_window);
        p.b1.setZero(hidden);
        p.W2.setZero(hidden);
        p.lif = lif;
        return p;
    }

    /// uniform(-k, k) per layer with k = 1/sqrt(fan_in).
    static SnnParams init(Eigen::Index hidden, Eigen::Index time_window, LifConfig lif, Rng& rng) {
        SnnParams p = zeros(hidden, time_window, lif);
        const double k1 = 1.0 / std::sqrt(static_cast<double>(time_window));
        const double k2 = 1.0 / std::sqrt(static_cast<double>(hidden));
        for (Eigen::Index i = 0; i < p.W1.size(); ++i) p.W1.data()[i] = uniform(rng, -k1, k1);
        for (Eigen::Index i = 0; i < p.b1.size(); ++i) p.b1(i) = uniform(rng, -k1, k1);
        for (Eigen::Index i = 0; i < p.W2.size(); ++i) p.W2(i) = uniform(rng, -k2, k2);
        p.b2 = uniform(rng, -k2, k2);
        return p;
    }

    template <class F>
    void visit(F&& f) {
        f("W1", W1.data(), W1.rows(), W1.cols());
        f("b1", b1.data(), b1.rows(), Eigen::Index{1});
        f("W2", W2.data(), Eigen::Index{1}, W2.cols());
        f("b2", &b2, Eigen::Index{1}, Eigen::Index{1});
    }
    template <class F>
    void visit(F&& f) const {
        const_cast<SnnParams*>(this)->visit(
            [&](std::string_view name, double* d, Eigen::Index r, Eigen::Index c) { f(name, static_cast<const double*>(d), r, c); });
    }

    [[nodiscard]] Eigen::Index n_params() const { return W1.size() + b1.size() + W2.size() + 1; }

    [[nodiscard]] Eigen::VectorXd flatten() const {
        Eigen::VectorXd out(n_params());
        Eigen::Index off = 0;
        visit([&](std::string_view, const double* d, Eigen::Index r, Eigen::Index c) {
            out.segment(off, r * c) = Eigen::Map<const Eigen::VectorXd>(d, r * c);
            off += r * c;
        });
        return out;
    }

    void unflatten(const Eigen::VectorXd& flat) {
        if (flat.size() != n_params()) throw std::invalid_argument("SnnParams::unflatten: size mismatch");
        Eigen::Index off = 0;
        visit([&](std::string_view, double* d, Eigen::Index r, Eigen::Index c) {
            Eigen::Map<Eigen::VectorXd>(d, r * c) = flat.segment(off, r * c);
            off += r * c;
        });
    }
};

struct SpikeForecast {
    int binary_prediction = 0;
    int spike_count = 0;
    double surrogate_rate = 0.0;  ///< spike_count / time_steps
};

/// Hard: Heaviside spikes (inference and training). Smooth: spikes replaced by smoothed_spike,
/// which makes the forward pass differentiable for gradient checks.
enum class SpikeMode { Hard, Smooth };

/// Per-step activations for a batch; columns are samples.
struct SnnCache {
    std::vector<Eigen::MatrixXd> x;        ///< time_window x batch spike column per step
    std::vector<Eigen::MatrixXd> a1;       ///< hidden pre-activations
    std::vector<Eigen::MatrixXd> h1;       ///< ReLU outputs
    std::vector<Eigen::RowVectorXd> v_pre;
    std::vector<Eigen::RowVectorXd> spike;
    Eigen::RowVectorXd rate;
};

namespace detail {

/// Gathers step-major spike columns for samples `rows` of `batch`.
inline std::vector<Eigen::MatrixXd> spike_columns(const series::SpikeTrainBatch& batch,
                                                  std::span<const std::size_t> rows) {
    const auto W = static_cast<Eigen::Index>(batch.time_window);
    std::vector<Eigen::MatrixXd> cols(batch.time_steps,
                                      Eigen::MatrixXd::Zero(W, static_cast<Eigen::Index>(rows.size())));
    for (std::size_t b = 0; b < rows.size(); ++b) {
        const auto sample = batch.sample(rows[b]);
        for (std::size_t p = 0; p < batch.time_window; ++p) {
            for (std::size_t t = 0; t < batch.time_steps; ++t) {
                if (sample[p * batch.time_steps + t]) {
                    cols[t](static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(b)) = 1.0;
                }
            }
        }
    }
    return cols;
}

inline SnnCache forward_batch(const SnnParams& p, std::vector<Eigen::MatrixXd> x, SpikeMode mode) {
    const std::size_t T = x.size();
    const Eigen::Index B = T > 0 ? x.front().cols() : 0;
    SnnCache cache;
    cache.x = std::move(x);
    cache.a1.resize(T);
    cache.h1.resize(T);
    cache.v_pre.resize(T);
    cache.spike.resize(T);
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(B);
    Eigen::RowVectorXd total = Eigen::RowVectorXd::Zero(B);
    for (std::size_t t = 0; t < T; ++t) {
        cache.a1[t].noalias() = p.W1 * cache.x[t];
        cache.a1[t].colwise() += p.b1;
        cache.h1[t] = cache.a1[t].cwiseMax(0.0);
        Eigen::RowVectorXd current = p.W2 * cache.h1[t];
        current.array() += p.b2;
        cache.v_pre[t] = p.lif.beta * v + current;
        cache.spike[t] = cache.v_pre[t].unaryExpr([&](double vp) {
            return mode == SpikeMode::Hard ? (vp >= p.lif.threshold ? 1.0 : 0.0) : smoothed_spike(vp, p.lif);
        });
        v = cache.v_pre[t].cwiseProduct((1.0 - cache.spike[t].array()).matrix());
        total += cache.spike[t];
    }
    cache.rate = total / static_cast<double>(T);
    if (!cache.rate.allFinite()) throw NumericError("snn forward: non-finite membrane state");
    return cache;
}

/// Gradient of sum_b drate(b) * rate(b). Reset is differentiated (not detached).
inline SnnParams backward_batch(const SnnParams& p, const SnnCache& cache, const Eigen::RowVectorXd& drate) {
    const std::size_t T = cache.x.size();
    SnnParams grad = SnnParams::zeros(p.hidden(), p.time_window(), p.lif);
    const Eigen::RowVectorXd ds_direct = drate / static_cast<double>(T);
    Eigen::RowVectorXd dv = Eigen::RowVectorXd::Zero(drate.size());  // dL/dv_t (post-reset)
    for (std::size_t t = T; t-- > 0;) {
        const auto& vp = cache.v_pre[t];
        const auto& s = cache.spike[t];
        const Eigen::RowVectorXd ds = ds_direct - dv.cwiseProduct(vp);
        const Eigen::RowVectorXd sg = vp.unaryExpr([&](double x) { return surrogate_grad(x, p.lif); });
        const Eigen::RowVectorXd dvp =
            dv.cwiseProduct((1.0 - s.array()).matrix()) + ds.cwiseProduct(sg);
        grad.W2.noalias() += dvp * cache.h1[t].transpose();
        grad.b2 += dvp.sum();
        const Eigen::MatrixXd da1 =
            ((p.W2.transpose() * dvp).array() * (cache.a1[t].array() > 0.0).cast<double>()).matrix();
        grad.W1.noalias() += da1 * cache.x[t].transpose();
        grad.b1 += da1.rowwise().sum();
        dv = p.lif.beta * dvp;
    }
    return grad;
}

inline void check_shape(const SnnParams& params, const series::SpikeTrainBatch& batch) {
    if (static_cast<Eigen::Index>(batch.time_window) != params.time_window()) {
        throw std::invalid_argument("snn: batch time_window " + std::to_string(batch.time_window) +
                                    " differs from network input width " + std::to_string(params.time_window()));
    }
}

}  // namespace detail

struct SnnForward {
    SpikeForecast forecast;
    SnnCache cache;
};

/// Runs one sample (time_window x time_steps, row-major binary) through the network.
inline SnnForward forward_snn(const SnnParams& params, std::span<const std::uint8_t> sample, std::size_t time_steps) {
    const auto W = static_cast<std::size_t>(params.time_window());
    if (time_steps == 0 || sample.size() != W * time_steps) {
        throw std::invalid_argument("forward_snn: sample has " + std::to_string(sample.size()) +
                                    " entries, expected " + std::to_string(W) + " x " + std::to_string(time_steps));
    }
    std::vector<Eigen::MatrixXd> cols(time_steps, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(W), 1));
    for (std::size_t p = 0; p < W; ++p) {
        for (std::size_t t = 0; t < time_steps; ++t) {
            const auto v = sample[p * time_steps + t];
            if (v > 1) throw std::invalid_argument("forward_snn: sample is not binary");
            cols[t](static_cast<Eigen::Index>(p), 0) = v;
        }
    }
    SnnForward out;
    out.cache = detail::forward_batch(params, std::move(cols), SpikeMode::Hard);
    int count = 0;
    for (const auto& s : out.cache.spike) count += s(0) > 0.5 ? 1 : 0;
    out.forecast.spike_count = count;
    out.forecast.surrogate_rate = static_cast<double>(count) / static_cast<double>(time_steps);
    out.forecast.binary_prediction = count >= 1 ? 1 : 0;
    return out;
}

/// Forecasts for every sample of a batch.
inline std::vector<SpikeForecast> predict(const SnnParams& params, const series::SpikeTrainBatch& batch) {
    detail::check_shape(params, batch);
    std::vector<std::size_t> rows(batch.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    std::vector<SpikeForecast> out(batch.size());
    if (batch.size() == 0) return out;
    const auto cache = detail::forward_batch(params, detail::spike_columns(batch, rows), SpikeMode::Hard);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        int count = 0;
        for (const auto& s : cache.spike) count += s(static_cast<Eigen::Index>(b)) > 0.5 ? 1 : 0;
        out[b].spike_count = count;
        out[b].surrogate_rate = static_cast<double>(count) / static_cast<double>(batch.time_steps);
        out[b].binary_prediction = count >= 1 ? 1 : 0;
    }
    return out;
}

/// Mean over samples of (rate - target)^2, and its gradient, in the given spike mode.
inline std::pair<double, SnnParams> loss_and_gradient(const SnnParams& params, const series::SpikeTrainBatch& batch,
                                                      std::span<const std::size_t> rows, SpikeMode mode) {
    const auto cache = detail::forward_batch(params, detail::spike_columns(batch, rows), mode);
    const auto B = static_cast<double>(rows.size());
    Eigen::RowVectorXd err(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t b = 0; b < rows.size(); ++b) {
        err(static_cast<Eigen::Index>(b)) = cache.rate(static_cast<Eigen::Index>(b)) - batch.binary_targets[rows[b]];
    }
    const Eigen::RowVectorXd drate = (2.0 / B) * err;
    return {err.squaredNorm() / B, detail::backward_batch(params, cache, drate)};
}

struct TrainResult {
    SnnParams params;
    std::vector<EpochLoss> history;
    int best_epoch = 0;  ///< epoch whose parameters were returned
};

/**
 * Trains on MSE between the output spike rate and the binary label, with surrogate
 * gradients through the LIF recursion and Adam updates. The last validation_fraction of the
 * samples is held out for the validation curve. `config.hidden_size` sets the hidden width;
 * `config.window_len` must equal the batch's time_window.
 */
inline TrainResult train_snn(const series::SpikeTrainBatch& batch, const TrainConfig& config,
                             const LifConfig& lif = {}) {
    config.validate();
    lif.validate();
    if (batch.size() == 0) throw std::invalid_argument("train_snn: empty batch");
    if (batch.time_window != config.window_len) {
        throw std::invalid_argument("train_snn: batch time_window differs from config window_len");
    }
    const auto [n_train, n_val] = carve_validation(batch.size(), config);

    Rng rng(config.seed);
    TrainResult result;
    result.params = SnnParams::init(config.hidden_size, static_cast<Eigen::Index>(batch.time_window), lif, rng);
    optim::AdamState adam(result.params.n_params(), {.lr = config.learning_rate});
    Eigen::VectorXd flat = result.params.flatten();

    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::size_t> val_rows(n_val);
    std::iota(val_rows.begin(), val_rows.end(), n_train);

    SnnParams best = result.params;
    double best_val = std::numeric_limits<double>::infinity();
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle(std::span<std::size_t>(order), rng);
        double sse = 0.0;
        for (std::size_t start = 0; start < n_train; start += config.batch_size) {
            const std::size_t B = std::min(config.batch_size, n_train - start);
            const std::span<const std::size_t> rows(order.data() + start, B);
            std::pair<double, SnnParams> lg;
            try {
                lg = loss_and_gradient(result.params, batch, rows, SpikeMode::Hard);
            } catch (const NumericError& err) {
                throw TrainingError(epoch, err.what());
            }
            sse += lg.first * static_cast<double>(B);
            adam.step(flat, lg.second.flatten());
            result.params.unflatten(flat);
        }
        EpochLoss loss{epoch, sse / static_cast<double>(n_train), NAN};
        if (n_val > 0) {
            const auto cache =
                detail::forward_batch(result.params, detail::spike_columns(batch, val_rows), SpikeMode::Hard);
            double v = 0.0;
            for (std::size_t b = 0; b < n_val; ++b) {
                const double e = cache.rate(static_cast<Eigen::Index>(b)) - batch.binary_targets[val_rows[b]];
                v += e * e;
            }
            loss.val_loss = v / static_cast<double>(n_val);
        }
        if (!std::isfinite(loss.train_loss) || !flat.allFinite()) {
            throw TrainingError(epoch, "loss became non-finite");
        }
        result.history.push_back(loss);
        if (!config.restore_best || n_val == 0 || loss.val_loss < best_val) {
            best_val = loss.val_loss;
            best = result.params;
            result.best_epoch = epoch;
        }
    }
    result.params = std::move(best);
    return result;
}

/// "sample,window_position,time_step,spike" for every cell of the batch.
inline void write_spike_raster_csv(std::ostream& out, const series::SpikeTrainBatch& batch) {
    out << "sample,window_position,time_step,spike\n";
    for (std::size_t s = 0; s < batch.size(); ++s) {
        for (std::size_t p = 0; p < batch.time_window; ++p) {
            for (std::size_t t = 0; t < batch.time_steps; ++t) {
                out << s << ',' << p << ',' << t << ',' << static_cast<int>(batch.at(s, p, t)) << '\n';
            }
        }
    }
}

inline nlohmann::json checkpoint_json(const SnnParams& params) {
    nlohmann::json blocks = nlohmann::json::object();
    params.visit([&](std::string_view name, const double* d, Eigen::Index r, Eigen::Index c) {
        blocks[std::string(name)] = climcast::detail::matrix_to_json(d, r, c);
    });
    return {{"format", "climcast-snn-v1"},
            {"hidden", params.hidden()},
            {"time_window", params.time_window()},
            {"lif", {{"threshold", params.lif.threshold}, {"beta", params.lif.beta}, {"alpha", params.lif.alpha}}},
            {"params", blocks}};
}

inline SnnParams params_from_checkpoint(const nlohmann::json& j) {
    if (j.value("format", "") != "climcast-snn-v1") throw std::invalid_argument("not an SNN checkpoint");
    LifConfig lif{j.at("lif").at("threshold").get<double>(), j.at("lif").at("beta").get<double>(),
                  j.at("lif").at("alpha").get<double>()};
    SnnParams p = SnnParams::zeros(j.at("hidden").get<Eigen::Index>(), j.at("time_window").get<Eigen::Index>(), lif);
    const auto& blocks = j.at("params");
    p.visit([&](std::string_view name, double* d, Eigen::Index r, Eigen::Index c) {
        climcast::detail::matrix_from_json(blocks.at(std::string(name)), d, r, c, std::string(name));
    });
    return p;
}

}  // namespace climcast::snn
