#pragma once

// Single-layer LSTM regressor (one input feature, dense scalar head) trained with full
// backpropagation through time and Adam.

#include <cmath>
#include <cstddef>
#include <cstdint>
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

namespace climcast::lstm {

struct LstmParams {
    int input_size = 1;
    int hidden_size = 0;
    std::size_t window_len = 0;  ///< window the model was trained on; 0 when unknown

    // Gate weights act on [x_t; h_{t-1}], hidden x (input + hidden).
    Eigen::MatrixXd W_f, W_i, W_o, W_g;
    Eigen::VectorXd b_f, b_i, b_o, b_g;
    Eigen::RowVectorXd W_y;
    double b_y = 0.0;

    static LstmParams zeros(int hidden) {
        LstmParams p;
        p.hidden_size = hidden;
        const Eigen::Index H = hidden;
        for (auto* W : {&p.W_f, &p.W_i, &p.W_o, &p.W_g}) W->setZero(H, 1 + H);
        for (auto* b : {&p.b_f, &p.b_i, &p.b_o, &p.b_g}) b->setZero(H);
        p.W_y.setZero(H);
        return p;
    }

    /// uniform(-k, k) with k = 1/sqrt(hidden); forget-gate bias starts at 1.
    static LstmParams init(int hidden, Rng& rng) {
        LstmParams p = zeros(hidden);
        const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
        p.visit([&](std::string_view, double* data, Eigen::Index rows, Eigen::Index cols) {
            for (Eigen::Index i = 0; i < rows * cols; ++i) data[i] = uniform(rng, -k, k);
        });
        p.b_f.setOnes();
        return p;
    }

    /// Calls f(name, data, rows, cols) for each parameter block in a fixed order.
    template <class F>
    void visit(F&& f) {
        f("W_f", W_f.data(), W_f.rows(), W_f.cols());
        f("W_i", W_i.data(), W_i.rows(), W_i.cols());
        f("W_o", W_o.data(), W_o.rows(), W_o.cols());
        f("W_g", W_g.data(), W_g.rows(), W_g.cols());
        f("b_f", b_f.data(), b_f.rows(), Eigen::Index{1});
        f("b_i", b_i.data(), b_i.rows(), Eigen::Index{1});
        f("b_o", b_o.data(), b_o.rows(), Eigen::Index{1});
        f("b_g", b_g.data(), b_g.rows(), Eigen::Index{1});
        f("W_y", W_y.data(), Eigen::Index{1}, W_y.cols());
        f("b_y", &b_y, Eigen::Index{1}, Eigen::Index{1});
    }
    template <class F>
    void visit(F&& f) const {
        const_cast<LstmParams*>(this)->visit(
            [&](std::string_view name, double* d, Eigen::Index r, Eigen::Index c) { f(name, static_cast<const double*>(d), r, c); });
    }

    [[nodiscard]] Eigen::Index n_params() const {
        const Eigen::Index H = hidden_size;
        return 4 * H * (1 + H) + 4 * H + H + 1;
    }

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
        if (flat.size() != n_params()) throw std::invalid_argument("LstmParams::unflatten: size mismatch");
        Eigen::Index off = 0;
        visit([&](std::string_view, double* d, Eigen::Index r, Eigen::Index c) {
            Eigen::Map<Eigen::VectorXd>(d, r * c) = flat.segment(off, r * c);
            off += r * c;
        });
    }

    [[nodiscard]] bool all_finite() const { return flatten().allFinite(); }
};

/// Activations of a forward pass over a batch (columns are samples).
struct LstmCache {
    Eigen::MatrixXd x;  ///< steps x batch inputs
    std::vector<Eigen::MatrixXd> f, i, o, g, c, tanh_c, h;  ///< index t+1 holds step t; index 0 is the zero state
    Eigen::RowVectorXd prediction;
};

namespace detail {

inline Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
    return (1.0 + (-z.array()).exp()).inverse().matrix();
}

/// inputs: batch x steps (row per sample).
inline LstmCache forward_batch(const LstmParams& p, const Eigen::MatrixXd& inputs) {
    const Eigen::Index H = p.hidden_size;
    const Eigen::Index B = inputs.rows();
    const Eigen::Index T = inputs.cols();
    LstmCache cache;
    cache.x = inputs.transpose();
    for (auto* v : {&cache.f, &cache.i, &cache.o, &cache.g, &cache.c, &cache.tanh_c, &cache.h}) {
        v->resize(static_cast<std::size_t>(T) + 1);
    }
    cache.c[0] = Eigen::MatrixXd::Zero(H, B);
    cache.h[0] = Eigen::MatrixXd::Zero(H, B);

    Eigen::MatrixXd z(H, B);
    auto gate_pre = [&](const Eigen::MatrixXd& W, const Eigen::VectorXd& b, Eigen::Index t) {
        z.noalias() = W.rightCols(H) * cache.h[static_cast<std::size_t>(t)];
        z.noalias() += W.col(0) * cache.x.row(t);
        z.colwise() += b;
        return z;
    };
    for (Eigen::Index t = 0; t < T; ++t) {
        const auto s = static_cast<std::size_t>(t) + 1;
        cache.f[s] = sigmoid(gate_pre(p.W_f, p.b_f, t));
        cache.i[s] = sigmoid(gate_pre(p.W_i, p.b_i, t));
        cache.o[s] = sigmoid(gate_pre(p.W_o, p.b_o, t));
        cache.g[s] = gate_pre(p.W_g, p.b_g, t).array().tanh().matrix();
        cache.c[s] = cache.f[s].cwiseProduct(cache.c[s - 1]) + cache.i[s].cwiseProduct(cache.g[s]);
        cache.tanh_c[s] = cache.c[s].array().tanh().matrix();
        cache.h[s] = cache.o[s].cwiseProduct(cache.tanh_c[s]);
        if (!cache.h[s].allFinite()) {
            throw NumericError("lstm forward: non-finite hidden state at step " + std::to_string(t));
        }
    }
    cache.prediction = (p.W_y * cache.h[static_cast<std::size_t>(T)]).array() + p.b_y;
    return cache;
}

/// Gradient of sum_b dpred(b) * prediction(b) with respect to every parameter.
inline LstmParams backward_batch(const LstmParams& p, const LstmCache& cache, const Eigen::RowVectorXd& dpred) {
    const Eigen::Index H = p.hidden_size;
    const Eigen::Index T = cache.x.rows();
    LstmParams grad = LstmParams::zeros(p.hidden_size);
    const auto last = static_cast<std::size_t>(T);

    grad.W_y.noalias() = dpred * cache.h[last].transpose();
    grad.b_y = dpred.sum();
    Eigen::MatrixXd dh = p.W_y.transpose() * dpred;
    Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(H, cache.x.cols());
    Eigen::MatrixXd da_f, da_i, da_o, da_g;

    auto accumulate = [&](Eigen::MatrixXd& dW, Eigen::VectorXd& db, const Eigen::MatrixXd& da, std::size_t s) {
        dW.rightCols(H).noalias() += da * cache.h[s - 1].transpose();
        dW.col(0).noalias() += da * cache.x.row(static_cast<Eigen::Index>(s - 1)).transpose();
        db += da.rowwise().sum();
    };

    for (std::size_t s = last; s >= 1; --s) {
        const auto& f = cache.f[s];
        const auto& i = cache.i[s];
        const auto& o = cache.o[s];
        const auto& g = cache.g[s];
        const auto& tc = cache.tanh_c[s];
        dc.array() += dh.array() * o.array() * (1.0 - tc.array().square());
        da_o = (dh.array() * tc.array() * o.array() * (1.0 - o.array())).matrix();
        da_f = (dc.array() * cache.c[s - 1].array() * f.array() * (1.0 - f.array())).matrix();
        da_i = (dc.array() * g.array() * i.array() * (1.0 - i.array())).matrix();
        da_g = (dc.array() * i.array() * (1.0 - g.array().square())).matrix();

        accumulate(grad.W_f, grad.b_f, da_f, s);
        accumulate(grad.W_i, grad.b_i, da_i, s);
        accumulate(grad.W_o, grad.b_o, da_o, s);
        accumulate(grad.W_g, grad.b_g, da_g, s);

        dh.noalias() = p.W_f.rightCols(H).transpose() * da_f;
        dh.noalias() += p.W_i.rightCols(H).transpose() * da_i;
        dh.noalias() += p.W_o.rightCols(H).transpose() * da_o;
        dh.noalias() += p.W_g.rightCols(H).transpose() * da_g;
        dc = dc.cwiseProduct(f);
    }
    return grad;
}

}  // namespace detail

struct Prediction {
    double value = 0.0;
    LstmCache cache;
};

/// Runs the cell over `window` from a zero state; prediction = W_y h_T + b_y.
inline Prediction forward(const LstmParams& params, std::span<const double> window) {
    if (window.empty()) throw std::invalid_argument("lstm forward: empty window");
    const Eigen::MatrixXd x = Eigen::Map<const Eigen::RowVectorXd>(window.data(), static_cast<Eigen::Index>(window.size()));
    Prediction out;
    out.cache = detail::forward_batch(params, x);
    out.value = out.cache.prediction(0);
    return out;
}

/// Squared error (pred - target)^2 for one window and its gradient.
inline std::pair<double, LstmParams> loss_and_gradient(const LstmParams& params, std::span<const double> window,
                                                       double target) {
    const auto pred = forward(params, window);
    const double err = pred.value - target;
    Eigen::RowVectorXd dpred(1);
    dpred(0) = 2.0 * err;
    return {err * err, detail::backward_batch(params, pred.cache, dpred)};
}

/// Predictions for every row of `inputs` (batch x window).
inline Eigen::VectorXd predict(const LstmParams& params, const Eigen::MatrixXd& inputs) {
    if (inputs.rows() == 0) return {};
    return detail::forward_batch(params, inputs).prediction.transpose();
}

struct TrainResult {
    LstmParams params;
    std::vector<EpochLoss> history;
    int best_epoch = 0;  ///< epoch whose parameters were returned
};

/**
 * Minibatch MSE training with Adam. The last validation_fraction of the samples (taken in
 * the order given, which callers keep chronological) is held out for the validation curve;
 * the rest is reshuffled every epoch with the configured seed.
 */
inline TrainResult train(const series::WindowedDataset& dataset, const TrainConfig& config) {
    config.validate();
    if (dataset.window_len != config.window_len) {
        throw std::invalid_argument("lstm train: dataset window " + std::to_string(dataset.window_len) +
                                    " differs from config window " + std::to_string(config.window_len));
    }
    const auto [n_train, n_val] = carve_validation(dataset.size(), config);

    Rng rng(config.seed);
    TrainResult result;
    result.params = LstmParams::init(config.hidden_size, rng);
    result.params.window_len = dataset.window_len;
    optim::AdamState adam(result.params.n_params(), {.lr = config.learning_rate});
    Eigen::VectorXd flat = result.params.flatten();

    const auto T = static_cast<Eigen::Index>(dataset.window_len);
    const Eigen::MatrixXd val_x = dataset.inputs.bottomRows(static_cast<Eigen::Index>(n_val));
    const Eigen::VectorXd val_y = dataset.targets.tail(static_cast<Eigen::Index>(n_val));

    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Eigen::MatrixXd xb;
    Eigen::RowVectorXd yb;
    LstmParams best = result.params;
    double best_val = std::numeric_limits<double>::infinity();
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle(std::span<std::size_t>(order), rng);
        double sse = 0.0;
        for (std::size_t start = 0; start < n_train; start += config.batch_size) {
            const std::size_t B = std::min(config.batch_size, n_train - start);
            xb.resize(static_cast<Eigen::Index>(B), T);
            yb.resize(static_cast<Eigen::Index>(B));
            for (std::size_t b = 0; b < B; ++b) {
                xb.row(static_cast<Eigen::Index>(b)) = dataset.inputs.row(static_cast<Eigen::Index>(order[start + b]));
                yb(static_cast<Eigen::Index>(b)) = dataset.targets(static_cast<Eigen::Index>(order[start + b]));
            }
            LstmCache cache;
            try {
                cache = detail::forward_batch(result.params, xb);
            } catch (const NumericError& err) {
                throw TrainingError(epoch, err.what());
            }
            const Eigen::RowVectorXd err = cache.prediction - yb;
            sse += err.squaredNorm();
            const Eigen::RowVectorXd dpred = (2.0 / static_cast<double>(B)) * err;
            const auto grad = detail::backward_batch(result.params, cache, dpred);
            adam.step(flat, grad.flatten());
            result.params.unflatten(flat);
        }
        EpochLoss loss{epoch, sse / static_cast<double>(n_train), NAN};
        if (n_val > 0) {
            try {
                loss.val_loss = (predict(result.params, val_x) - val_y).squaredNorm() / static_cast<double>(n_val);
            } catch (const NumericError& err) {
                throw TrainingError(epoch, err.what());
            }
        }
        if (!std::isfinite(loss.train_loss) || (n_val > 0 && !std::isfinite(loss.val_loss))) {
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

/// Rolls the model forward `horizon` steps, feeding each prediction back into the window.
inline std::vector<double> forecast_recursive(const LstmParams& params, std::span<const double> seed_window,
                                              int horizon) {
    if (horizon < 1) throw std::invalid_argument("forecast_recursive: horizon must be >= 1");
    if (params.window_len != 0 && seed_window.size() != params.window_len) {
        throw std::invalid_argument("forecast_recursive: seed window has length " +
                                    std::to_string(seed_window.size()) + ", model expects " +
                                    std::to_string(params.window_len));
    }
    std::vector<double> window(seed_window.begin(), seed_window.end());
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(horizon));
    for (int h = 0; h < horizon; ++h) {
        const double next = forward(params, window).value;
        out.push_back(next);
        window.erase(window.begin());
        window.push_back(next);
    }
    return out;
}

inline nlohmann::json checkpoint_json(const LstmParams& params) {
    nlohmann::json blocks = nlohmann::json::object();
    params.visit([&](std::string_view name, const double* d, Eigen::Index r, Eigen::Index c) {
        blocks[std::string(name)] = climcast::detail::matrix_to_json(d, r, c);
    });
    return {{"format", "climcast-lstm-v1"},
            {"input_size", params.input_size},
            {"hidden_size", params.hidden_size},
            {"window_len", params.window_len},
            {"params", blocks}};
}

inline LstmParams params_from_checkpoint(const nlohmann::json& j) {
    if (j.value("format", "") != "climcast-lstm-v1") throw std::invalid_argument("not an LSTM checkpoint");
    LstmParams p = LstmParams::zeros(j.at("hidden_size").get<int>());
    p.window_len = j.at("window_len").get<std::size_t>();
    const auto& blocks = j.at("params");
    p.visit([&](std::string_view name, double* d, Eigen::Index r, Eigen::Index c) {
        climcast::detail::matrix_from_json(blocks.at(std::string(name)), d, r, c, std::string(name));
    });
    return p;
}

}  // namespace climcast::lstm
