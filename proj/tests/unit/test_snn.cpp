#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <sstream>

#include "climcast/snn.hpp"
#include "gradcheck.hpp"
#include "synthetic.hpp"

using namespace climcast;
using namespace climcast::snn;
using Catch::Matchers::WithinAbs;

namespace {

/// Windows of `width` values: label-1 rows draw from [0.6, 1], label-0 rows from [0, 0.4].
series::SpikeTrainBatch separable_batch(std::size_t n, std::size_t width, std::size_t time_steps, std::uint64_t seed) {
    Rng rng(seed);
    series::WindowedDataset ds;
    ds.window_len = width;
    ds.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
    ds.targets.resize(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < ds.inputs.rows(); ++i) {
        const bool high = uniform_index(rng, 2) == 1;
        for (Eigen::Index j = 0; j < ds.inputs.cols(); ++j) {
            ds.inputs(i, j) = high ? uniform(rng, 0.6, 1.0) : uniform(rng, 0.0, 0.4);
        }
        ds.targets(i) = high ? 0.8 : 0.2;
    }
    return series::encode_latency(ds, time_steps);
}

double accuracy(const SnnParams& p, const series::SpikeTrainBatch& b) {
    const auto preds = predict(p, b);
    std::size_t right = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) right += preds[i].binary_prediction == b.binary_targets[i] ? 1 : 0;
    return static_cast<double>(right) / static_cast<double>(preds.size());
}

}  // namespace

TEST_CASE("LIF step examples") {
    const LifConfig cfg;
    const auto rest = lif_step(0.0, 0.0, cfg);
    CHECK(rest.v_next == 0.0);
    CHECK_FALSE(rest.spike);

    const auto fire = lif_step(0.0, 0.6, cfg);
    CHECK(fire.spike);
    CHECK(fire.v_next == 0.0);

    // Constant input 0.2: v_k = 0.2 (1 - 0.9^k) / 0.1 after k steps.
    int expected = 0;
    for (int k = 1; k < 100; ++k) {
        if (0.2 * (1.0 - std::pow(0.9, k)) / 0.1 >= 0.5) {
            expected = k;
            break;
        }
    }
    double v = 0.0;
    int first = 0;
    for (int k = 1; k < 100 && first == 0; ++k) {
        const auto s = lif_step(v, 0.2, cfg);
        v = s.v_next;
        if (s.spike) first = k;
    }
    CHECK(expected == 3);
    CHECK(first == expected);
}

TEST_CASE("LIF decay is a contraction and reset is exact") {
    const LifConfig cfg;
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double v = uniform(rng, -3.0, 0.49);
        const auto s = lif_step(v, 0.0, cfg);
        if (!s.spike) CHECK(std::abs(s.v_next) <= cfg.beta * std::abs(v));
        const auto driven = lif_step(v, uniform(rng, -1.0, 2.0), cfg);
        if (driven.spike) CHECK(driven.v_next == 0.0);
    }
}

TEST_CASE("LIF config validation") {
    CHECK_THROWS_AS((LifConfig{0.5, 1.0, 2.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((LifConfig{0.0, 0.9, 2.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((LifConfig{0.5, 0.9, 0.0}.validate()), std::invalid_argument);
}

TEST_CASE("surrogate gradient shape") {
    const LifConfig cfg;
    CHECK(surrogate_grad(cfg.threshold, cfg) == cfg.alpha / 2.0);
    CHECK(surrogate_grad(1e6, cfg) < 1e-9);
    CHECK(surrogate_grad(-1e6, cfg) < 1e-9);
    CHECK(surrogate_grad(0.7, cfg) < surrogate_grad(0.6, cfg));
    CHECK(smoothed_spike(cfg.threshold, cfg) == 0.5);
}

TEST_CASE("surrogate gradient is the derivative of the smoothed spike") {
    Rng rng(5);
    for (const LifConfig cfg : {LifConfig{}, LifConfig{0.3, 0.8, 5.0}}) {
        for (int i = 0; i < 100; ++i) {
            const double v = uniform(rng, -2.0, 3.0);
            const double h = 1e-6;
            const double numeric = (smoothed_spike(v + h, cfg) - smoothed_spike(v - h, cfg)) / (2.0 * h);
            const double analytic = surrogate_grad(v, cfg);
            CHECK(std::abs(numeric - analytic) <= 1e-6 * std::max(1.0, std::abs(analytic)));
        }
    }
}

TEST_CASE("zero weights never spike") {
    const auto p = SnnParams::zeros(4, 3);
    std::vector<std::uint8_t> sample(3 * 5, 1);
    const auto out = forward_snn(p, sample, 5);
    CHECK(out.forecast.spike_count == 0);
    CHECK(out.forecast.binary_prediction == 0);
    CHECK(out.forecast.surrogate_rate == 0.0);
}

TEST_CASE("large weights spike on the first step") {
    auto p = SnnParams::zeros(4, 3);
    p.W1.setConstant(5.0);
    p.W2.setConstant(5.0);
    std::vector<std::uint8_t> sample(3 * 4, 1);
    const auto out = forward_snn(p, sample, 4);
    REQUIRE(out.cache.spike.size() == 4);
    CHECK(out.cache.spike[0](0) == 1.0);
    CHECK(out.forecast.binary_prediction == 1);
    for (const auto& s : out.cache.spike) CHECK((s(0) == 0.0 || s(0) == 1.0));
}

TEST_CASE("forward pass is deterministic and matches batch prediction") {
    const auto batch = separable_batch(20, 6, 3, 2);
    Rng rng(7);
    const auto p = SnnParams::init(8, 6, {}, rng);
    const auto preds = predict(p, batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto a = forward_snn(p, batch.sample(i), 3);
        const auto b = forward_snn(p, batch.sample(i), 3);
        CHECK(a.forecast.spike_count == b.forecast.spike_count);
        CHECK(a.forecast.spike_count == preds[i].spike_count);
        for (std::size_t t = 0; t < 3; ++t) CHECK(a.cache.spike[t](0) == b.cache.spike[t](0));
    }
}

TEST_CASE("forward rejects malformed samples") {
    const auto p = SnnParams::zeros(2, 3);
    CHECK_THROWS_AS(forward_snn(p, std::vector<std::uint8_t>(5, 0), 2), std::invalid_argument);
    CHECK_THROWS_AS(forward_snn(p, std::vector<std::uint8_t>(6, 2), 2), std::invalid_argument);
    const auto wrong_width = separable_batch(4, 5, 2, 1);
    CHECK_THROWS_AS(predict(p, wrong_width), std::invalid_argument);
}

TEST_CASE("smoothed-forward gradients match finite differences") {
    // Three time steps, small network; the hard threshold is replaced by the smoothed spike.
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto batch = separable_batch(6, 4, 3, seed + 10);
        Rng rng(seed);
        auto p = SnnParams::init(5, 4, {}, rng);
        p.W2 *= 3.0;
        std::vector<std::size_t> rows(batch.size());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        const Eigen::VectorXd analytic = loss_and_gradient(p, batch, rows, SpikeMode::Smooth).second.flatten();
        const auto numeric = testsupport::numeric_gradient(
            p, [&](const SnnParams& q) { return loss_and_gradient(q, batch, rows, SpikeMode::Smooth).first; }, 1e-6);
        const double rel = testsupport::relative_error(analytic, numeric);
        INFO("seed " << seed);
        CHECK(rel < 1e-3);
        CHECK(analytic.norm() > 0.0);
    }
}

TEST_CASE("all-zero targets teach silence") {
    auto batch = separable_batch(120, 8, 2, 3);
    std::fill(batch.binary_targets.begin(), batch.binary_targets.end(), 0);
    TrainConfig c;
    c.epochs = 100;
    c.window_len = 8;
    c.hidden_size = 16;
    c.learning_rate = 1e-2;
    const auto r = train_snn(batch, c);
    const auto preds = predict(r.params, batch);
    double mean_rate = 0.0;
    for (const auto& f : preds) mean_rate += f.surrogate_rate;
    mean_rate /= static_cast<double>(preds.size());
    CHECK(mean_rate <= 0.05);
}

TEST_CASE("separable toy batch is learned") {
    const auto batch = separable_batch(200, 8, 2, 4);
    TrainConfig c;
    c.epochs = 100;
    c.window_len = 8;
    c.hidden_size = 16;
    c.learning_rate = 1e-2;
    c.seed = 3;
    const auto r = train_snn(batch, c);
    CHECK(r.history.size() == 100);
    CHECK(accuracy(r.params, batch) >= 0.95);
}

TEST_CASE("training argument checks") {
    series::SpikeTrainBatch empty;
    empty.time_window = 4;
    empty.time_steps = 2;
    TrainConfig c;
    c.window_len = 4;
    CHECK_THROWS_AS(train_snn(empty, c), std::invalid_argument);
    const auto batch = separable_batch(50, 6, 2, 1);
    CHECK_THROWS_AS(train_snn(batch, c), std::invalid_argument);
    c.window_len = 6;
    CHECK_THROWS_AS(train_snn(batch, c, LifConfig{0.5, 1.5, 2.0}), std::invalid_argument);
}

TEST_CASE("SNN checkpoints round trip") {
    Rng rng(4);
    const auto p = SnnParams::init(3, 5, LifConfig{0.4, 0.8, 3.0}, rng);
    const auto back = params_from_checkpoint(nlohmann::json::parse(checkpoint_json(p).dump()));
    CHECK(back.flatten() == p.flatten());
    CHECK(back.lif.beta == 0.8);
    CHECK(back.lif.threshold == 0.4);
}

TEST_CASE("spike raster lists every cell") {
    const auto batch = separable_batch(2, 3, 2, 1);
    std::ostringstream out;
    write_spike_raster_csv(out, batch);
    const auto text = out.str();
    CHECK(text.rfind("sample,window_position,time_step,spike\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 2 * 3 * 2);
}

TEST_CASE("SNN training reports the epoch it returns") {
    const auto batch = separable_batch(80, 6, 2, 8);
    TrainConfig c;
    c.epochs = 6;
    c.window_len = 6;
    c.hidden_size = 8;
    const auto r = train_snn(batch, c);
    REQUIRE(r.best_epoch >= 1);
    for (const auto& e : r.history) CHECK(r.history[static_cast<std::size_t>(r.best_epoch - 1)].val_loss <= e.val_loss);
    c.restore_best = false;
    CHECK(train_snn(batch, c).best_epoch == 6);
}
