#pragma once

// Differencing, min-max scaling, sliding windows, splits and latency spike encoding.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "climcast/error.hpp"
#include "climcast/ingest.hpp"
#include "climcast/random.hpp"

namespace climcast::series {

struct DifferencedSeries {
    std::vector<double> values;
    int order = 0;
    std::vector<double> anchors;  ///< first `order` values of the original series
};

/// Applies first differencing `d` times.
inline DifferencedSeries difference(std::span<const double> values, int d) {
    if (d < 0) throw std::invalid_argument("difference: negative order");
    if (values.size() <= static_cast<std::size_t>(d)) {
        throw InsufficientDataError("difference: series of length " + std::to_string(values.size()) +
                                    " is too short for order " + std::to_string(d));
    }
    DifferencedSeries out;
    out.order = d;
    out.anchors.assign(values.begin(), values.begin() + d);
    out.values.assign(values.begin(), values.end());
    for (int k = 0; k < d; ++k) {
        for (std::size_t i = out.values.size() - 1; i > 0; --i) out.values[i] -= out.values[i - 1];
        out.values.erase(out.values.begin());
    }
    return out;
}

inline DifferencedSeries difference(const TimeSeries& series, int d) { return difference(series.values(), d); }

/// Inverse of difference(): rebuilds the original values from the anchors.
inline std::vector<double> undifference(const DifferencedSeries& diff) {
    const auto d = static_cast<std::size_t>(diff.order);
    if (diff.anchors.size() != d) throw std::invalid_argument("undifference: anchor count does not match order");

    // heads[k] = first element of the k-th differenced level, derived from the anchors.
    std::vector<double> heads(d);
    std::vector<double> level = diff.anchors;
    for (std::size_t k = 0; k < d; ++k) {
        heads[k] = level.front();
        for (std::size_t i = level.size() - 1; i > 0; --i) level[i] -= level[i - 1];
        level.erase(level.begin());
    }

    std::vector<double> current = diff.values;
    for (std::size_t k = d; k-- > 0;) {
        std::vector<double> up(current.size() + 1);
        up[0] = heads[k];
        for (std::size_t i = 0; i < current.size(); ++i) up[i + 1] = up[i] + current[i];
        current = std::move(up);
    }
    return current;
}

/// Linear map [min, max] -> [0, 1].
struct ScalerParams {
    double min = 0.0;
    double max = 1.0;

    [[nodiscard]] double apply(double x) const { return (x - min) / (max - min); }
    [[nodiscard]] double invert(double s) const { return min + s * (max - min); }

    [[nodiscard]] std::vector<double> apply(std::span<const double> xs) const {
        std::vector<double> out(xs.size());
        std::transform(xs.begin(), xs.end(), out.begin(), [this](double x) { return apply(x); });
        return out;
    }
    [[nodiscard]] std::vector<double> invert(std::span<const double> xs) const {
        std::vector<double> out(xs.size());
        std::transform(xs.begin(), xs.end(), out.begin(), [this](double s) { return invert(s); });
        return out;
    }
};

inline ScalerParams fit_minmax(std::span<const double> values) {
    if (values.empty()) throw DegenerateScaleError("fit_minmax: empty input");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (!std::isfinite(*lo) || !std::isfinite(*hi)) throw DegenerateScaleError("fit_minmax: non-finite input");
    if (!(*hi > *lo)) throw DegenerateScaleError("fit_minmax: constant series has no scale");
    return {*lo, *hi};
}

/// Supervised pairs: inputs.row(i) = series[i, i+window_len), targets(i) = series[i+window_len].
struct WindowedDataset {
    Eigen::MatrixXd inputs;
    Eigen::VectorXd targets;
    std::size_t window_len = 0;

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(targets.size()); }

    /// Rows picked by index, in the order given.
    [[nodiscard]] WindowedDataset subset(std::span<const std::size_t> rows) const {
        WindowedDataset out;
        out.window_len = window_len;
        out.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
        out.targets.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto r = static_cast<Eigen::Index>(rows[i]);
            out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(r);
            out.targets(static_cast<Eigen::Index>(i)) = targets(r);
        }
        return out;
    }
};

inline WindowedDataset make_windows(std::span<const double> scaled, std::size_t window_len) {
    if (window_len < 1) throw std::invalid_argument("make_windows: window_len must be >= 1");
    if (scaled.size() <= window_len) {
        throw InsufficientDataError("make_windows: series of length " + std::to_string(scaled.size()) +
                                    " is too short for a window of " + std::to_string(window_len));
    }
    const auto n = static_cast<Eigen::Index>(scaled.size() - window_len);
    const auto w = static_cast<Eigen::Index>(window_len);
    WindowedDataset ds;
    ds.window_len = window_len;
    ds.inputs.resize(n, w);
    ds.targets.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < w; ++j) ds.inputs(i, j) = scaled[static_cast<std::size_t>(i + j)];
        ds.targets(i) = scaled[static_cast<std::size_t>(i + w)];
    }
    return ds;
}

enum class SplitMode { Chronological, Shuffled };

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

inline constexpr double kTrainFraction = 0.8;

/// Train gets floor(0.8 n) indices. Shuffled mode permutes with `seed` before cutting.
inline SplitIndices split_80_20(std::size_t n, SplitMode mode = SplitMode::Chronological, std::uint64_t seed = 0) {
    if (n < 5) throw std::invalid_argument("split_80_20: need at least 5 samples, got " + std::to_string(n));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (mode == SplitMode::Shuffled) {
        Rng rng(seed);
        shuffle(std::span<std::size_t>(idx), rng);
    }
    const auto n_train = static_cast<std::size_t>(std::floor(kTrainFraction * static_cast<double>(n)));
    return {{idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train)},
            {idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end()}};
}

/// Binary spike tensor, shape (samples x time_window x time_steps), row-major.
struct SpikeTrainBatch {
    std::vector<std::uint8_t> spikes;
    std::vector<std::uint8_t> binary_targets;
    std::size_t n_samples = 0;
    std::size_t time_window = 0;
    std::size_t time_steps = 0;

    [[nodiscard]] std::uint8_t at(std::size_t sample, std::size_t position, std::size_t step) const {
        return spikes[(sample * time_window + position) * time_steps + step];
    }
    [[nodiscard]] std::span<const std::uint8_t> sample(std::size_t s) const {
        return std::span(spikes).subspan(s * time_window * time_steps, time_window * time_steps);
    }
    [[nodiscard]] std::size_t size() const { return n_samples; }

    [[nodiscard]] SpikeTrainBatch subset(std::span<const std::size_t> rows) const {
        SpikeTrainBatch out;
        out.n_samples = rows.size();
        out.time_window = time_window;
        out.time_steps = time_steps;
        out.spikes.reserve(rows.size() * time_window * time_steps);
        for (auto r : rows) {
            const auto s = sample(r);
            out.spikes.insert(out.spikes.end(), s.begin(), s.end());
            out.binary_targets.push_back(binary_targets[r]);
        }
        return out;
    }
};

inline constexpr double kSpikeClassThreshold = 0.5;

/// Time-to-first-spike slot for a scaled value: larger values fire earlier.
inline std::size_t latency_slot(double v, std::size_t time_steps) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    return static_cast<std::size_t>(std::lround((1.0 - clamped) * static_cast<double>(time_steps - 1)));
}

/**
 * Latency-encodes every window value as a single spike over `time_steps` slots and labels
 * each sample 1 when its (scaled) target reaches 0.5. Values outside [0, 1] are clamped,
 * which happens for test windows scaled with training-set extrema.
 */
inline SpikeTrainBatch encode_latency(const WindowedDataset& windows, std::size_t time_steps) {
    if (time_steps < 2) throw std::invalid_argument("encode_latency: time_steps must be >= 2");
    SpikeTrainBatch batch;
    batch.n_samples = windows.size();
    batch.time_window = windows.window_len;
    batch.time_steps = time_steps;
    batch.spikes.assign(batch.n_samples * batch.time_window * time_steps, 0);
    batch.binary_targets.resize(batch.n_samples);
    for (std::size_t s = 0; s < batch.n_samples; ++s) {
        for (std::size_t p = 0; p < batch.time_window; ++p) {
            const double v = windows.inputs(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(p));
            if (std::isnan(v)) throw std::invalid_argument("encode_latency: NaN window value");
            batch.spikes[(s * batch.time_window + p) * time_steps + latency_slot(v, time_steps)] = 1;
        }
        batch.binary_targets[s] = windows.targets(static_cast<Eigen::Index>(s)) >= kSpikeClassThreshold ? 1 : 0;
    }
    return batch;
}

}  // namespace climcast::series
