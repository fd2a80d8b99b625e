#pragma once

// Pieces shared by the LSTM and SNN trainers.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace climcast {

struct TrainConfig {
    int epochs = 50;
    std::size_t window_len = 12;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    double validation_fraction = 0.1;  ///< carved from the end of the (chronological) training set
    int hidden_size = 64;
    double learning_rate = 1e-3;
    /// Return the parameters of the epoch with the lowest validation loss instead of the last epoch.
    bool restore_best = true;

    void validate() const {
        if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
        if (window_len < 1) throw std::invalid_argument("TrainConfig: window_len must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (hidden_size < 1) throw std::invalid_argument("TrainConfig: hidden_size must be >= 1");
        if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
            throw std::invalid_argument("TrainConfig: validation_fraction must be in [0, 1)");
        }
        if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    }
};

struct EpochLoss {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = NAN;  ///< NaN when no validation samples
};

/// "epoch,train_loss,val_loss" with one row per epoch (1-based).
inline void write_loss_csv(std::ostream& out, const std::vector<EpochLoss>& history) {
    out << "epoch,train_loss,val_loss\n";
    char buf[96];
    for (const auto& e : history) {
        if (std::isnan(e.val_loss)) {
            std::snprintf(buf, sizeof buf, "%d,%.10g,\n", e.epoch, e.train_loss);
        } else {
            std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g\n", e.epoch, e.train_loss, e.val_loss);
        }
        out << buf;
    }
}

/// Sizes of the training and validation slices for `n` samples.
struct TrainValSplit {
    std::size_t n_train = 0;
    std::size_t n_val = 0;
};

inline TrainValSplit carve_validation(std::size_t n, const TrainConfig& cfg) {
    if (n == 0) throw std::invalid_argument("training set is empty");
    const auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(n)));
    const std::size_t n_train = n - n_val;
    if (cfg.batch_size > n_train) {
        throw std::invalid_argument("batch_size " + std::to_string(cfg.batch_size) + " exceeds " +
                                    std::to_string(n_train) + " training samples");
    }
    return {n_train, n_val};
}

namespace detail {

inline nlohmann::json matrix_to_json(const double* data, Eigen::Index rows, Eigen::Index cols) {
    // Row-major on disk; Eigen storage is column-major.
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(rows * cols));
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) flat.push_back(data[c * rows + r]);
    }
    return {{"shape", {rows, cols}}, {"data", flat}};
}

inline void matrix_from_json(const nlohmann::json& j, double* data, Eigen::Index rows, Eigen::Index cols,
                             const std::string& name) {
    const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
    if (shape.size() != 2 || shape[0] != rows || shape[1] != cols) {
        throw std::invalid_argument("checkpoint: shape mismatch for '" + name + "'");
    }
    const auto flat = j.at("data").get<std::vector<double>>();
    if (flat.size() != static_cast<std::size_t>(rows * cols)) {
        throw std::invalid_argument("checkpoint: data length mismatch for '" + name + "'");
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) data[c * rows + r] = flat[static_cast<std::size_t>(r * cols + c)];
    }
}

}  // namespace detail
}  // namespace climcast
