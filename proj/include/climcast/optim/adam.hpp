#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <Eigen/Dense>

namespace climcast::optim {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam over a flat parameter vector; moments mirror the parameter layout.
class AdamState {
public:
    AdamState() = default;
    AdamState(Eigen::Index n_params, AdamConfig cfg = {})
        : cfg_(cfg), m_(Eigen::VectorXd::Zero(n_params)), v_(Eigen::VectorXd::Zero(n_params)) {}

    void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grad) {
        if (params.size() != m_.size() || grad.size() != m_.size()) {
            throw std::invalid_argument("AdamState::step: size mismatch");
        }
        ++t_;
        m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
        v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        const double step_size = cfg_.lr / bc1;
        params.array() -= step_size * m_.array() / ((v_.array() / bc2).sqrt() + cfg_.eps);
    }

    [[nodiscard]] std::int64_t step_count() const { return t_; }
    [[nodiscard]] const AdamConfig& config() const { return cfg_; }
    [[nodiscard]] const Eigen::VectorXd& first_moment() const { return m_; }
    [[nodiscard]] const Eigen::VectorXd& second_moment() const { return v_; }

private:
    AdamConfig cfg_;
    Eigen::VectorXd m_;
    Eigen::VectorXd v_;
    std::int64_t t_ = 0;
};

}  // namespace climcast::optim
