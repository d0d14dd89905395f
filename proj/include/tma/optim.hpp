#pragma once

#include "tma/errors.hpp"
#include "tma/tensor.hpp"

#include <cmath>
#include <vector>

namespace tma {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam over a fixed list of parameter views. The views must outlive the
/// optimizer; gradients are passed as a list with identical layout.
class Adam {
public:
    Adam(TensorList params, AdamConfig config) : params_(std::move(params)), config_(config) {
        first_.reserve(params_.size());
        second_.reserve(params_.size());
        for (const auto& p : params_) {
            first_.emplace_back(p.values.size(), 0.0);
            second_.emplace_back(p.values.size(), 0.0);
        }
    }

    void step(const TensorList& grads) {
        if (grads.size() != params_.size()) throw ShapeError("Adam: gradient list does not match parameters");
        ++steps_;
        const double correction1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
        const double correction2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
        for (std::size_t t = 0; t < params_.size(); ++t) {
            auto param = params_[t].values;
            auto grad = grads[t].values;
            if (grad.size() != param.size()) throw ShapeError("Adam: size mismatch for " + params_[t].name);
            auto& m = first_[t];
            auto& v = second_[t];
            for (std::size_t i = 0; i < param.size(); ++i) {
                const double g = grad[i];
                m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
                v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
                const double m_hat = m[i] / correction1;
                const double v_hat = v[i] / correction2;
                param[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
            }
        }
    }

    long steps() const noexcept { return steps_; }

private:
    TensorList params_;
    AdamConfig config_;
    std::vector<std::vector<double>> first_;
    std::vector<std::vector<double>> second_;
    long steps_ = 0;
};

}  // namespace tma
