#pragma once

#include <cmath>
#include <vector>

#include "nulog/autodiff.hpp"

namespace nulog {

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adaptive-moment optimiser state for one ParameterSet.
template <typename Scalar>
class Adam {
public:
    explicit Adam(const ParameterSet<Scalar>& params, AdamOptions options = {}) : options_(options) {
        for (const auto& p : params) {
            first_.push_back(Matrix<Scalar>::Zero(p.value.rows(), p.value.cols()));
            second_.push_back(Matrix<Scalar>::Zero(p.value.rows(), p.value.cols()));
        }
    }

    /// Applies one update from the accumulated gradients, then clears them.
    /// Throws UsageError when no backward pass has run since the last step.
    void step(ParameterSet<Scalar>& params) {
        if (params.size() != first_.size()) {
            throw UsageError("optimizer was built for a different parameter set");
        }
        if (!params.gradients_ready()) {
            throw UsageError("optimizer step without fresh gradients; run backward() first");
        }
        ++step_;
        const Scalar b1 = static_cast<Scalar>(options_.beta1);
        const Scalar b2 = static_cast<Scalar>(options_.beta2);
        const Scalar correction1 = Scalar(1) - static_cast<Scalar>(std::pow(options_.beta1, step_));
        const Scalar correction2 = Scalar(1) - static_cast<Scalar>(std::pow(options_.beta2, step_));
        const Scalar lr = static_cast<Scalar>(options_.learning_rate);
        const Scalar eps = static_cast<Scalar>(options_.epsilon);
        std::size_t i = 0;
        for (auto& p : params) {
            auto& m = first_[i];
            auto& v = second_[i];
            ++i;
            if (m.rows() != p.value.rows() || m.cols() != p.value.cols()) {
                throw ShapeError("optimizer state shape mismatch for '" + p.name + "'");
            }
            m = b1 * m + (Scalar(1) - b1) * p.grad;
            v = b2 * v + (Scalar(1) - b2) * p.grad.cwiseAbs2();
            p.value.array() -= lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + eps);
        }
        params.zero_grad();
    }

    long step_count() const noexcept { return step_; }
    const AdamOptions& options() const noexcept { return options_; }

private:
    AdamOptions options_;
    std::vector<Matrix<Scalar>> first_;
    std::vector<Matrix<Scalar>> second_;
    long step_ = 0;
};

}  // namespace nulog
