// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "ranet/nn/graph.hpp"

namespace ranet::nn {

/// RMSProp: s = rho * s + (1 - rho) * g^2;  p -= lr * g / (sqrt(s) + eps).
template <typename T>
class RmsProp {
public:
    double rho = 0.99;
    double eps = 1e-8;

    explicit RmsProp(std::span<Parameter<T>* const> params) : params_(params.begin(), params.end())
    {
        for (auto* p : params_) {
            square_avg_.emplace_back(p->value.shape());
        }
    }

    void zero_grad()
    {
        for (auto* p : params_) {
            p->grad.fill(T(0));
        }
    }

    void step(double lr)
    {
        if (!(lr > 0.0)) {
            throw std::invalid_argument("optimizer step: learning rate must be positive");
        }
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto& p = *params_[k];
            auto& s = square_avg_[k];
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                const double g = p.grad[i];
                const double si = rho * s[i] + (1.0 - rho) * g * g;
                s[i] = static_cast<T>(si);
                p.value[i] -= static_cast<T>(lr * g / (std::sqrt(si) + eps));
            }
        }
    }

    std::vector<Tensor<T>>& state() { return square_avg_; }
    const std::vector<Tensor<T>>& state() const { return square_avg_; }

private:
    std::vector<Parameter<T>*> params_;
    std::vector<Tensor<T>> square_avg_;
};

} // namespace ranet::nn
