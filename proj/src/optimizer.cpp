#include "guji/optimizer.hpp"

#include <cmath>

#include "guji/kernels.hpp"

namespace guji {

AdamOptimizer::AdamOptimizer(std::vector<std::pair<std::string, nn::Tensor>> params,
                             AdamConfig config)
    : params_(std::move(params)), config_(config) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& [name, t] : params_) {
        m_.emplace_back(static_cast<size_t>(t.numel()), 0.0f);
        v_.emplace_back(static_cast<size_t>(t.numel()), 0.0f);
    }
}

void AdamOptimizer::step(double lr) {
    ++t_;
    for (size_t i = 0; i < params_.size(); ++i) {
        auto& [name, t] = params_[i];
        auto grad = t.grad(); // zeros if the loss never touched this parameter
        for (float g : grad) {
            if (!std::isfinite(g))
                throw NumericError("non-finite gradient in parameter " + name);
        }
        kernels::adam_update(t.values().data(), grad.data(), m_[i].data(), v_[i].data(),
                             t.numel(), t_, lr, config_.beta1, config_.beta2, config_.eps);
    }
}

void AdamOptimizer::zero_grad() {
    for (auto& [name, t] : params_) t.zero_grad();
}

double AdamOptimizer::clip_global_norm(double max_norm) {
    double sq = 0.0;
    for (auto& [name, t] : params_) {
        for (float g : t.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        float s = static_cast<float>(max_norm / norm);
        for (auto& [name, t] : params_) {
            for (float& g : t.grad()) g *= s;
        }
    }
    return norm;
}

} // namespace guji
