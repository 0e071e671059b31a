#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "guji/tensor.hpp"

namespace guji {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction over a fixed parameter list. Moment buffers are
// zero-initialized; the step counter increments by exactly one per step().
class AdamOptimizer {
  public:
    explicit AdamOptimizer(std::vector<std::pair<std::string, nn::Tensor>> params,
                           AdamConfig config = {});

    // theta <- theta - lr * m_hat / (sqrt(v_hat) + eps). A non-finite
    // gradient raises NumericError naming the parameter.
    void step(double lr);
    void zero_grad();

    // Scales all gradients so their global L2 norm is at most max_norm;
    // returns the pre-clip norm.
    double clip_global_norm(double max_norm);

    int64_t step_count() const { return t_; }

  private:
    std::vector<std::pair<std::string, nn::Tensor>> params_;
    std::vector<std::vector<float>> m_, v_;
    AdamConfig config_;
    int64_t t_ = 0;
};

} // namespace guji
