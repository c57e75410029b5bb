#pragma once

#include <cstdint>
#include <vector>

#include "taser/tensor.hpp"

namespace taser {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam moments, one (m, v) pair per parameter.
class AdamState {
public:
    explicit AdamState(const std::vector<Tensor>& params);
    std::int64_t step_count() const { return step_; }

    friend void adam_step(std::vector<Tensor>& params, AdamState& state, const AdamConfig& cfg);

private:
    std::vector<std::vector<double>> m_, v_;
    std::vector<std::size_t> sizes_;
    std::int64_t step_ = 0;
};

/// One standard Adam update from the gradients currently held on `params`.
/// A parameter with no accumulated gradient is treated as grad = 0.
void adam_step(std::vector<Tensor>& params, AdamState& state, const AdamConfig& cfg);

}  // namespace taser
