#include "taser/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace taser {

AdamState::AdamState(const std::vector<Tensor>& params) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Tensor& p : params) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
        sizes_.push_back(p.size());
    }
}

void adam_step(std::vector<Tensor>& params, AdamState& state, const AdamConfig& cfg) {
    if (params.size() != state.sizes_.size())
        throw std::invalid_argument("adam_step: parameter count changed");
    state.step_ += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step_));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].size() != state.sizes_[i])
            throw std::invalid_argument("adam_step: parameter shape changed at index " +
                                        std::to_string(i));
        std::span<double> w = params[i].mutable_data();
        std::span<const double> g = params[i].grad();
        std::vector<double>& m = state.m_[i];
        std::vector<double>& v = state.v_[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
            double gk = g.empty() ? 0.0 : g[k];
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
            double mhat = m[k] / bc1;
            double vhat = v[k] / bc2;
            w[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

}  // namespace taser
