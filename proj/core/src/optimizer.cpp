#include "pf/optimizer.hpp"

#include <cmath>

namespace pf {

Optimizer::Optimizer(OptimizerSettings settings,
                     std::vector<std::pair<std::string, Tensor>> params)
    : settings_(settings) {
    slots_.reserve(params.size());
    for (auto& [name, t] : params) {
        Slot slot;
        slot.param = t;
        if (settings_.kind == OptimizerSettings::Kind::adamw) {
            slot.m.assign(static_cast<std::size_t>(t.numel()), 0.0);
            slot.v.assign(static_cast<std::size_t>(t.numel()), 0.0);
        }
        slots_.push_back(std::move(slot));
    }
}

void Optimizer::step(double lr) {
    ++t_;
    for (auto& slot : slots_) {
        if (!slot.param.has_grad()) continue;
        auto p = slot.param.mutable_data();
        auto g = slot.param.grad();
        if (settings_.kind == OptimizerSettings::Kind::sgd) {
            for (std::size_t i = 0; i < p.size(); ++i) {
                p[i] -= lr * (g[i] + settings_.weight_decay * p[i]);
            }
            continue;
        }
        const double bc1 = 1.0 - std::pow(settings_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(settings_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < p.size(); ++i) {
            slot.m[i] = settings_.beta1 * slot.m[i] + (1.0 - settings_.beta1) * g[i];
            slot.v[i] = settings_.beta2 * slot.v[i] + (1.0 - settings_.beta2) * g[i] * g[i];
            const double m_hat = slot.m[i] / bc1;
            const double v_hat = slot.v[i] / bc2;
            p[i] -= lr * (m_hat / (std::sqrt(v_hat) + settings_.eps) +
                          settings_.weight_decay * p[i]);
        }
    }
}

void Optimizer::zero_grad() {
    for (auto& slot : slots_) slot.param.clear_grad();
}

}  // namespace pf
