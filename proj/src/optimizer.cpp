#include "accdoa/optimizer.hpp"

#include "accdoa/error.hpp"

#include <cmath>

namespace accdoa {

Adam::Adam(AdamConfig cfg, Eigen::Index size)
    : cfg_(cfg), m_(VectorX<float>::Zero(size)), v_(VectorX<float>::Zero(size)) {}

void Adam::step(Parameters<float>& params, const VectorX<float>& grad, double lr,
                const Eigen::Array<bool, Eigen::Dynamic, 1>* frozen) {
    if (grad.size() != m_.size() || params.size() != m_.size())
        throw DimensionError("optimizer state does not match parameter size");
    ++t_;
    if (lr == 0.0) return;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const auto b1 = static_cast<float>(cfg_.beta1);
    const auto b2 = static_cast<float>(cfg_.beta2);
    VectorX<float>& p = params.mutable_values();
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (frozen && (*frozen)[i]) continue;
        const float gi = grad[i];
        m_[i] = b1 * m_[i] + (1.0f - b1) * gi;
        v_[i] = b2 * v_[i] + (1.0f - b2) * gi * gi;
        const double mhat = m_[i] / c1;
        const double vhat = v_[i] / c2;
        const double update = mhat / (std::sqrt(vhat) + cfg_.epsilon) + cfg_.weight_decay * p[i];
        p[i] = static_cast<float>(p[i] - lr * update);
    }
}

double step_decay_lr(double base_lr, double decay, long interval, long iteration) {
    if (interval <= 0) return base_lr;
    return base_lr * std::pow(decay, static_cast<double>(iteration / interval));
}

} // namespace accdoa
