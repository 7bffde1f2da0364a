#pragma once

#include "accdoa/model.hpp"

namespace accdoa {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 1e-6; // decoupled
};

/// Adam with decoupled weight decay:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   p <- p - lr (m_hat / (sqrt(v_hat) + eps) + wd p)
class Adam {
public:
    Adam(AdamConfig cfg, Eigen::Index size);

    /// One update at learning rate `lr`. Entries where `frozen` is true (if
    /// given) are left untouched along with their moments.
    void step(Parameters<float>& params, const VectorX<float>& grad, double lr,
              const Eigen::Array<bool, Eigen::Dynamic, 1>* frozen = nullptr);

    long steps() const { return t_; }

private:
    AdamConfig cfg_;
    VectorX<float> m_;
    VectorX<float> v_;
    long t_ = 0;
};

/// lr * decay^(floor(iteration / interval)).
double step_decay_lr(double base_lr, double decay, long interval, long iteration);

} // namespace accdoa
