#pragma once

#include <vector>

#include "preictal/autodiff.hpp"

namespace preictal {

struct AdamConfig {
    double lr = 4e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // coupled L2, added to the gradient
};

class Adam {
public:
    Adam(std::vector<Var> params, AdamConfig cfg);

    void step();  // reads grads, updates parameter values in place
    void zero_grad();

    double lr() const { return cfg_.lr; }
    void set_lr(double lr) { cfg_.lr = lr; }
    std::uint64_t steps_taken() const { return t_; }

private:
    std::vector<Var> params_;
    AdamConfig cfg_;
    std::vector<Tensor> m_, v_;
    std::uint64_t t_ = 0;
};

struct PlateauConfig {
    int patience = 25;
    double factor = 0.98;
    double min_lr = 1e-7;
    double improve_threshold = 1e-8;  // absolute
};

// Reduce-on-plateau: after `patience` consecutive epochs without improvement
// the next bad epoch multiplies lr by `factor` (floored at min_lr) and resets
// the counter. lr never increases.
class PlateauScheduler {
public:
    PlateauScheduler(PlateauConfig cfg, double initial_lr) : cfg_(cfg), lr_(initial_lr) {}

    double step(double val_loss);  // call once per epoch; returns current lr
    double lr() const { return lr_; }
    int reductions() const { return reductions_; }

private:
    PlateauConfig cfg_;
    double lr_;
    double best_ = 1e300;
    int bad_epochs_ = 0;
    int reductions_ = 0;
};

}  // namespace preictal
