#include "preictal/optim.hpp"

#include <algorithm>
#include <cmath>

namespace preictal {

Adam::Adam(std::vector<Var> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Var& p : params_) {
        m_.push_back(Tensor::zeros(p.value().shape()));
        v_.push_back(Tensor::zeros(p.value().shape()));
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& theta = params_[i].value_mut();
        const Tensor& grad = params_[i].grad();
        if (grad.size() != theta.size()) continue;  // no gradient this step
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (std::size_t j = 0; j < theta.size(); ++j) {
            const double g = grad[j] + cfg_.weight_decay * theta[j];
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            theta[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (Var& p : params_) p.zero_grad();
}

double PlateauScheduler::step(double val_loss) {
    if (val_loss < best_ - cfg_.improve_threshold) {
        best_ = val_loss;
        bad_epochs_ = 0;
    } else {
        ++bad_epochs_;
        if (bad_epochs_ > cfg_.patience) {
            lr_ = std::max(lr_ * cfg_.factor, cfg_.min_lr);
            ++reductions_;
            bad_epochs_ = 0;
        }
    }
    return lr_;
}

}  // namespace preictal
