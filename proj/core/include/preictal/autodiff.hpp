#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "preictal/rng.hpp"
#include "preictal/tensor.hpp"

namespace preictal {

enum class Mode { train, eval };

namespace detail {
struct Node;
}

// Handle to a node on the autodiff tape. Ops build a DAG; backward() walks it
// in reverse topological order, accumulating gradients into requires-grad
// leaves exactly once per call.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    Tensor& value_mut();  // optimizer updates parameters in place
    const Tensor& grad() const;
    bool requires_grad() const;
    void zero_grad();
    bool defined() const { return node_ != nullptr; }

private:
    explicit Var(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
    std::shared_ptr<detail::Node> node_;

    friend Var make_leaf(Tensor v, bool requires_grad);
    friend Var make_op(Tensor value, std::vector<Var> parents,
                       std::function<void(detail::Node&)> backprop);
    friend void backward(const Var& loss);
    friend detail::Node* node_of(const Var& v);
};

Var constant(Tensor v);   // leaf, no gradient
Var parameter(Tensor v);  // leaf, gradient accumulated by backward

// ---- layer ops --------------------------------------------------------------

// cross-correlation (no kernel flip), stride 1, symmetric zero padding
// x: [N,Cin,H,W], w: [Cout,Cin,kh,kw], b: [Cout] -> [N,Cout,H',W']
Var conv2d(const Var& x, const Var& w, const Var& b, int pad_h, int pad_w);

struct BatchNormState {
    Tensor running_mean;  // [C]
    Tensor running_var;   // [C]
    explicit BatchNormState(int channels)
        : running_mean(Tensor::zeros({channels})), running_var(Tensor::full({channels}, 1.0)) {}
    BatchNormState() = default;
};

// train: batch statistics over (N,H,W) per channel, EMA update of `state`
// (unbiased variance in the running estimate); eval: running statistics.
Var batchnorm2d(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state,
                Mode mode, double momentum = 0.1, double eps = 1e-5);

Var relu(const Var& x);     // relu'(0) = 0
Var sigmoid(const Var& x);  // numerically split form, no overflow

// kernel (kh,kw), stride = kernel; gradient routes to the first-encountered max
Var maxpool2d(const Var& x, int kh = 2, int kw = 2);

// inverted dropout: train zeros with probability p and scales by 1/(1-p);
// eval is the identity
Var dropout(const Var& x, double p, Mode mode, Rng& rng);

Var linear(const Var& x, const Var& w, const Var& b);  // x: [N,F], w: [F,O], b: [O]
Var flatten(const Var& x);                             // [N,...] -> [N,F]
Var global_avg_pool2d(const Var& x);                   // [N,C,H,W] -> [N,C]
Var channelwise_mul(const Var& x, const Var& s);       // s: [N,C] broadcast over [N,C,H,W]
Var crop2d(const Var& x, int out_h, int out_w);        // keep leading rows/cols

// elementwise / reduction helpers
Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double k);
Var sum(const Var& a);  // -> scalar

// mean of -[w_pos*y*log p + (1-w_pos)*(1-y)*log(1-p)], p clamped to
// [1e-7, 1-1e-7] (no gradient through the clamp outside the interval)
Var weighted_bce(const Var& p, const Tensor& y, double w_pos);

// reverse accumulation from a scalar loss; calling it twice on the same loss
// is an error
void backward(const Var& loss);

// ---- finite-difference check --------------------------------------------------

struct GradCheckOptions {
    double step = 1e-5;
    int max_coords_per_leaf = -1;  // -1: every coordinate
    std::uint64_t seed = 0;        // coordinate sampling
};

// Central differences (f(x+h)-f(x-h))/2h against backward() gradients.
// `build_loss` must be a deterministic function of the leaf values. Returns
// max over checked coordinates of |analytic - fd| / max(1, |analytic|, |fd|).
double grad_check(const std::function<Var()>& build_loss, const std::vector<Var>& leaves,
                  const GradCheckOptions& opt = {});

}  // namespace preictal
