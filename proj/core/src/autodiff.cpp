#include "preictal/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "preictal/parallel.hpp"

namespace preictal {

namespace detail {

struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_allocated = false;
    bool backward_ran = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;

    Tensor& ensure_grad() {
        if (!grad_allocated) {
            grad = Tensor::zeros(value.shape());
            grad_allocated = true;
        }
        return grad;
    }
};

}  // namespace detail

using detail::Node;

Var make_leaf(Tensor v, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->requires_grad = requires_grad;
    return Var(std::move(n));
}

Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    bool needs = false;
    for (const Var& p : parents) needs = needs || p.requires_grad();
    n->requires_grad = needs;
    if (needs) {
        n->parents.reserve(parents.size());
        for (Var& p : parents) n->parents.push_back(p.node_);
        n->backprop = std::move(backprop);
    }
    return Var(std::move(n));
}

detail::Node* node_of(const Var& v) { return v.node_.get(); }

const Tensor& Var::value() const { return node_->value; }
Tensor& Var::value_mut() { return node_->value; }
const Tensor& Var::grad() const { return node_->grad; }
bool Var::requires_grad() const { return node_ && node_->requires_grad; }
void Var::zero_grad() {
    if (node_ && node_->grad_allocated) node_->grad.fill(0.0);
}

Var constant(Tensor v) { return make_leaf(std::move(v), false); }
Var parameter(Tensor v) { return make_leaf(std::move(v), true); }

// ---- small GEMM kernels -------------------------------------------------------
//
// Row-major. Each output row is produced by exactly one worker with a fixed
// inner loop order, so results do not depend on the worker count.

namespace {

// C[M x N] (+)= A[M x K] * B[K x N]
void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n, bool accumulate) {
    parallel_for(m, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            double* crow = c + i * n;
            if (!accumulate)
                for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
            const double* arow = a + i * k;
            for (std::size_t p = 0; p < k; ++p) {
                const double av = arow[p];
                if (av == 0.0) continue;
                const double* brow = b + p * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    });
}

// C[M x N] (+)= A[M x X] * B[N x X]^T
void gemm_abt(const double* a, const double* b, double* c, std::size_t m, std::size_t x,
              std::size_t n, bool accumulate) {
    parallel_for(m, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const double* arow = a + i * x;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                const double* brow = b + j * x;
                double acc = 0.0;
                for (std::size_t p = 0; p < x; ++p) acc += arow[p] * brow[p];
                crow[j] = accumulate ? crow[j] + acc : acc;
            }
        }
    });
}

// C[K x N] = A[M x K]^T * B[M x N]
void gemm_atb(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
              std::size_t n) {
    parallel_for(k, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
            for (std::size_t p = 0; p < m; ++p) {
                const double av = a[p * k + i];
                if (av == 0.0) continue;
                const double* brow = b + p * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    });
}

struct ConvDims {
    int n, cin, h, w, cout, kh, kw, ph, pw, oh, ow;
    std::size_t patch() const { return static_cast<std::size_t>(cin) * kh * kw; }
    std::size_t cols() const { return static_cast<std::size_t>(n) * oh * ow; }
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int ph, int pw) {
    if (x.ndim() != 4) throw ShapeError("conv2d: input must be [N,C,H,W], got " + shape_string(x.shape()));
    if (w.ndim() != 4) throw ShapeError("conv2d: weight must be [Cout,Cin,kh,kw], got " + shape_string(w.shape()));
    if (x.dim(1) != w.dim(1))
        throw ShapeError("conv2d: input channels " + std::to_string(x.dim(1)) +
                         " != weight channels " + std::to_string(w.dim(1)));
    ConvDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), w.dim(3), ph, pw, 0, 0};
    d.oh = d.h + 2 * ph - d.kh + 1;
    d.ow = d.w + 2 * pw - d.kw + 1;
    if (d.oh <= 0 || d.ow <= 0) throw ShapeError("conv2d: kernel larger than padded input");
    return d;
}

// col[(ci*kh+u)*kw+v][((n*oh)+i)*ow+j] = x[n,ci,i+u-ph,j+v-pw], zero outside
void im2col(const Tensor& x, const ConvDims& d, std::vector<double>& col) {
    const std::size_t cols = d.cols();
    col.assign(d.patch() * cols, 0.0);
    parallel_for(static_cast<std::size_t>(d.n), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t n = lo; n < hi; ++n) {
            for (int ci = 0; ci < d.cin; ++ci) {
                const double* plane = x.data() + (n * d.cin + ci) * static_cast<std::size_t>(d.h) * d.w;
                for (int u = 0; u < d.kh; ++u) {
                    for (int v = 0; v < d.kw; ++v) {
                        const std::size_t row = (static_cast<std::size_t>(ci) * d.kh + u) * d.kw + v;
                        double* dst = col.data() + row * cols + n * static_cast<std::size_t>(d.oh) * d.ow;
                        for (int i = 0; i < d.oh; ++i) {
                            const int src_i = i + u - d.ph;
                            if (src_i < 0 || src_i >= d.h) continue;
                            for (int j = 0; j < d.ow; ++j) {
                                const int src_j = j + v - d.pw;
                                if (src_j < 0 || src_j >= d.w) continue;
                                dst[static_cast<std::size_t>(i) * d.ow + j] =
                                    plane[static_cast<std::size_t>(src_i) * d.w + src_j];
                            }
                        }
                    }
                }
            }
        }
    });
}

void col2im_accumulate(const std::vector<double>& col, const ConvDims& d, Tensor& dx) {
    const std::size_t cols = d.cols();
    parallel_for(static_cast<std::size_t>(d.n), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t n = lo; n < hi; ++n) {
            for (int ci = 0; ci < d.cin; ++ci) {
                double* plane = dx.data() + (n * d.cin + ci) * static_cast<std::size_t>(d.h) * d.w;
                for (int u = 0; u < d.kh; ++u) {
                    for (int v = 0; v < d.kw; ++v) {
                        const std::size_t row = (static_cast<std::size_t>(ci) * d.kh + u) * d.kw + v;
                        const double* src = col.data() + row * cols + n * static_cast<std::size_t>(d.oh) * d.ow;
                        for (int i = 0; i < d.oh; ++i) {
                            const int dst_i = i + u - d.ph;
                            if (dst_i < 0 || dst_i >= d.h) continue;
                            for (int j = 0; j < d.ow; ++j) {
                                const int dst_j = j + v - d.pw;
                                if (dst_j < 0 || dst_j >= d.w) continue;
                                plane[static_cast<std::size_t>(dst_i) * d.w + dst_j] +=
                                    src[static_cast<std::size_t>(i) * d.ow + j];
                            }
                        }
                    }
                }
            }
        }
    });
}

// [N,Cout,OH,OW] <-> [Cout x (N*OH*OW)]
void permute_from_mat(const std::vector<double>& mat, const ConvDims& d, Tensor& out) {
    const std::size_t cols = d.cols();
    const std::size_t plane = static_cast<std::size_t>(d.oh) * d.ow;
    parallel_for(static_cast<std::size_t>(d.n), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t n = lo; n < hi; ++n)
            for (int co = 0; co < d.cout; ++co) {
                const double* src = mat.data() + static_cast<std::size_t>(co) * cols + n * plane;
                double* dst = out.data() + (n * d.cout + co) * plane;
                std::copy(src, src + plane, dst);
            }
    });
}

void permute_to_mat(const Tensor& t, const ConvDims& d, std::vector<double>& mat) {
    const std::size_t cols = d.cols();
    const std::size_t plane = static_cast<std::size_t>(d.oh) * d.ow;
    mat.resize(static_cast<std::size_t>(d.cout) * cols);
    parallel_for(static_cast<std::size_t>(d.n), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t n = lo; n < hi; ++n)
            for (int co = 0; co < d.cout; ++co) {
                const double* src = t.data() + (n * d.cout + co) * plane;
                double* dst = mat.data() + static_cast<std::size_t>(co) * cols + n * plane;
                std::copy(src, src + plane, dst);
            }
    });
}

}  // namespace

// ---- conv2d -------------------------------------------------------------------

Var conv2d(const Var& x, const Var& w, const Var& b, int pad_h, int pad_w) {
    const ConvDims d = conv_dims(x.value(), w.value(), pad_h, pad_w);
    if (b.value().ndim() != 1 || b.value().dim(0) != d.cout)
        throw ShapeError("conv2d: bias must be [Cout]");

    std::vector<double> col;
    im2col(x.value(), d, col);
    std::vector<double> out_mat(static_cast<std::size_t>(d.cout) * d.cols());
    gemm(w.value().data(), col.data(), out_mat.data(), d.cout, d.patch(), d.cols(), false);
    const double* bias = b.value().data();
    parallel_for(static_cast<std::size_t>(d.cout), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t co = lo; co < hi; ++co) {
            double* row = out_mat.data() + co * d.cols();
            for (std::size_t j = 0; j < d.cols(); ++j) row[j] += bias[co];
        }
    });
    Tensor out({d.n, d.cout, d.oh, d.ow});
    permute_from_mat(out_mat, d, out);

    return make_op(std::move(out), {x, w, b}, [d](Node& self) {
        Node& xn = *self.parents[0];
        Node& wn = *self.parents[1];
        Node& bn = *self.parents[2];

        std::vector<double> dout_mat;
        permute_to_mat(self.grad, d, dout_mat);

        if (bn.requires_grad) {
            Tensor& db = bn.ensure_grad();
            for (int co = 0; co < d.cout; ++co) {
                const double* row = dout_mat.data() + static_cast<std::size_t>(co) * d.cols();
                double acc = 0.0;
                for (std::size_t j = 0; j < d.cols(); ++j) acc += row[j];
                db[static_cast<std::size_t>(co)] += acc;
            }
        }
        if (wn.requires_grad) {
            std::vector<double> col;
            im2col(xn.value, d, col);
            Tensor& dw = wn.ensure_grad();
            gemm_abt(dout_mat.data(), col.data(), dw.data(), d.cout, d.cols(), d.patch(), true);
        }
        if (xn.requires_grad) {
            std::vector<double> dcol(d.patch() * d.cols());
            gemm_atb(wn.value.data(), dout_mat.data(), dcol.data(), d.cout, d.patch(), d.cols());
            col2im_accumulate(dcol, d, xn.ensure_grad());
        }
    });
}

// ---- batchnorm ------------------------------------------------------------------

Var batchnorm2d(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state,
                Mode mode, double momentum, double eps) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 4) throw ShapeError("batchnorm2d: input must be [N,C,H,W]");
    const int n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
    if (gamma.value().size() != static_cast<std::size_t>(c) ||
        beta.value().size() != static_cast<std::size_t>(c))
        throw ShapeError("batchnorm2d: gamma/beta must be [C]");
    if (state.running_mean.size() != static_cast<std::size_t>(c))
        throw ShapeError("batchnorm2d: running stats must be [C]");
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t m = static_cast<std::size_t>(n) * plane;
    if (mode == Mode::train && n < 2)
        throw BatchError("batchnorm2d: train mode needs batch size >= 2");

    Tensor mean({c}), invstd({c});
    if (mode == Mode::train) {
        parallel_for(static_cast<std::size_t>(c), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t ch = lo; ch < hi; ++ch) {
                double s = 0.0;
                for (int i = 0; i < n; ++i) {
                    const double* p = xv.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
                    for (std::size_t j = 0; j < plane; ++j) s += p[j];
                }
                const double mu = s / static_cast<double>(m);
                double sq = 0.0;
                for (int i = 0; i < n; ++i) {
                    const double* p = xv.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
                    for (std::size_t j = 0; j < plane; ++j) {
                        const double dlt = p[j] - mu;
                        sq += dlt * dlt;
                    }
                }
                const double var = sq / static_cast<double>(m);
                mean[ch] = mu;
                invstd[ch] = 1.0 / std::sqrt(var + eps);
                state.running_mean[ch] = (1.0 - momentum) * state.running_mean[ch] + momentum * mu;
                state.running_var[ch] = (1.0 - momentum) * state.running_var[ch] +
                                        momentum * var * static_cast<double>(m) / (static_cast<double>(m) - 1.0);
            }
        });
    } else {
        for (int ch = 0; ch < c; ++ch) {
            mean[ch] = state.running_mean[ch];
            invstd[ch] = 1.0 / std::sqrt(state.running_var[ch] + eps);
        }
    }

    Tensor out(xv.shape());
    const double* gm = gamma.value().data();
    const double* bt = beta.value().data();
    parallel_for(static_cast<std::size_t>(c), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t ch = lo; ch < hi; ++ch) {
            for (int i = 0; i < n; ++i) {
                const double* src = xv.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
                double* dst = out.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
                for (std::size_t j = 0; j < plane; ++j)
                    dst[j] = gm[ch] * (src[j] - mean[ch]) * invstd[ch] + bt[ch];
            }
        }
    });

    const bool train = (mode == Mode::train);
    return make_op(std::move(out), {x, gamma, beta},
                   [mean, invstd, n, c, plane, m, train](Node& self) {
        Node& xn = *self.parents[0];
        Node& gn = *self.parents[1];
        Node& bn = *self.parents[2];
        const Tensor& xv = xn.value;
        const Tensor& dout = self.grad;
        const double* gm = gn.value.data();

        Tensor dgamma({c}), dbeta({c});
        parallel_for(static_cast<std::size_t>(c), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t ch = lo; ch < hi; ++ch) {
                double sg = 0.0, sb = 0.0;
                for (int i = 0; i < n; ++i) {
                    const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * plane;
                    for (std::size_t j = 0; j < plane; ++j) {
                        const double xhat = (xv[base + j] - mean[ch]) * invstd[ch];
                        sg += dout[base + j] * xhat;
                        sb += dout[base + j];
                    }
                }
                dgamma[ch] = sg;
                dbeta[ch] = sb;
            }
        });
        if (gn.requires_grad) {
            Tensor& g = gn.ensure_grad();
            for (int ch = 0; ch < c; ++ch) g[ch] += dgamma[ch];
        }
        if (bn.requires_grad) {
            Tensor& g = bn.ensure_grad();
            for (int ch = 0; ch < c; ++ch) g[ch] += dbeta[ch];
        }
        if (xn.requires_grad) {
            Tensor& dx = xn.ensure_grad();
            const double inv_m = 1.0 / static_cast<double>(m);
            parallel_for(static_cast<std::size_t>(c), [&](std::size_t lo, std::size_t hi) {
                for (std::size_t ch = lo; ch < hi; ++ch) {
                    const double k = gm[ch] * invstd[ch];
                    for (int i = 0; i < n; ++i) {
                        const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * plane;
                        for (std::size_t j = 0; j < plane; ++j) {
                            if (train) {
                                const double xhat = (xv[base + j] - mean[ch]) * invstd[ch];
                                dx[base + j] += k * (dout[base + j] - dbeta[ch] * inv_m -
                                                     xhat * dgamma[ch] * inv_m);
                            } else {
                                dx[base + j] += k * dout[base + j];
                            }
                        }
                    }
                }
            });
        }
    });
}

// ---- elementwise ----------------------------------------------------------------

Var relu(const Var& x) {
    Tensor out = x.value();
    for (double& v : out.vec()) v = v > 0.0 ? v : 0.0;
    return make_op(std::move(out), {x}, [](Node& self) {
        Node& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        Tensor& dx = xn.ensure_grad();
        for (std::size_t i = 0; i < dx.size(); ++i)
            if (xn.value[i] > 0.0) dx[i] += self.grad[i];
    });
}

Var sigmoid(const Var& x) {
    Tensor out = x.value();
    for (double& v : out.vec()) {
        if (v >= 0.0) {
            v = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            v = e / (1.0 + e);
        }
    }
    Tensor saved = out;
    return make_op(std::move(out), {x}, [saved](Node& self) {
        Node& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        Tensor& dx = xn.ensure_grad();
        for (std::size_t i = 0; i < dx.size(); ++i)
            dx[i] += self.grad[i] * saved[i] * (1.0 - saved[i]);
    });
}

Var maxpool2d(const Var& x, int kh, int kw) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 4) throw ShapeError("maxpool2d: input must be [N,C,H,W]");
    const int n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
    if (h < kh || w < kw) throw ShapeError("maxpool2d: input smaller than kernel");
    const int oh = h / kh, ow = w / kw;

    Tensor out({n, c, oh, ow});
    std::vector<std::size_t> argmax(out.size());
    parallel_for(static_cast<std::size_t>(n) * c, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t nc = lo; nc < hi; ++nc) {
            const double* plane = xv.data() + nc * static_cast<std::size_t>(h) * w;
            double* dst = out.data() + nc * static_cast<std::size_t>(oh) * ow;
            std::size_t* am = argmax.data() + nc * static_cast<std::size_t>(oh) * ow;
            for (int i = 0; i < oh; ++i) {
                for (int j = 0; j < ow; ++j) {
                    double best = plane[static_cast<std::size_t>(i * kh) * w + j * kw];
                    std::size_t best_idx = static_cast<std::size_t>(i * kh) * w + j * kw;
                    for (int u = 0; u < kh; ++u)
                        for (int v = 0; v < kw; ++v) {
                            const std::size_t idx = static_cast<std::size_t>(i * kh + u) * w + (j * kw + v);
                            if (plane[idx] > best) {  // strict: first max wins ties
                                best = plane[idx];
                                best_idx = idx;
                            }
                        }
                    dst[static_cast<std::size_t>(i) * ow + j] = best;
                    am[static_cast<std::size_t>(i) * ow + j] = nc * static_cast<std::size_t>(h) * w + best_idx;
                }
            }
        }
    });

    return make_op(std::move(out), {x}, [argmax = std::move(argmax)](Node& self) {
        Node& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        Tensor& dx = xn.ensure_grad();
        for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += self.grad[i];
    });
}

Var dropout(const Var& x, double p, Mode mode, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: need 0 <= p < 1");
    if (mode == Mode::eval || p == 0.0) {
        Tensor out = x.value();
        return make_op(std::move(out), {x}, [](Node& self) {
            Node& xn = *self.parents[0];
            if (!xn.requires_grad) return;
            Tensor& dx = xn.ensure_grad();
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i];
        });
    }
    const double keep_scale = 1.0 / (1.0 - p);
    std::vector<double> mask(x.value().size());
    for (double& mv : mask) mv = (rng.uniform() < p) ? 0.0 : keep_scale;
    Tensor out = x.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    return make_op(std::move(out), {x}, [mask = std::move(mask)](Node& self) {
        Node& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        Tensor& dx = xn.ensure_grad();
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i] * mask[i];
    });
}

// ---- dense / reshape ------------------------------------------------------------

Var linear(const Var& x, const Var& w, const Var& b) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    if (xv.ndim() != 2 || wv.ndim() != 2 || xv.dim(1) != wv.dim(0))
        throw ShapeError("linear: need x [N,F] and w [F,O], got " + shape_string(xv.shape()) +
                         " and " + shape_string(wv.shape()));
    const int n = xv.dim(0), f = xv.dim(1), o = wv.dim(1);
    if (b.value().size() != static_cast<std::size_t>(o)) throw ShapeError("linear: bias must be [O]");

    Tensor out({n, o});
    gemm(xv.data(), wv.data(), out.data(), n, f, o, false);
    const double* bias = b.value().data();
    for (int i = 0; i < n; ++i) {
        double* row = out.data() + static_cast<std::size_t>(i) * o;
        for (int j = 0; j < o; ++j) row[j] += bias[j];
    }

    return make_op(std::move(out), {x, w, b}, [n, f, o](Node& self) {
        Node& xn = *self.parents[0];
        Node& wn = *self.parents[1];
        Node& bn = *self.parents[2];
        if (bn.requires_grad) {
            Tensor& db = bn.ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < o; ++j) db[j] += self.grad[static_cast<std::size_t>(i) * o + j];
        }
        if (wn.requires_grad) {
            // dw[F,O] += x^T dout
            Tensor tmp({f, o});
            gemm_atb(xn.value.data(), self.grad.data(), tmp.data(), n, f, o);
            Tensor& dw = wn.ensure_grad();
            for (std::size_t i = 0; i < dw.size(); ++i) dw[i] += tmp[i];
        }
        if (xn.requires_grad) {
            // dx[N,F] += dout w^T
            Tensor tmp({n, f});
            gemm_abt(self.grad.data(), wn.value.data(), tmp.data(), n, o, f, false);
            Tensor& dx = xn.ensure_grad();
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += tmp[i];
        }
    });
}

Var flatten(const Var& x) {
    const Tensor& xv = x.value();
    if (xv.ndim() < 2) throw ShapeError("flatten: need at least 2 dimensions");
    int f = 1;
    for (std::size_t i = 1; i < xv.ndim(); ++i) f *= xv.dim(i);
    Tensor out({xv.dim(0), f}, xv.vec());
    return make_op(std::move(out), {x}, [](Node& self) {
        Node& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        Tensor& dx = xn.ensure_grad();
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i];
    });
}

Var global_avg_pool2d(const Var& x) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 4) throw ShapeError("global_avg_pool2d: input must be [N,C,H,W]");
    const int n = xv.dim(0), c = xv.dim(1);
    const std::size_t plane = static_cast<std::size_t>(xv.dim(2)) * xv.dim(3);
    Tensor out({n, c});
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const double* p = xv.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
            double acc = 0.0;
            for (std::size_t j = 0; j < plane; ++j) acc += p[j];
            out[static_cast<std::size_t>(i) * c + ch] = acc / static_cast<double>(plane);
        }
    return make_op(std::move(out), {x}, [n, c, plane](Node& self) {
        Node& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        Tensor& dx = xn.ensure_grad();
        const double inv = 1.0 / static_cast<double>(plane);
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                const double g = self.grad[static_cast<std::size_t>(i) * c + ch] * inv;
                double* p = dx.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
                for (std::size_t j = 0; j < plane; ++j) p[j] += g;
            }
    });
}

Var channelwise_mul(const Var& x, const Var& s) {
    const Tensor& xv = x.value();
    const Tensor& sv = s.value();
    if (xv.ndim() != 4 || sv.ndim() != 2 || sv.dim(0) != xv.dim(0) || sv.dim(1) != xv.dim(1))
        throw ShapeError("channelwise_mul: need x [N,C,H,W] and s [N,C]");
    const int n = xv.dim(0), c = xv.dim(1);
    const std::size_t plane = static_cast<std::size_t>(xv.dim(2)) * xv.dim(3);
    Tensor out(xv.shape());
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const double k = sv[static_cast<std::size_t>(i) * c + ch];
            const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) out[base + j] = xv[base + j] * k;
        }
    return make_op(std::move(out), {x, s}, [n, c, plane](Node& self) {
        Node& xn = *self.parents[0];
        Node& sn = *self.parents[1];
        if (xn.requires_grad) {
            Tensor& dx = xn.ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int ch = 0; ch < c; ++ch) {
                    const double k = sn.value[static_cast<std::size_t>(i) * c + ch];
                    const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * plane;
                    for (std::size_t j = 0; j < plane; ++j) dx[base + j] += self.grad[base + j] * k;
                }
        }
        if (sn.requires_grad) {
            Tensor& ds = sn.ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int ch = 0; ch < c; ++ch) {
                    const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * plane;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < plane; ++j)
                        acc += self.grad[base + j] * xn.value[base + j];
                    ds[static_cast<std::size_t>(i) * c + ch] += acc;
                }
        }
    });
}

Var crop2d(const Var& x, int out_h, int out_w) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 4) throw ShapeError("crop2d: input must be [N,C,H,W]");
    const int n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
    if (out_h > h || out_w > w) throw ShapeError("crop2d: crop larger than input");
    Tensor out({n, c, out_h, out_w});
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
            for (int r = 0; r < out_h; ++r)
                for (int col = 0; col < out_w; ++col)
                    out.at4(i, ch, r, col) = xv.at4(i, ch, r, col);
    return make_op(std::move(out), {x}, [out_h, out_w](Node& self) {
        Node& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        Tensor& dx = xn.ensure_grad();
        const auto& shp = xn.value.shape();
        for (int i = 0; i < shp[0]; ++i)
            for (int ch = 0; ch < shp[1]; ++ch)
                for (int r = 0; r < out_h; ++r)
                    for (int col = 0; col < out_w; ++col)
                        dx.at4(i, ch, r, col) += self.grad.at4(i, ch, r, col);
    });
}

// ---- arithmetic helpers -----------------------------------------------------------

Var add(const Var& a, const Var& b) {
    if (!a.value().same_shape(b.value())) throw ShapeError("add: shape mismatch");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    return make_op(std::move(out), {a, b}, [](Node& self) {
        for (auto& p : self.parents) {
            if (!p->requires_grad) continue;
            Tensor& g = p->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    if (!a.value().same_shape(b.value())) throw ShapeError("mul: shape mismatch");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    return make_op(std::move(out), {a, b}, [](Node& self) {
        Node& an = *self.parents[0];
        Node& bn = *self.parents[1];
        if (an.requires_grad) {
            Tensor& g = an.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn.value[i];
        }
        if (bn.requires_grad) {
            Tensor& g = bn.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an.value[i];
        }
    });
}

Var scale(const Var& a, double k) {
    Tensor out = a.value();
    for (double& v : out.vec()) v *= k;
    return make_op(std::move(out), {a}, [k](Node& self) {
        Node& an = *self.parents[0];
        if (!an.requires_grad) return;
        Tensor& g = an.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * k;
    });
}

Var sum(const Var& a) {
    double acc = 0.0;
    for (double v : a.value().vec()) acc += v;
    return make_op(Tensor::scalar(acc), {a}, [](Node& self) {
        Node& an = *self.parents[0];
        if (!an.requires_grad) return;
        Tensor& g = an.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0];
    });
}

// ---- loss --------------------------------------------------------------------------

Var weighted_bce(const Var& p, const Tensor& y, double w_pos) {
    const Tensor& pv = p.value();
    if (pv.size() != y.size()) throw ShapeError("weighted_bce: prediction/label size mismatch");
    if (pv.size() == 0) throw ShapeError("weighted_bce: empty batch");
    constexpr double lo = 1e-7, hi = 1.0 - 1e-7;
    const std::size_t n = pv.size();

    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double pc = std::clamp(pv[i], lo, hi);
        acc -= w_pos * y[i] * std::log(pc) + (1.0 - w_pos) * (1.0 - y[i]) * std::log(1.0 - pc);
    }
    Tensor out = Tensor::scalar(acc / static_cast<double>(n));

    return make_op(std::move(out), {p}, [y, w_pos, n, lo, hi](Node& self) {
        Node& pn = *self.parents[0];
        if (!pn.requires_grad) return;
        Tensor& dp = pn.ensure_grad();
        const double g0 = self.grad[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double pi = pn.value[i];
            if (pi <= lo || pi >= hi) continue;  // clamped: no gradient
            dp[i] += g0 * (-w_pos * y[i] / pi + (1.0 - w_pos) * (1.0 - y[i]) / (1.0 - pi));
        }
    });
}

// ---- backward ------------------------------------------------------------------------

void backward(const Var& loss) {
    Node* root = node_of(loss);
    if (!root) throw UsageError("backward: undefined loss");
    if (root->value.size() != 1) throw UsageError("backward: loss must be scalar");
    if (root->backward_ran)
        throw UsageError("backward: already called on this loss; rebuild the graph first");
    root->backward_ran = true;
    if (!root->requires_grad) return;

    // iterative post-order over the requires-grad subgraph
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad()[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (!node->backprop) continue;
        for (auto& parent : node->parents)
            if (parent->requires_grad) parent->ensure_grad();
        node->backprop(*node);
    }
}

// ---- finite differences -----------------------------------------------------------------

double grad_check(const std::function<Var()>& build_loss, const std::vector<Var>& leaves,
                  const GradCheckOptions& opt) {
    for (const Var& leaf : leaves) const_cast<Var&>(leaf).zero_grad();
    Var loss = build_loss();
    backward(loss);

    std::vector<Tensor> analytic;
    analytic.reserve(leaves.size());
    for (const Var& leaf : leaves) analytic.push_back(leaf.grad());

    Rng rng(opt.seed);
    double worst = 0.0;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        Tensor& v = const_cast<Var&>(leaves[li]).value_mut();
        std::vector<std::size_t> coords;
        if (opt.max_coords_per_leaf < 0 ||
            static_cast<std::size_t>(opt.max_coords_per_leaf) >= v.size()) {
            coords.resize(v.size());
            for (std::size_t i = 0; i < v.size(); ++i) coords[i] = i;
        } else {
            for (int i = 0; i < opt.max_coords_per_leaf; ++i)
                coords.push_back(static_cast<std::size_t>(rng.uniform_int(v.size())));
        }
        for (std::size_t idx : coords) {
            const double orig = v[idx];
            v[idx] = orig + opt.step;
            const double f_plus = build_loss().value()[0];
            v[idx] = orig - opt.step;
            const double f_minus = build_loss().value()[0];
            v[idx] = orig;
            const double fd = (f_plus - f_minus) / (2.0 * opt.step);
            const double an = analytic[li].size() > 0 ? analytic[li][idx] : 0.0;
            const double rel = std::fabs(an - fd) / std::max({1.0, std::fabs(an), std::fabs(fd)});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace preictal
