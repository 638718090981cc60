// SPDX-License-Identifier: Apache-2.0

#include "msmatch/nn/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace msmatch::nn {

namespace {
bool g_guided = false;
RectifierObserver g_observer;

void require_cache(bool have, const char* who) {
    if (!have)
        throw std::logic_error(std::string(who) +
                               ": backward without a grad-enabled forward");
}
}  // namespace

void set_guided_backprop(bool on) { g_guided = on; }
bool guided_backprop() { return g_guided; }
void set_rectifier_observer(RectifierObserver obs) { g_observer = std::move(obs); }

void add_inplace(Tensor& a, const Tensor& b) {
    const int64_t n = a.numel();
#pragma omp parallel for schedule(static) if (n > 16384)
    for (int64_t i = 0; i < n; ++i) a[i] += b[i];
}

void scale_inplace(Tensor& a, double s) {
    const int64_t n = a.numel();
#pragma omp parallel for schedule(static) if (n > 16384)
    for (int64_t i = 0; i < n; ++i) a[i] *= s;
}

// ---- Conv2d ----

Conv2d::Conv2d(int64_t in_ch, int64_t out_ch, int64_t k, int64_t stride, int64_t pad,
               int64_t groups, bool with_bias)
    : weight({out_ch, in_ch / groups, k, k}),
      bias(with_bias ? std::vector<int64_t>{out_ch} : std::vector<int64_t>{0}),
      in_channels(in_ch),
      out_channels(out_ch),
      kernel(k),
      has_bias(with_bias) {
    if (in_ch % groups != 0 || out_ch % groups != 0)
        throw std::invalid_argument("Conv2d: channels not divisible by groups");
    spec.stride = stride;
    spec.pad = pad;
    spec.groups = groups;
    weight.name = "conv.weight";
    bias.name = "conv.bias";
}

Tensor Conv2d::forward(const Tensor& x, RunCtx& ctx) {
    if (x.dim(1) != in_channels)
        throw std::invalid_argument("Conv2d: input has " + std::to_string(x.dim(1)) +
                                    " channels, expected " + std::to_string(in_channels));
    if (ctx.grad) {
        cached_x_ = x;
        have_cache_ = true;
    }
    return kernels::conv2d_forward(x, weight.value, bias.value, spec);
}

Tensor Conv2d::backward(const Tensor& gy) {
    require_cache(have_cache_, "Conv2d");
    kernels::conv2d_backward_weights(gy, cached_x_, spec, weight.grad, bias.grad);
    Tensor gx(cached_x_.shape());
    kernels::conv2d_backward_input(gy, weight.value, spec, gx);
    return gx;
}

void Conv2d::collect(std::vector<Param*>& p, std::vector<BufferT*>& b) {
    (void)b;
    p.push_back(&weight);
    if (has_bias) p.push_back(&bias);
}

// ---- Linear ----

Linear::Linear(int64_t in_d, int64_t out_d, bool with_bias)
    : weight({out_d, in_d}),
      bias(with_bias ? std::vector<int64_t>{out_d} : std::vector<int64_t>{0}),
      in_dim(in_d),
      out_dim(out_d),
      has_bias(with_bias) {
    weight.name = "linear.weight";
    bias.name = "linear.bias";
}

Tensor Linear::forward(const Tensor& x, RunCtx& ctx) {
    if (ctx.grad) {
        cached_x_ = x;
        have_cache_ = true;
    }
    return kernels::linear_forward(x, weight.value, bias.value);
}

Tensor Linear::backward(const Tensor& gy) {
    require_cache(have_cache_, "Linear");
    kernels::linear_backward_weights(gy, cached_x_, weight.grad, bias.grad);
    Tensor gx(cached_x_.shape());
    kernels::linear_backward_input(gy, weight.value, gx);
    return gx;
}

void Linear::collect(std::vector<Param*>& p, std::vector<BufferT*>& b) {
    (void)b;
    p.push_back(&weight);
    if (has_bias) p.push_back(&bias);
}

// ---- BatchNorm2d ----

BatchNorm2d::BatchNorm2d(int64_t channels, double eps_, double momentum_)
    : gamma({channels}),
      beta({channels}),
      running_mean({channels}),
      running_var({channels}),
      eps(eps_),
      momentum(momentum_) {
    gamma.value.fill(1.0);
    running_var.value.fill(1.0);
    gamma.name = "bn.gamma";
    beta.name = "bn.beta";
    running_mean.name = "bn.running_mean";
    running_var.name = "bn.running_var";
}

Tensor BatchNorm2d::forward(const Tensor& x, RunCtx& ctx) {
    const int64_t C = x.dim(1);
    Tensor mean({C}), invstd({C});
    if (ctx.training) {
        Tensor var({C});
        kernels::batchnorm_stats(x, mean, var);
        for (int64_t c = 0; c < C; ++c) invstd[c] = 1.0 / std::sqrt(var[c] + eps);
        if (ctx.update_running_stats) {
            const double count = static_cast<double>(x.dim(0) * x.dim(2) * x.dim(3));
            const double unbias = count > 1.0 ? count / (count - 1.0) : 1.0;
            for (int64_t c = 0; c < C; ++c) {
                running_mean.value[c] =
                    (1.0 - momentum) * running_mean.value[c] + momentum * mean[c];
                running_var.value[c] =
                    (1.0 - momentum) * running_var.value[c] + momentum * var[c] * unbias;
            }
        }
    } else {
        for (int64_t c = 0; c < C; ++c) {
            mean[c] = running_mean.value[c];
            invstd[c] = 1.0 / std::sqrt(running_var.value[c] + eps);
        }
    }
    if (ctx.grad) {
        cached_x_ = x;
        saved_mean_ = mean;
        saved_invstd_ = invstd;
        cached_training_ = ctx.training;
        have_cache_ = true;
    }
    return kernels::batchnorm_forward(x, mean, invstd, gamma.value, beta.value);
}

Tensor BatchNorm2d::backward(const Tensor& gy) {
    require_cache(have_cache_, "BatchNorm2d");
    Tensor gx(cached_x_.shape());
    if (cached_training_)
        kernels::batchnorm_backward(gy, cached_x_, saved_mean_, saved_invstd_,
                                    gamma.value, gx, gamma.grad, beta.grad);
    else
        kernels::batchnorm_backward_eval(gy, cached_x_, saved_mean_, saved_invstd_,
                                         gamma.value, gx, gamma.grad, beta.grad);
    return gx;
}

void BatchNorm2d::collect(std::vector<Param*>& p, std::vector<BufferT*>& b) {
    p.push_back(&gamma);
    p.push_back(&beta);
    b.push_back(&running_mean);
    b.push_back(&running_var);
}

// ---- activations ----

Tensor ReLU::forward(const Tensor& x, RunCtx& ctx) {
    Tensor y(x.shape());
    const int64_t n = x.numel();
#pragma omp parallel for schedule(static) if (n > 16384)
    for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    if (ctx.grad) {
        cached_y_ = y;
        have_cache_ = true;
    }
    return y;
}

Tensor ReLU::backward(const Tensor& gy) {
    require_cache(have_cache_, "ReLU");
    Tensor gx(cached_y_.shape());
    const int64_t n = gy.numel();
    const bool guided = g_guided;
#pragma omp parallel for schedule(static) if (n > 16384)
    for (int64_t i = 0; i < n; ++i) {
        double g = cached_y_[i] > 0.0 ? gy[i] : 0.0;
        if (guided && g < 0.0) g = 0.0;
        gx[i] = g;
    }
    if (g_observer) g_observer(gx, cached_y_);
    return gx;
}

Tensor SiLU::forward(const Tensor& x, RunCtx& ctx) {
    Tensor y(x.shape());
    const int64_t n = x.numel();
#pragma omp parallel for schedule(static) if (n > 16384)
    for (int64_t i = 0; i < n; ++i) y[i] = x[i] / (1.0 + std::exp(-x[i]));
    if (ctx.grad) {
        cached_x_ = x;
        have_cache_ = true;
    }
    return y;
}

Tensor SiLU::backward(const Tensor& gy) {
    require_cache(have_cache_, "SiLU");
    Tensor gx(cached_x_.shape());
    const int64_t n = gy.numel();
    const bool guided = g_guided;
#pragma omp parallel for schedule(static) if (n > 16384)
    for (int64_t i = 0; i < n; ++i) {
        const double s = 1.0 / (1.0 + std::exp(-cached_x_[i]));
        const double d = s * (1.0 + cached_x_[i] * (1.0 - s));
        double g = gy[i];
        if (guided) {
            // same rule as ReLU, applied at the smooth rectifier
            if (g < 0.0 || cached_x_[i] <= 0.0) g = 0.0;
        }
        gx[i] = g * d;
    }
    if (g_observer) g_observer(gx, cached_x_);
    return gx;
}

// ---- pooling / reshape ----

Tensor MaxPool2d::forward(const Tensor& x, RunCtx& ctx) {
    Tensor y = kernels::maxpool2d_forward(x, kernel_, stride_, argmax_);
    if (ctx.grad) {
        in_shape_ = x.shape();
        have_cache_ = true;
    }
    return y;
}

Tensor MaxPool2d::backward(const Tensor& gy) {
    require_cache(have_cache_, "MaxPool2d");
    Tensor gx(in_shape_);
    kernels::maxpool2d_backward(gy, argmax_, gx);
    return gx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, RunCtx& ctx) {
    if (ctx.grad) {
        in_shape_ = x.shape();
        have_cache_ = true;
    }
    return kernels::global_avg_pool_forward(x);
}

Tensor GlobalAvgPool::backward(const Tensor& gy) {
    require_cache(have_cache_, "GlobalAvgPool");
    Tensor gx(in_shape_);
    kernels::global_avg_pool_backward(gy, in_shape_[2], in_shape_[3], gx);
    return gx;
}

Tensor Flatten::forward(const Tensor& x, RunCtx& ctx) {
    if (ctx.grad) {
        in_shape_ = x.shape();
        have_cache_ = true;
    }
    Tensor y = x;
    y.reshape({x.dim(0), x.numel() / x.dim(0)});
    return y;
}

Tensor Flatten::backward(const Tensor& gy) {
    require_cache(have_cache_, "Flatten");
    Tensor gx = gy;
    gx.reshape(in_shape_);
    return gx;
}

// ---- dropout ----

Tensor Dropout::forward(const Tensor& x, RunCtx& ctx) {
    if (!ctx.training || p_ <= 0.0) {
        scaled_ = false;
        have_cache_ = ctx.grad;
        return x;
    }
    if (!ctx.rng) throw std::logic_error("Dropout: training forward without rng");
    const int64_t n = x.numel();
    mask_.resize(static_cast<size_t>(n));
    Tensor y(x.shape());
    const double inv_keep = 1.0 / (1.0 - p_);
    for (int64_t i = 0; i < n; ++i) {
        const bool keep = !ctx.rng->bernoulli(p_);
        mask_[static_cast<size_t>(i)] = keep ? 1 : 0;
        y[i] = keep ? x[i] * inv_keep : 0.0;
    }
    scaled_ = true;
    have_cache_ = ctx.grad;
    return y;
}

Tensor Dropout::backward(const Tensor& gy) {
    require_cache(have_cache_, "Dropout");
    if (!scaled_) return gy;
    Tensor gx(gy.shape());
    const double inv_keep = 1.0 / (1.0 - p_);
    const int64_t n = gy.numel();
    for (int64_t i = 0; i < n; ++i)
        gx[i] = mask_[static_cast<size_t>(i)] ? gy[i] * inv_keep : 0.0;
    return gx;
}

// ---- containers ----

Tensor Sequential::forward(const Tensor& x, RunCtx& ctx) {
    Tensor h = x;
    for (auto& l : layers_) h = l->forward(h, ctx);
    return h;
}

Tensor Sequential::backward(const Tensor& gy) {
    Tensor g = gy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

void Sequential::collect(std::vector<Param*>& p, std::vector<BufferT*>& b) {
    for (auto& l : layers_) l->collect(p, b);
}

// ---- squeeze-excitation ----

SqueezeExcite::SqueezeExcite(int64_t channels, int64_t squeezed)
    : reduce(channels, squeezed, true), expand(squeezed, channels, true) {}

Tensor SqueezeExcite::forward(const Tensor& x, RunCtx& ctx) {
    const int64_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    Tensor pooled = kernels::global_avg_pool_forward(x);  // [N,C]
    Tensor z1 = kernels::linear_forward(pooled, reduce.weight.value, reduce.bias.value);
    Tensor a1(z1.shape());
    for (int64_t i = 0; i < z1.numel(); ++i) a1[i] = z1[i] / (1.0 + std::exp(-z1[i]));
    Tensor z2 = kernels::linear_forward(a1, expand.weight.value, expand.bias.value);
    Tensor scale(z2.shape());
    for (int64_t i = 0; i < z2.numel(); ++i) scale[i] = 1.0 / (1.0 + std::exp(-z2[i]));

    Tensor y(x.shape());
#pragma omp parallel for schedule(static) collapse(2)
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double s = scale.at2(n, c);
            const double* in = x.data() + (n * C + c) * HW;
            double* out = y.data() + (n * C + c) * HW;
            for (int64_t p = 0; p < HW; ++p) out[p] = in[p] * s;
        }

    if (ctx.grad) {
        cached_x_ = x;
        cached_scale_ = scale;
        cached_z1_ = z1;
        cached_pooled_ = pooled;
        have_cache_ = true;
    }
    return y;
}

Tensor SqueezeExcite::backward(const Tensor& gy) {
    require_cache(have_cache_, "SqueezeExcite");
    const int64_t N = cached_x_.dim(0), C = cached_x_.dim(1);
    const int64_t HW = cached_x_.dim(2) * cached_x_.dim(3);

    // y = x * s  =>  dx_direct = gy * s;  ds = sum_hw gy * x
    Tensor gscale({N, C});
    Tensor gx(cached_x_.shape());
#pragma omp parallel for schedule(static) collapse(2)
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double s = cached_scale_.at2(n, c);
            const double* gyp = gy.data() + (n * C + c) * HW;
            const double* xp = cached_x_.data() + (n * C + c) * HW;
            double* gxp = gx.data() + (n * C + c) * HW;
            double acc = 0.0;
            for (int64_t p = 0; p < HW; ++p) {
                gxp[p] = gyp[p] * s;
                acc += gyp[p] * xp[p];
            }
            gscale.at2(n, c) = acc;
        }

    // through sigmoid
    Tensor gz2(gscale.shape());
    for (int64_t i = 0; i < gz2.numel(); ++i) {
        const double s = cached_scale_[i];
        gz2[i] = gscale[i] * s * (1.0 - s);
    }
    // through expand linear
    Tensor a1(cached_z1_.shape());
    for (int64_t i = 0; i < a1.numel(); ++i)
        a1[i] = cached_z1_[i] / (1.0 + std::exp(-cached_z1_[i]));
    kernels::linear_backward_weights(gz2, a1, expand.weight.grad, expand.bias.grad);
    Tensor ga1(a1.shape());
    kernels::linear_backward_input(gz2, expand.weight.value, ga1);
    // through silu
    Tensor gz1(ga1.shape());
    for (int64_t i = 0; i < gz1.numel(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-cached_z1_[i]));
        gz1[i] = ga1[i] * s * (1.0 + cached_z1_[i] * (1.0 - s));
    }
    // through reduce linear
    kernels::linear_backward_weights(gz1, cached_pooled_, reduce.weight.grad,
                                     reduce.bias.grad);
    Tensor gpooled(cached_pooled_.shape());
    kernels::linear_backward_input(gz1, reduce.weight.value, gpooled);
    // through gap, added to the direct path
    kernels::global_avg_pool_backward(gpooled, cached_x_.dim(2), cached_x_.dim(3), gx);
    return gx;
}

void SqueezeExcite::collect(std::vector<Param*>& p, std::vector<BufferT*>& b) {
    reduce.collect(p, b);
    expand.collect(p, b);
}

// ---- MBConv ----

MBConv::MBConv(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride,
               int64_t expanded_ch, int64_t squeezed_ch)
    : expand_phase_(expanded_ch != in_ch),
      skip_(stride == 1 && in_ch == out_ch),
      dw_conv_(expanded_ch, expanded_ch, kernel, stride, (kernel - 1) / 2, expanded_ch,
               false),
      dw_bn_(expanded_ch),
      se_(expanded_ch, squeezed_ch),
      project_conv_(expanded_ch, out_ch, 1, 1, 0, 1, false),
      project_bn_(out_ch) {
    if (expand_phase_) {
        expand_conv_ = std::make_unique<Conv2d>(in_ch, expanded_ch, 1, 1, 0, 1, false);
        expand_bn_ = std::make_unique<BatchNorm2d>(expanded_ch);
        expand_act_ = std::make_unique<SiLU>();
    }
}

Tensor MBConv::forward(const Tensor& x, RunCtx& ctx) {
    Tensor h = x;
    if (expand_phase_) {
        h = expand_conv_->forward(h, ctx);
        h = expand_bn_->forward(h, ctx);
        h = expand_act_->forward(h, ctx);
    }
    h = dw_conv_.forward(h, ctx);
    h = dw_bn_.forward(h, ctx);
    h = dw_act_.forward(h, ctx);
    h = se_.forward(h, ctx);
    h = project_conv_.forward(h, ctx);
    h = project_bn_.forward(h, ctx);
    if (skip_) add_inplace(h, x);
    return h;
}

Tensor MBConv::backward(const Tensor& gy) {
    Tensor g = project_bn_.backward(gy);
    g = project_conv_.backward(g);
    g = se_.backward(g);
    g = dw_act_.backward(g);
    g = dw_bn_.backward(g);
    g = dw_conv_.backward(g);
    if (expand_phase_) {
        g = expand_act_->backward(g);
        g = expand_bn_->backward(g);
        g = expand_conv_->backward(g);
    }
    if (skip_) add_inplace(g, gy);
    return g;
}

void MBConv::collect(std::vector<Param*>& p, std::vector<BufferT*>& b) {
    if (expand_phase_) {
        expand_conv_->collect(p, b);
        expand_bn_->collect(p, b);
    }
    dw_conv_.collect(p, b);
    dw_bn_.collect(p, b);
    se_.collect(p, b);
    project_conv_.collect(p, b);
    project_bn_.collect(p, b);
}

}  // namespace msmatch::nn
