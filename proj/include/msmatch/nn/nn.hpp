// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "msmatch/core/rng.hpp"
#include "msmatch/core/tensor.hpp"
#include "msmatch/kernels/kernels.hpp"

namespace msmatch::nn {

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    explicit Param(std::vector<int64_t> shape)
        : value(shape), grad(std::move(shape)) {}
    void zero_grad() { grad.fill(0.0); }
};

/// Non-trainable persistent state (batch-norm running statistics).
struct BufferT {
    std::string name;
    Tensor value;
    explicit BufferT(std::vector<int64_t> shape) : value(std::move(shape)) {}
};

struct RunCtx {
    bool training = false;            // batch statistics, dropout active
    bool grad = false;                // cache activations for backward
    bool update_running_stats = false;
    Rng* rng = nullptr;               // consumed by stochastic layers
};

/// Guided-backpropagation switch: while on, rectifier backward passes zero
/// the signal where the forward activation was <= 0 and where the incoming
/// gradient is negative.
void set_guided_backprop(bool on);
bool guided_backprop();

/// Test instrumentation: invoked by every rectifier backward with the
/// propagated gradient and the forward output. Null by default.
using RectifierObserver = std::function<void(const Tensor& propagated, const Tensor& output)>;
void set_rectifier_observer(RectifierObserver obs);

class Module {
public:
    virtual ~Module() = default;
    virtual Tensor forward(const Tensor& x, RunCtx& ctx) = 0;
    /// Consumes the cache of the most recent grad-enabled forward.
    virtual Tensor backward(const Tensor& gy) = 0;
    virtual void collect(std::vector<Param*>& params, std::vector<BufferT*>& buffers) {
        (void)params;
        (void)buffers;
    }
};

using ModulePtr = std::unique_ptr<Module>;

class Conv2d : public Module {
public:
    Conv2d(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride, int64_t pad,
           int64_t groups, bool bias);
    Tensor forward(const Tensor& x, RunCtx& ctx) override;
    Tensor backward(const Tensor& gy) override;
    void collect(std::vector<Param*>& p, std::vector<BufferT*>& b) override;

    Param weight;
    Param bias;  // zero-sized when disabled
    kernels::ConvSpec spec;
    int64_t in_channels, out_channels, kernel;
    bool has_bias;

private:
    Tensor cached_x_;
    bool have_cache_ = false;
};

class Linear : public Module {
public:
    Linear(int64_t in_dim, int64_t out_dim, bool bias = true);
    Tensor forward(const Tensor& x, RunCtx& ctx) override;
    Tensor backward(const Tensor& gy) override;
    void collect(std::vector<Param*>& p, std::vector<BufferT*>& b) override;

    Param weight;
    Param bias;
    int64_t in_dim, out_dim;
    bool has_bias;

private:
    Tensor cached_x_;
    bool have_cache_ = false;
};

class BatchNorm2d : public Module {
public:
    explicit BatchNorm2d(int64_t channels, double eps = 1e-5, double momentum = 0.1);
    Tensor forward(const Tensor& x, RunCtx& ctx) override;
    Tensor backward(const Tensor& gy) override;
    void collect(std::vector<Param*>& p, std::vector<BufferT*>& b) override;

    Param gamma;
    Param beta;
    BufferT running_mean;
    BufferT running_var;
    double eps, momentum;

private:
    Tensor cached_x_, saved_mean_, saved_invstd_;
    bool cached_training_ = false;
    bool have_cache_ = false;
};

class ReLU : public Module {
public:
    Tensor forward(const Tensor& x, RunCtx& ctx) override;
    Tensor backward(const Tensor& gy) override;

private:
    Tensor cached_y_;
    bool have_cache_ = false;
};

/// x * sigmoid(x); the activation used by the scaled-backbone family.
class SiLU : public Module {
public:
    Tensor forward(const Tensor& x, RunCtx& ctx) override;
    Tensor backward(const Tensor& gy) override;

private:
    Tensor cached_x_;
    bool have_cache_ = false;
};

class MaxPool2d : public Module {
public:
    MaxPool2d(int64_t kernel, int64_t stride) : kernel_(kernel), stride_(stride) {}
    Tensor forward(const Tensor& x, RunCtx& ctx) override;
    Tensor backward(const Tensor& gy) override;

private:
    int64_t kernel_, stride_;
    std::vector<int32_t> argmax_;
    std::vector<int64_t> in_shape_;
    bool have_cache_ = false;
};

/// [N,C,H,W] -> [N,C]
class GlobalAvgPool : public Module {
public:
    Tensor forward(const Tensor& x, RunCtx& ctx) override;
    Tensor backward(const Tensor& gy) override;

private:
    std::vector<int64_t> in_shape_;
    bool have_cache_ = false;
};

/// [N,C,H,W] -> [N, C*H*W]
class Flatten : public Module {
public:
    Tensor forward(const Tensor& x, RunCtx& ctx) override;
    Tensor backward(const Tensor& gy) override;

private:
    std::vector<int64_t> in_shape_;
    bool have_cache_ = false;
};

/// Inverted dropout; identity in eval mode.
class Dropout : public Module {
public:
    explicit Dropout(double p) : p_(p) {}
    Tensor forward(const Tensor& x, RunCtx& ctx) override;
    Tensor backward(const Tensor& gy) override;

private:
    double p_;
    std::vector<uint8_t> mask_;
    bool scaled_ = false;
    bool have_cache_ = false;
};

class Sequential : public Module {
public:
    Sequential() = default;
    void add(ModulePtr m) { layers_.push_back(std::move(m)); }
    Tensor forward(const Tensor& x, RunCtx& ctx) override;
    Tensor backward(const Tensor& gy) override;
    void collect(std::vector<Param*>& p, std::vector<BufferT*>& b) override;
    size_t size() const { return layers_.size(); }
    Module& layer(size_t i) { return *layers_[i]; }

private:
    std::vector<ModulePtr> layers_;
};

/// Channel attention: gap -> fc -> silu -> fc -> sigmoid -> scale input.
class SqueezeExcite : public Module {
public:
    SqueezeExcite(int64_t channels, int64_t squeezed);
    Tensor forward(const Tensor& x, RunCtx& ctx) override;
    Tensor backward(const Tensor& gy) override;
    void collect(std::vector<Param*>& p, std::vector<BufferT*>& b) override;

    Linear reduce;
    Linear expand;

private:
    Tensor cached_x_, cached_scale_, cached_z1_, cached_pooled_;
    bool have_cache_ = false;
};

/// Mobile inverted bottleneck with squeeze-excitation and optional skip.
class MBConv : public Module {
public:
    MBConv(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride,
           int64_t expanded_ch, int64_t squeezed_ch);
    Tensor forward(const Tensor& x, RunCtx& ctx) override;
    Tensor backward(const Tensor& gy) override;
    void collect(std::vector<Param*>& p, std::vector<BufferT*>& b) override;

    bool has_skip() const { return skip_; }

private:
    bool expand_phase_, skip_;
    std::unique_ptr<Conv2d> expand_conv_;
    std::unique_ptr<BatchNorm2d> expand_bn_;
    std::unique_ptr<SiLU> expand_act_;
    Conv2d dw_conv_;
    BatchNorm2d dw_bn_;
    SiLU dw_act_;
    SqueezeExcite se_;
    Conv2d project_conv_;
    BatchNorm2d project_bn_;
};

// ---- elementwise helpers shared by layers and losses ----
void add_inplace(Tensor& a, const Tensor& b);   // a += b
void scale_inplace(Tensor& a, double s);        // a *= s

}  // namespace msmatch::nn
