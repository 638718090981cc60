// SPDX-License-Identifier: Apache-2.0

#include "msmatch/kernels/kernels.hpp"

#include <atomic>

namespace msmatch::kernels {

namespace {
std::atomic<Backend> g_backend{Backend::openmp};
}

Backend backend() { return g_backend.load(std::memory_order_relaxed); }
void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }

#define MSMATCH_DISPATCH(call) \
    return backend() == Backend::openmp ? omp::call : ref::call

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& bias,
                      const ConvSpec& spec) {
    MSMATCH_DISPATCH(conv2d_forward(x, w, bias, spec));
}

void conv2d_backward_input(const Tensor& gy, const Tensor& w, const ConvSpec& spec,
                           Tensor& gx) {
    if (backend() == Backend::openmp)
        omp::conv2d_backward_input(gy, w, spec, gx);
    else
        ref::conv2d_backward_input(gy, w, spec, gx);
}

void conv2d_backward_weights(const Tensor& gy, const Tensor& x, const ConvSpec& spec,
                             Tensor& gw, Tensor& gb) {
    if (backend() == Backend::openmp)
        omp::conv2d_backward_weights(gy, x, spec, gw, gb);
    else
        ref::conv2d_backward_weights(gy, x, spec, gw, gb);
}

Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& bias) {
    MSMATCH_DISPATCH(linear_forward(x, w, bias));
}

void linear_backward_input(const Tensor& gy, const Tensor& w, Tensor& gx) {
    if (backend() == Backend::openmp)
        omp::linear_backward_input(gy, w, gx);
    else
        ref::linear_backward_input(gy, w, gx);
}

void linear_backward_weights(const Tensor& gy, const Tensor& x, Tensor& gw, Tensor& gb) {
    if (backend() == Backend::openmp)
        omp::linear_backward_weights(gy, x, gw, gb);
    else
        ref::linear_backward_weights(gy, x, gw, gb);
}

void batchnorm_stats(const Tensor& x, Tensor& mean, Tensor& var) {
    if (backend() == Backend::openmp)
        omp::batchnorm_stats(x, mean, var);
    else
        ref::batchnorm_stats(x, mean, var);
}

Tensor batchnorm_forward(const Tensor& x, const Tensor& mean, const Tensor& invstd,
                         const Tensor& gamma, const Tensor& beta) {
    MSMATCH_DISPATCH(batchnorm_forward(x, mean, invstd, gamma, beta));
}

void batchnorm_backward(const Tensor& gy, const Tensor& x, const Tensor& mean,
                        const Tensor& invstd, const Tensor& gamma,
                        Tensor& gx, Tensor& dgamma, Tensor& dbeta) {
    if (backend() == Backend::openmp)
        omp::batchnorm_backward(gy, x, mean, invstd, gamma, gx, dgamma, dbeta);
    else
        ref::batchnorm_backward(gy, x, mean, invstd, gamma, gx, dgamma, dbeta);
}

void batchnorm_backward_eval(const Tensor& gy, const Tensor& x, const Tensor& mean,
                             const Tensor& invstd, const Tensor& gamma,
                             Tensor& gx, Tensor& dgamma, Tensor& dbeta) {
    const int64_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    for (int64_t c = 0; c < C; ++c) {
        const double a = gamma[c] * invstd[c];
        double sg = 0.0, sb = 0.0;
        for (int64_t n = 0; n < N; ++n) {
            const double* gyp = gy.data() + (n * C + c) * HW;
            const double* xp = x.data() + (n * C + c) * HW;
            double* gxp = gx.data() + (n * C + c) * HW;
            for (int64_t p = 0; p < HW; ++p) {
                sg += gyp[p] * (xp[p] - mean[c]) * invstd[c];
                sb += gyp[p];
                gxp[p] += a * gyp[p];
            }
        }
        dgamma[c] += sg;
        dbeta[c] += sb;
    }
}

Tensor maxpool2d_forward(const Tensor& x, int64_t k, int64_t stride,
                         std::vector<int32_t>& argmax) {
    MSMATCH_DISPATCH(maxpool2d_forward(x, k, stride, argmax));
}

void maxpool2d_backward(const Tensor& gy, const std::vector<int32_t>& argmax, Tensor& gx) {
    if (backend() == Backend::openmp)
        omp::maxpool2d_backward(gy, argmax, gx);
    else
        ref::maxpool2d_backward(gy, argmax, gx);
}

Tensor global_avg_pool_forward(const Tensor& x) {
    MSMATCH_DISPATCH(global_avg_pool_forward(x));
}

void global_avg_pool_backward(const Tensor& gy, int64_t H, int64_t W, Tensor& gx) {
    if (backend() == Backend::openmp)
        omp::global_avg_pool_backward(gy, H, W, gx);
    else
        ref::global_avg_pool_backward(gy, H, W, gx);
}

#undef MSMATCH_DISPATCH

}  // namespace msmatch::kernels
