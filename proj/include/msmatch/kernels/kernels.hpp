// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "msmatch/core/tensor.hpp"

namespace msmatch::kernels {

/// Which implementation the nn layers dispatch to. `openmp` is the
/// production path (im2col/GEMM, parallel loops); `reference` is the naive
/// serial implementation kept around as an independent oracle for tests.
/// Both accumulate every output element in the same index order, so results
/// are deterministic for any thread count.
enum class Backend { openmp, reference };

Backend backend();
void set_backend(Backend b);

struct ConvSpec {
    int64_t stride = 1;
    int64_t pad = 0;
    int64_t groups = 1;
};

int64_t conv_out_dim(int64_t in, int64_t k, int64_t stride, int64_t pad);

// ---- dispatching entry points (used by the nn layers) ----

// x: [N,Cin,H,W], w: [Cout,Cin/g,k,k], bias: [Cout] or empty -> [N,Cout,OH,OW]
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& bias,
                      const ConvSpec& spec);
// gy: [N,Cout,OH,OW] -> gx accumulated into gx (same shape as x)
void conv2d_backward_input(const Tensor& gy, const Tensor& w, const ConvSpec& spec,
                           Tensor& gx);
// accumulates into gw [Cout,Cin/g,k,k] and gb [Cout] (gb may be empty)
void conv2d_backward_weights(const Tensor& gy, const Tensor& x, const ConvSpec& spec,
                             Tensor& gw, Tensor& gb);

// x: [N,IN], w: [OUT,IN], bias: [OUT] or empty -> [N,OUT]
Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& bias);
void linear_backward_input(const Tensor& gy, const Tensor& w, Tensor& gx);
void linear_backward_weights(const Tensor& gy, const Tensor& x, Tensor& gw, Tensor& gb);

// Batch statistics over (N,H,W) per channel; var is the population variance.
void batchnorm_stats(const Tensor& x, Tensor& mean, Tensor& var);
// y = gamma * (x - mean) * invstd + beta, per channel
Tensor batchnorm_forward(const Tensor& x, const Tensor& mean, const Tensor& invstd,
                         const Tensor& gamma, const Tensor& beta);
// Training-mode backward through the batch statistics. Accumulates dgamma/dbeta.
void batchnorm_backward(const Tensor& gy, const Tensor& x, const Tensor& mean,
                        const Tensor& invstd, const Tensor& gamma,
                        Tensor& gx, Tensor& dgamma, Tensor& dbeta);
// Inference-mode backward (mean/invstd treated as constants); shared
// elementwise implementation, no per-backend variant.
void batchnorm_backward_eval(const Tensor& gy, const Tensor& x, const Tensor& mean,
                             const Tensor& invstd, const Tensor& gamma,
                             Tensor& gx, Tensor& dgamma, Tensor& dbeta);

// 2D max pooling; argmax: flat index into the (H*W) plane per output element.
Tensor maxpool2d_forward(const Tensor& x, int64_t k, int64_t stride,
                         std::vector<int32_t>& argmax);
void maxpool2d_backward(const Tensor& gy, const std::vector<int32_t>& argmax,
                        Tensor& gx);

// [N,C,H,W] -> [N,C]
Tensor global_avg_pool_forward(const Tensor& x);
void global_avg_pool_backward(const Tensor& gy, int64_t H, int64_t W, Tensor& gx);

// ---- explicit implementations (exposed for tests and the benchmark) ----

namespace omp {
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& bias,
                      const ConvSpec& spec);
void conv2d_backward_input(const Tensor& gy, const Tensor& w, const ConvSpec& spec,
                           Tensor& gx);
void conv2d_backward_weights(const Tensor& gy, const Tensor& x, const ConvSpec& spec,
                             Tensor& gw, Tensor& gb);
Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& bias);
void linear_backward_input(const Tensor& gy, const Tensor& w, Tensor& gx);
void linear_backward_weights(const Tensor& gy, const Tensor& x, Tensor& gw, Tensor& gb);
void batchnorm_stats(const Tensor& x, Tensor& mean, Tensor& var);
Tensor batchnorm_forward(const Tensor& x, const Tensor& mean, const Tensor& invstd,
                         const Tensor& gamma, const Tensor& beta);
void batchnorm_backward(const Tensor& gy, const Tensor& x, const Tensor& mean,
                        const Tensor& invstd, const Tensor& gamma,
                        Tensor& gx, Tensor& dgamma, Tensor& dbeta);
Tensor maxpool2d_forward(const Tensor& x, int64_t k, int64_t stride,
                         std::vector<int32_t>& argmax);
void maxpool2d_backward(const Tensor& gy, const std::vector<int32_t>& argmax, Tensor& gx);
Tensor global_avg_pool_forward(const Tensor& x);
void global_avg_pool_backward(const Tensor& gy, int64_t H, int64_t W, Tensor& gx);
}  // namespace omp

namespace ref {
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& bias,
                      const ConvSpec& spec);
void conv2d_backward_input(const Tensor& gy, const Tensor& w, const ConvSpec& spec,
                           Tensor& gx);
void conv2d_backward_weights(const Tensor& gy, const Tensor& x, const ConvSpec& spec,
                             Tensor& gw, Tensor& gb);
Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& bias);
void linear_backward_input(const Tensor& gy, const Tensor& w, Tensor& gx);
void linear_backward_weights(const Tensor& gy, const Tensor& x, Tensor& gw, Tensor& gb);
void batchnorm_stats(const Tensor& x, Tensor& mean, Tensor& var);
Tensor batchnorm_forward(const Tensor& x, const Tensor& mean, const Tensor& invstd,
                         const Tensor& gamma, const Tensor& beta);
void batchnorm_backward(const Tensor& gy, const Tensor& x, const Tensor& mean,
                        const Tensor& invstd, const Tensor& gamma,
                        Tensor& gx, Tensor& dgamma, Tensor& dbeta);
Tensor maxpool2d_forward(const Tensor& x, int64_t k, int64_t stride,
                         std::vector<int32_t>& argmax);
void maxpool2d_backward(const Tensor& gy, const std::vector<int32_t>& argmax, Tensor& gx);
Tensor global_avg_pool_forward(const Tensor& x);
void global_avg_pool_backward(const Tensor& gy, int64_t H, int64_t W, Tensor& gx);
}  // namespace ref

}  // namespace msmatch::kernels
