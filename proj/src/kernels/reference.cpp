// SPDX-License-Identifier: Apache-2.0
//
// Naive serial kernels. These spell out the arithmetic definition of each
// operation with no layout tricks; the OpenMP kernels are validated against
// them and the benchmark measures the gap.

#include "msmatch/kernels/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace msmatch::kernels {

int64_t conv_out_dim(int64_t in, int64_t k, int64_t stride, int64_t pad) {
    return (in + 2 * pad - k) / stride + 1;
}

namespace ref {

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& bias,
                      const ConvSpec& spec) {
    const int64_t N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t Cout = w.dim(0), Cg = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    const int64_t g = spec.groups;
    if (Cin != Cg * g) throw std::invalid_argument("conv2d: channel/group mismatch");
    const int64_t OH = conv_out_dim(H, kh, spec.stride, spec.pad);
    const int64_t OW = conv_out_dim(W, kw, spec.stride, spec.pad);
    const int64_t Og = Cout / g;

    Tensor y({N, Cout, OH, OW});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t oc = 0; oc < Cout; ++oc) {
            const int64_t grp = oc / Og;
            for (int64_t oy = 0; oy < OH; ++oy)
                for (int64_t ox = 0; ox < OW; ++ox) {
                    double acc = bias.numel() ? bias[oc] : 0.0;
                    for (int64_t ic = 0; ic < Cg; ++ic)
                        for (int64_t i = 0; i < kh; ++i)
                            for (int64_t j = 0; j < kw; ++j) {
                                const int64_t iy = oy * spec.stride - spec.pad + i;
                                const int64_t ix = ox * spec.stride - spec.pad + j;
                                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                                acc += w.at4(oc, ic, i, j) *
                                       x.at4(n, grp * Cg + ic, iy, ix);
                            }
                    y.at4(n, oc, oy, ox) = acc;
                }
        }
    return y;
}

void conv2d_backward_input(const Tensor& gy, const Tensor& w, const ConvSpec& spec,
                           Tensor& gx) {
    const int64_t N = gx.dim(0), Cin = gx.dim(1), H = gx.dim(2), W = gx.dim(3);
    const int64_t Cout = w.dim(0), Cg = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    const int64_t g = spec.groups, Og = Cout / g;
    const int64_t OH = gy.dim(2), OW = gy.dim(3);
    (void)Cin;

    for (int64_t n = 0; n < N; ++n)
        for (int64_t oc = 0; oc < Cout; ++oc) {
            const int64_t grp = oc / Og;
            for (int64_t oy = 0; oy < OH; ++oy)
                for (int64_t ox = 0; ox < OW; ++ox) {
                    const double g0 = gy.at4(n, oc, oy, ox);
                    for (int64_t ic = 0; ic < Cg; ++ic)
                        for (int64_t i = 0; i < kh; ++i)
                            for (int64_t j = 0; j < kw; ++j) {
                                const int64_t iy = oy * spec.stride - spec.pad + i;
                                const int64_t ix = ox * spec.stride - spec.pad + j;
                                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                                gx.at4(n, grp * Cg + ic, iy, ix) +=
                                    g0 * w.at4(oc, ic, i, j);
                            }
                }
        }
}

void conv2d_backward_weights(const Tensor& gy, const Tensor& x, const ConvSpec& spec,
                             Tensor& gw, Tensor& gb) {
    const int64_t N = x.dim(0), H = x.dim(2), W = x.dim(3);
    const int64_t Cout = gw.dim(0), Cg = gw.dim(1), kh = gw.dim(2), kw = gw.dim(3);
    const int64_t g = spec.groups, Og = Cout / g;
    const int64_t OH = gy.dim(2), OW = gy.dim(3);

    for (int64_t n = 0; n < N; ++n)
        for (int64_t oc = 0; oc < Cout; ++oc) {
            const int64_t grp = oc / Og;
            for (int64_t oy = 0; oy < OH; ++oy)
                for (int64_t ox = 0; ox < OW; ++ox) {
                    const double g0 = gy.at4(n, oc, oy, ox);
                    if (gb.numel()) gb[oc] += g0;
                    for (int64_t ic = 0; ic < Cg; ++ic)
                        for (int64_t i = 0; i < kh; ++i)
                            for (int64_t j = 0; j < kw; ++j) {
                                const int64_t iy = oy * spec.stride - spec.pad + i;
                                const int64_t ix = ox * spec.stride - spec.pad + j;
                                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                                gw.at4(oc, ic, i, j) +=
                                    g0 * x.at4(n, grp * Cg + ic, iy, ix);
                            }
                }
        }
}

Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& bias) {
    const int64_t N = x.dim(0), IN = x.dim(1), OUT = w.dim(0);
    Tensor y({N, OUT});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t o = 0; o < OUT; ++o) {
            double acc = bias.numel() ? bias[o] : 0.0;
            for (int64_t i = 0; i < IN; ++i) acc += x.at2(n, i) * w.at2(o, i);
            y.at2(n, o) = acc;
        }
    return y;
}

void linear_backward_input(const Tensor& gy, const Tensor& w, Tensor& gx) {
    const int64_t N = gx.dim(0), IN = gx.dim(1), OUT = w.dim(0);
    for (int64_t n = 0; n < N; ++n)
        for (int64_t i = 0; i < IN; ++i) {
            double acc = 0.0;
            for (int64_t o = 0; o < OUT; ++o) acc += gy.at2(n, o) * w.at2(o, i);
            gx.at2(n, i) += acc;
        }
}

void linear_backward_weights(const Tensor& gy, const Tensor& x, Tensor& gw, Tensor& gb) {
    const int64_t N = x.dim(0), IN = x.dim(1), OUT = gw.dim(0);
    for (int64_t o = 0; o < OUT; ++o) {
        for (int64_t i = 0; i < IN; ++i) {
            double acc = 0.0;
            for (int64_t n = 0; n < N; ++n) acc += gy.at2(n, o) * x.at2(n, i);
            gw.at2(o, i) += acc;
        }
        if (gb.numel()) {
            double acc = 0.0;
            for (int64_t n = 0; n < N; ++n) acc += gy.at2(n, o);
            gb[o] += acc;
        }
    }
}

void batchnorm_stats(const Tensor& x, Tensor& mean, Tensor& var) {
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const double count = static_cast<double>(N * H * W);
    for (int64_t c = 0; c < C; ++c) {
        double s = 0.0;
        for (int64_t n = 0; n < N; ++n)
            for (int64_t y = 0; y < H; ++y)
                for (int64_t xx = 0; xx < W; ++xx) s += x.at4(n, c, y, xx);
        const double m = s / count;
        double v = 0.0;
        for (int64_t n = 0; n < N; ++n)
            for (int64_t y = 0; y < H; ++y)
                for (int64_t xx = 0; xx < W; ++xx) {
                    const double d = x.at4(n, c, y, xx) - m;
                    v += d * d;
                }
        mean[c] = m;
        var[c] = v / count;
    }
}

Tensor batchnorm_forward(const Tensor& x, const Tensor& mean, const Tensor& invstd,
                         const Tensor& gamma, const Tensor& beta) {
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor y(x.shape());
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t yy = 0; yy < H; ++yy)
                for (int64_t xx = 0; xx < W; ++xx)
                    y.at4(n, c, yy, xx) =
                        gamma[c] * (x.at4(n, c, yy, xx) - mean[c]) * invstd[c] + beta[c];
    return y;
}

void batchnorm_backward(const Tensor& gy, const Tensor& x, const Tensor& mean,
                        const Tensor& invstd, const Tensor& gamma,
                        Tensor& gx, Tensor& dgamma, Tensor& dbeta) {
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const double count = static_cast<double>(N * H * W);
    for (int64_t c = 0; c < C; ++c) {
        double sum_gy = 0.0, sum_gy_xhat = 0.0;
        for (int64_t n = 0; n < N; ++n)
            for (int64_t yy = 0; yy < H; ++yy)
                for (int64_t xx = 0; xx < W; ++xx) {
                    const double xhat = (x.at4(n, c, yy, xx) - mean[c]) * invstd[c];
                    sum_gy += gy.at4(n, c, yy, xx);
                    sum_gy_xhat += gy.at4(n, c, yy, xx) * xhat;
                }
        dgamma[c] += sum_gy_xhat;
        dbeta[c] += sum_gy;
        for (int64_t n = 0; n < N; ++n)
            for (int64_t yy = 0; yy < H; ++yy)
                for (int64_t xx = 0; xx < W; ++xx) {
                    const double xhat = (x.at4(n, c, yy, xx) - mean[c]) * invstd[c];
                    gx.at4(n, c, yy, xx) +=
                        gamma[c] * invstd[c] *
                        (gy.at4(n, c, yy, xx) - sum_gy / count - xhat * sum_gy_xhat / count);
                }
    }
}

Tensor maxpool2d_forward(const Tensor& x, int64_t k, int64_t stride,
                         std::vector<int32_t>& argmax) {
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t OH = (H - k) / stride + 1, OW = (W - k) / stride + 1;
    Tensor y({N, C, OH, OW});
    argmax.assign(static_cast<size_t>(N * C * OH * OW), 0);
    int64_t idx = 0;
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t oy = 0; oy < OH; ++oy)
                for (int64_t ox = 0; ox < OW; ++ox, ++idx) {
                    double best = -std::numeric_limits<double>::infinity();
                    int32_t best_at = 0;
                    for (int64_t i = 0; i < k; ++i)
                        for (int64_t j = 0; j < k; ++j) {
                            const int64_t iy = oy * stride + i, ix = ox * stride + j;
                            const double v = x.at4(n, c, iy, ix);
                            if (v > best) {
                                best = v;
                                best_at = static_cast<int32_t>(iy * W + ix);
                            }
                        }
                    y.at4(n, c, oy, ox) = best;
                    argmax[static_cast<size_t>(idx)] = best_at;
                }
    return y;
}

void maxpool2d_backward(const Tensor& gy, const std::vector<int32_t>& argmax, Tensor& gx) {
    const int64_t N = gy.dim(0), C = gy.dim(1), OH = gy.dim(2), OW = gy.dim(3);
    const int64_t HW = gx.dim(2) * gx.dim(3);
    int64_t idx = 0;
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t oy = 0; oy < OH; ++oy)
                for (int64_t ox = 0; ox < OW; ++ox, ++idx)
                    gx[(n * C + c) * HW + argmax[static_cast<size_t>(idx)]] +=
                        gy.at4(n, c, oy, ox);
}

Tensor global_avg_pool_forward(const Tensor& x) {
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor y({N, C});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            double s = 0.0;
            for (int64_t yy = 0; yy < H; ++yy)
                for (int64_t xx = 0; xx < W; ++xx) s += x.at4(n, c, yy, xx);
            y.at2(n, c) = s / static_cast<double>(H * W);
        }
    return y;
}

void global_avg_pool_backward(const Tensor& gy, int64_t H, int64_t W, Tensor& gx) {
    const int64_t N = gy.dim(0), C = gy.dim(1);
    const double scale = 1.0 / static_cast<double>(H * W);
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double g = gy.at2(n, c) * scale;
            for (int64_t yy = 0; yy < H; ++yy)
                for (int64_t xx = 0; xx < W; ++xx) gx.at4(n, c, yy, xx) += g;
        }
}

}  // namespace ref
}  // namespace msmatch::kernels
