// SPDX-License-Identifier: Apache-2.0
//
// OpenMP kernels. Convolutions go through per-sample im2col + GEMM; loops
// are arranged so each output element is accumulated by exactly one thread
// in a fixed index order, which makes results independent of the thread
// count (and bit-reproducible run to run).

#include "msmatch/kernels/kernels.hpp"

#include <cmath>
#include <limits>
#include <omp.h>
#include <stdexcept>
#include <vector>

namespace msmatch::kernels::omp {

namespace {

// col layout: [Cin*kh*kw] rows by [OH*OW] columns, rows ordered (c, i, j).
void im2col(const double* x, int64_t Cin, int64_t H, int64_t W, int64_t kh, int64_t kw,
            int64_t stride, int64_t pad, int64_t OH, int64_t OW, double* col) {
    const int64_t P = OH * OW;
    for (int64_t c = 0; c < Cin; ++c)
        for (int64_t i = 0; i < kh; ++i)
            for (int64_t j = 0; j < kw; ++j) {
                double* row = col + ((c * kh + i) * kw + j) * P;
                const double* plane = x + c * H * W;
                int64_t p = 0;
                for (int64_t oy = 0; oy < OH; ++oy) {
                    const int64_t iy = oy * stride - pad + i;
                    for (int64_t ox = 0; ox < OW; ++ox, ++p) {
                        const int64_t ix = ox * stride - pad + j;
                        row[p] = (iy < 0 || iy >= H || ix < 0 || ix >= W)
                                     ? 0.0
                                     : plane[iy * W + ix];
                    }
                }
            }
}

void col2im_channel(const double* col, int64_t c, int64_t H, int64_t W, int64_t kh,
                    int64_t kw, int64_t stride, int64_t pad, int64_t OH, int64_t OW,
                    double* gx_plane) {
    const int64_t P = OH * OW;
    for (int64_t i = 0; i < kh; ++i)
        for (int64_t j = 0; j < kw; ++j) {
            const double* row = col + ((c * kh + i) * kw + j) * P;
            int64_t p = 0;
            for (int64_t oy = 0; oy < OH; ++oy) {
                const int64_t iy = oy * stride - pad + i;
                for (int64_t ox = 0; ox < OW; ++ox, ++p) {
                    const int64_t ix = ox * stride - pad + j;
                    if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                    gx_plane[iy * W + ix] += row[p];
                }
            }
        }
}

// y_n[oc, :] = bias[oc] + w[oc, :] * col_group; one sample, all channels.
void gemm_sample_forward(const double* col, const double* w, const double* bias,
                         int64_t Cout, int64_t Og, int64_t Kg, int64_t P, double* y_n) {
    for (int64_t oc = 0; oc < Cout; ++oc) {
        const int64_t grp = oc / Og;
        const double* wrow = w + oc * Kg;
        const double* colg = col + grp * Kg * P;
        double* out = y_n + oc * P;
        const double b = bias ? bias[oc] : 0.0;
        for (int64_t p = 0; p < P; ++p) out[p] = b;
        for (int64_t k = 0; k < Kg; ++k) {
            const double wv = wrow[k];
            if (wv == 0.0) continue;
            const double* cr = colg + k * P;
            for (int64_t p = 0; p < P; ++p) out[p] += wv * cr[p];
        }
    }
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& bias,
                      const ConvSpec& spec) {
    const int64_t N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t Cout = w.dim(0), Cg = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    const int64_t g = spec.groups;
    if (Cin != Cg * g) throw std::invalid_argument("conv2d: channel/group mismatch");
    const int64_t OH = conv_out_dim(H, kh, spec.stride, spec.pad);
    const int64_t OW = conv_out_dim(W, kw, spec.stride, spec.pad);
    const int64_t P = OH * OW, K = Cin * kh * kw, Kg = Cg * kh * kw, Og = Cout / g;

    Tensor y({N, Cout, OH, OW});
    const double* bptr = bias.numel() ? bias.data() : nullptr;

    if (N >= omp_get_max_threads()) {
#pragma omp parallel
        {
            std::vector<double> col(static_cast<size_t>(K * P));
#pragma omp for schedule(static)
            for (int64_t n = 0; n < N; ++n) {
                im2col(x.data() + n * Cin * H * W, Cin, H, W, kh, kw, spec.stride,
                       spec.pad, OH, OW, col.data());
                gemm_sample_forward(col.data(), w.data(), bptr, Cout, Og, Kg, P,
                                    y.data() + n * Cout * P);
            }
        }
    } else {
        std::vector<double> col(static_cast<size_t>(K * P));
        for (int64_t n = 0; n < N; ++n) {
            im2col(x.data() + n * Cin * H * W, Cin, H, W, kh, kw, spec.stride, spec.pad,
                   OH, OW, col.data());
            double* y_n = y.data() + n * Cout * P;
#pragma omp parallel for schedule(static)
            for (int64_t oc = 0; oc < Cout; ++oc) {
                const int64_t grp = oc / Og;
                const double* wrow = w.data() + oc * Kg;
                const double* colg = col.data() + grp * Kg * P;
                double* out = y_n + oc * P;
                const double b = bptr ? bptr[oc] : 0.0;
                for (int64_t p = 0; p < P; ++p) out[p] = b;
                for (int64_t k = 0; k < Kg; ++k) {
                    const double wv = wrow[k];
                    if (wv == 0.0) continue;
                    const double* cr = colg + k * P;
                    for (int64_t p = 0; p < P; ++p) out[p] += wv * cr[p];
                }
            }
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
    const int64_t P = OH * OW, K = Cin * kh * kw, Kg = Cg * kh * kw;

#pragma omp parallel
    {
        std::vector<double> dcol(static_cast<size_t>(K * P));
#pragma omp for schedule(static)
        for (int64_t n = 0; n < N; ++n) {
            std::fill(dcol.begin(), dcol.end(), 0.0);
            const double* gy_n = gy.data() + n * Cout * P;
            // dcol = W^T * gy, per group
            for (int64_t oc = 0; oc < Cout; ++oc) {
                const int64_t grp = oc / Og;
                const double* wrow = w.data() + oc * Kg;
                const double* grow = gy_n + oc * P;
                double* dcolg = dcol.data() + grp * Kg * P;
                for (int64_t k = 0; k < Kg; ++k) {
                    const double wv = wrow[k];
                    if (wv == 0.0) continue;
                    double* dr = dcolg + k * P;
                    for (int64_t p = 0; p < P; ++p) dr[p] += wv * grow[p];
                }
            }
            double* gx_n = gx.data() + n * Cin * H * W;
            for (int64_t c = 0; c < Cin; ++c)
                col2im_channel(dcol.data(), c, H, W, kh, kw, spec.stride, spec.pad, OH,
                               OW, gx_n + c * H * W);
        }
    }
}

void conv2d_backward_weights(const Tensor& gy, const Tensor& x, const ConvSpec& spec,
                             Tensor& gw, Tensor& gb) {
    const int64_t N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t Cout = gw.dim(0), Cg = gw.dim(1), kh = gw.dim(2), kw = gw.dim(3);
    const int64_t g = spec.groups, Og = Cout / g;
    const int64_t OH = gy.dim(2), OW = gy.dim(3);
    const int64_t P = OH * OW, K = Cin * kh * kw, Kg = Cg * kh * kw;

    const int64_t block = std::min<int64_t>(N, 16);
    std::vector<double> cols(static_cast<size_t>(block * K * P));

    for (int64_t n0 = 0; n0 < N; n0 += block) {
        const int64_t nb = std::min(block, N - n0);
#pragma omp parallel for schedule(static)
        for (int64_t b = 0; b < nb; ++b)
            im2col(x.data() + (n0 + b) * Cin * H * W, Cin, H, W, kh, kw, spec.stride,
                   spec.pad, OH, OW, cols.data() + b * K * P);

#pragma omp parallel for schedule(static)
        for (int64_t oc = 0; oc < Cout; ++oc) {
            const int64_t grp = oc / Og;
            double* gwrow = gw.data() + oc * Kg;
            double gbacc = 0.0;
            for (int64_t b = 0; b < nb; ++b) {
                const double* grow = gy.data() + ((n0 + b) * Cout + oc) * P;
                const double* colg = cols.data() + b * K * P + grp * Kg * P;
                for (int64_t k = 0; k < Kg; ++k) {
                    const double* cr = colg + k * P;
                    double acc = 0.0;
                    for (int64_t p = 0; p < P; ++p) acc += grow[p] * cr[p];
                    gwrow[k] += acc;
                }
                if (gb.numel()) {
                    double s = 0.0;
                    for (int64_t p = 0; p < P; ++p) s += grow[p];
                    gbacc += s;
                }
            }
            if (gb.numel()) gb[oc] += gbacc;
        }
    }
}

Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& bias) {
    const int64_t N = x.dim(0), IN = x.dim(1), OUT = w.dim(0);
    Tensor y({N, OUT});
    const double* bptr = bias.numel() ? bias.data() : nullptr;
#pragma omp parallel for schedule(static) collapse(2)
    for (int64_t n = 0; n < N; ++n)
        for (int64_t o = 0; o < OUT; ++o) {
            const double* xr = x.data() + n * IN;
            const double* wr = w.data() + o * IN;
            double acc = bptr ? bptr[o] : 0.0;
            for (int64_t i = 0; i < IN; ++i) acc += xr[i] * wr[i];
            y.at2(n, o) = acc;
        }
    return y;
}

void linear_backward_input(const Tensor& gy, const Tensor& w, Tensor& gx) {
    const int64_t N = gx.dim(0), IN = gx.dim(1), OUT = w.dim(0);
#pragma omp parallel for schedule(static)
    for (int64_t n = 0; n < N; ++n) {
        double* gxr = gx.data() + n * IN;
        for (int64_t o = 0; o < OUT; ++o) {
            const double gv = gy.at2(n, o);
            if (gv == 0.0) continue;
            const double* wr = w.data() + o * IN;
            for (int64_t i = 0; i < IN; ++i) gxr[i] += gv * wr[i];
        }
    }
}

void linear_backward_weights(const Tensor& gy, const Tensor& x, Tensor& gw, Tensor& gb) {
    const int64_t N = x.dim(0), IN = x.dim(1), OUT = gw.dim(0);
#pragma omp parallel for schedule(static)
    for (int64_t o = 0; o < OUT; ++o) {
        double* gwr = gw.data() + o * IN;
        double gbacc = 0.0;
        for (int64_t n = 0; n < N; ++n) {
            const double gv = gy.at2(n, o);
            gbacc += gv;
            if (gv == 0.0) continue;
            const double* xr = x.data() + n * IN;
            for (int64_t i = 0; i < IN; ++i) gwr[i] += gv * xr[i];
        }
        if (gb.numel()) gb[o] += gbacc;
    }
}

void batchnorm_stats(const Tensor& x, Tensor& mean, Tensor& var) {
    const int64_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    const double count = static_cast<double>(N * HW);
#pragma omp parallel for schedule(static)
    for (int64_t c = 0; c < C; ++c) {
        double s = 0.0;
        for (int64_t n = 0; n < N; ++n) {
            const double* plane = x.data() + (n * C + c) * HW;
            for (int64_t p = 0; p < HW; ++p) s += plane[p];
        }
        const double m = s / count;
        double v = 0.0;
        for (int64_t n = 0; n < N; ++n) {
            const double* plane = x.data() + (n * C + c) * HW;
            for (int64_t p = 0; p < HW; ++p) {
                const double d = plane[p] - m;
                v += d * d;
            }
        }
        mean[c] = m;
        var[c] = v / count;
    }
}

Tensor batchnorm_forward(const Tensor& x, const Tensor& mean, const Tensor& invstd,
                         const Tensor& gamma, const Tensor& beta) {
    const int64_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    Tensor y(x.shape());
#pragma omp parallel for schedule(static) collapse(2)
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double* in = x.data() + (n * C + c) * HW;
            double* out = y.data() + (n * C + c) * HW;
            const double a = gamma[c] * invstd[c];
            const double b = beta[c] - a * mean[c];
            for (int64_t p = 0; p < HW; ++p) out[p] = a * in[p] + b;
        }
    return y;
}

void batchnorm_backward(const Tensor& gy, const Tensor& x, const Tensor& mean,
                        const Tensor& invstd, const Tensor& gamma,
                        Tensor& gx, Tensor& dgamma, Tensor& dbeta) {
    const int64_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    const double count = static_cast<double>(N * HW);
#pragma omp parallel for schedule(static)
    for (int64_t c = 0; c < C; ++c) {
        double sum_gy = 0.0, sum_gy_xhat = 0.0;
        for (int64_t n = 0; n < N; ++n) {
            const double* gyp = gy.data() + (n * C + c) * HW;
            const double* xp = x.data() + (n * C + c) * HW;
            for (int64_t p = 0; p < HW; ++p) {
                sum_gy += gyp[p];
                sum_gy_xhat += gyp[p] * (xp[p] - mean[c]) * invstd[c];
            }
        }
        dgamma[c] += sum_gy_xhat;
        dbeta[c] += sum_gy;
        const double a = gamma[c] * invstd[c];
        for (int64_t n = 0; n < N; ++n) {
            const double* gyp = gy.data() + (n * C + c) * HW;
            const double* xp = x.data() + (n * C + c) * HW;
            double* gxp = gx.data() + (n * C + c) * HW;
            for (int64_t p = 0; p < HW; ++p) {
                const double xhat = (xp[p] - mean[c]) * invstd[c];
                gxp[p] += a * (gyp[p] - sum_gy / count - xhat * sum_gy_xhat / count);
            }
        }
    }
}

Tensor maxpool2d_forward(const Tensor& x, int64_t k, int64_t stride,
                         std::vector<int32_t>& argmax) {
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t OH = (H - k) / stride + 1, OW = (W - k) / stride + 1;
    Tensor y({N, C, OH, OW});
    argmax.assign(static_cast<size_t>(N * C * OH * OW), 0);
#pragma omp parallel for schedule(static) collapse(2)
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double* plane = x.data() + (n * C + c) * H * W;
            double* out = y.data() + (n * C + c) * OH * OW;
            int32_t* am = argmax.data() + (n * C + c) * OH * OW;
            for (int64_t oy = 0; oy < OH; ++oy)
                for (int64_t ox = 0; ox < OW; ++ox) {
                    double best = -std::numeric_limits<double>::infinity();
                    int32_t best_at = 0;
                    for (int64_t i = 0; i < k; ++i)
                        for (int64_t j = 0; j < k; ++j) {
                            const int64_t iy = oy * stride + i, ix = ox * stride + j;
                            const double v = plane[iy * W + ix];
                            if (v > best) {
                                best = v;
                                best_at = static_cast<int32_t>(iy * W + ix);
                            }
                        }
                    out[oy * OW + ox] = best;
                    am[oy * OW + ox] = best_at;
                }
        }
    return y;
}

void maxpool2d_backward(const Tensor& gy, const std::vector<int32_t>& argmax, Tensor& gx) {
    const int64_t N = gy.dim(0), C = gy.dim(1), OP = gy.dim(2) * gy.dim(3);
    const int64_t HW = gx.dim(2) * gx.dim(3);
#pragma omp parallel for schedule(static) collapse(2)
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double* gyp = gy.data() + (n * C + c) * OP;
            const int32_t* am = argmax.data() + (n * C + c) * OP;
            double* gxp = gx.data() + (n * C + c) * HW;
            for (int64_t p = 0; p < OP; ++p) gxp[am[p]] += gyp[p];
        }
}

Tensor global_avg_pool_forward(const Tensor& x) {
    const int64_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    Tensor y({N, C});
#pragma omp parallel for schedule(static) collapse(2)
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double* plane = x.data() + (n * C + c) * HW;
            double s = 0.0;
            for (int64_t p = 0; p < HW; ++p) s += plane[p];
            y.at2(n, c) = s / static_cast<double>(HW);
        }
    return y;
}

void global_avg_pool_backward(const Tensor& gy, int64_t H, int64_t W, Tensor& gx) {
    const int64_t N = gy.dim(0), C = gy.dim(1), HW = H * W;
    const double scale = 1.0 / static_cast<double>(HW);
#pragma omp parallel for schedule(static) collapse(2)
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double g = gy.at2(n, c) * scale;
            double* gxp = gx.data() + (n * C + c) * HW;
            for (int64_t p = 0; p < HW; ++p) gxp[p] += g;
        }
}

}  // namespace msmatch::kernels::omp
