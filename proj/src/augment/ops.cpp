// SPDX-License-Identifier: Apache-2.0
//
// Strong-op semantics, restated range-relatively: photometric ops work per
// channel on the declared value range (threshold-style ops through an 8-bit
// proxy of that range), geometric ops share one transform across channels
// with bilinear resampling and range-min fill.

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "msmatch/augment/augment.hpp"

namespace msmatch::augment {

using data::ImageSample;
using data::ValueRange;

namespace {

void clamp_to(Tensor& t, const ValueRange& r) {
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = std::clamp(t[i], r.lo, r.hi);
}

int to_bin(double x, const ValueRange& r) {
    const double span = r.hi - r.lo;
    const int bin = static_cast<int>(std::lround((x - r.lo) / span * 255.0));
    return std::clamp(bin, 0, 255);
}

double from_bin(int bin, const ValueRange& r) {
    return r.lo + static_cast<double>(bin) / 255.0 * (r.hi - r.lo);
}

// shared bilinear sampler for the geometric ops; constant fill outside
double sample_bilinear(const Tensor& chw, int64_t c, double sy, double sx, double fill) {
    const int64_t H = chw.dim(1), W = chw.dim(2);
    const int64_t y0 = static_cast<int64_t>(std::floor(sy));
    const int64_t x0 = static_cast<int64_t>(std::floor(sx));
    const double wy = sy - static_cast<double>(y0);
    const double wx = sx - static_cast<double>(x0);
    auto at = [&](int64_t y, int64_t x) {
        return (y < 0 || y >= H || x < 0 || x >= W) ? fill : chw.at3(c, y, x);
    };
    return (1.0 - wy) * ((1.0 - wx) * at(y0, x0) + wx * at(y0, x0 + 1)) +
           wy * ((1.0 - wx) * at(y0 + 1, x0) + wx * at(y0 + 1, x0 + 1));
}

// inverse-mapped affine: src = M * (x, y, 1); one transform for all channels
Tensor affine_warp(const Tensor& chw, const std::array<double, 6>& m, double fill) {
    const int64_t C = chw.dim(0), H = chw.dim(1), W = chw.dim(2);
    Tensor out(chw.shape());
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
            const double sx = m[0] * static_cast<double>(x) + m[1] * static_cast<double>(y) + m[2];
            const double sy = m[3] * static_cast<double>(x) + m[4] * static_cast<double>(y) + m[5];
            for (int64_t c = 0; c < C; ++c)
                out.at3(c, y, x) = sample_bilinear(chw, c, sy, sx, fill);
        }
    return out;
}

Tensor op_autocontrast(const Tensor& in, const ValueRange& r) {
    const int64_t C = in.dim(0), HW = in.dim(1) * in.dim(2);
    Tensor out(in.shape());
    for (int64_t c = 0; c < C; ++c) {
        const double* src = in.data() + c * HW;
        double* dst = out.data() + c * HW;
        double mn = src[0], mx = src[0];
        for (int64_t p = 1; p < HW; ++p) {
            mn = std::min(mn, src[p]);
            mx = std::max(mx, src[p]);
        }
        if (mx - mn < 1e-12) {
            std::copy(src, src + HW, dst);
            continue;
        }
        const double scale = (r.hi - r.lo) / (mx - mn);
        for (int64_t p = 0; p < HW; ++p) dst[p] = r.lo + (src[p] - mn) * scale;
    }
    return out;
}

Tensor op_blend_gray(const Tensor& in, double v) {
    // Color: blend toward the per-pixel channel-mean replicate
    const int64_t C = in.dim(0), HW = in.dim(1) * in.dim(2);
    Tensor out(in.shape());
    for (int64_t p = 0; p < HW; ++p) {
        double gray = 0.0;
        for (int64_t c = 0; c < C; ++c) gray += in[c * HW + p];
        gray /= static_cast<double>(C);
        for (int64_t c = 0; c < C; ++c)
            out[c * HW + p] = v * in[c * HW + p] + (1.0 - v) * gray;
    }
    return out;
}

Tensor op_contrast(const Tensor& in, double v) {
    const int64_t C = in.dim(0), HW = in.dim(1) * in.dim(2);
    Tensor out(in.shape());
    for (int64_t c = 0; c < C; ++c) {
        const double* src = in.data() + c * HW;
        double* dst = out.data() + c * HW;
        double mean = 0.0;
        for (int64_t p = 0; p < HW; ++p) mean += src[p];
        mean /= static_cast<double>(HW);
        for (int64_t p = 0; p < HW; ++p) dst[p] = v * src[p] + (1.0 - v) * mean;
    }
    return out;
}

Tensor op_equalize(const Tensor& in, const ValueRange& r) {
    const int64_t C = in.dim(0), HW = in.dim(1) * in.dim(2);
    Tensor out(in.shape());
    for (int64_t c = 0; c < C; ++c) {
        const double* src = in.data() + c * HW;
        double* dst = out.data() + c * HW;
        std::array<int64_t, 256> hist{};
        for (int64_t p = 0; p < HW; ++p) hist[static_cast<size_t>(to_bin(src[p], r))]++;

        int64_t nonzero = 0, total = 0, last_nonzero = 0;
        for (int64_t h : hist)
            if (h) {
                ++nonzero;
                total += h;
                last_nonzero = h;
            }
        if (nonzero <= 1) {
            std::copy(src, src + HW, dst);
            continue;
        }
        const int64_t step = (total - last_nonzero) / 255;
        if (step == 0) {
            std::copy(src, src + HW, dst);
            continue;
        }
        std::array<int, 256> lut{};
        int64_t n = step / 2;
        for (int i = 0; i < 256; ++i) {
            lut[static_cast<size_t>(i)] =
                static_cast<int>(std::min<int64_t>(255, n / step));
            n += hist[static_cast<size_t>(i)];
        }
        for (int64_t p = 0; p < HW; ++p)
            dst[p] = from_bin(lut[static_cast<size_t>(to_bin(src[p], r))], r);
    }
    return out;
}

Tensor op_posterize(const Tensor& in, double magnitude, const ValueRange& r) {
    const int bits = static_cast<int>(std::lround(magnitude));
    if (bits >= 8) return in;  // no bits dropped
    const int mask = ~((1 << (8 - bits)) - 1) & 0xff;
    Tensor out(in.shape());
    for (int64_t i = 0; i < in.numel(); ++i)
        out[i] = from_bin(to_bin(in[i], r) & mask, r);
    return out;
}

Tensor op_sharpness(const Tensor& in, double v) {
    // blend with the 3x3 smoothing kernel [[1,1,1],[1,5,1],[1,1,1]]/13;
    // border pixels keep their original value
    const int64_t C = in.dim(0), H = in.dim(1), W = in.dim(2);
    Tensor out = in;
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 1; y + 1 < H; ++y)
            for (int64_t x = 1; x + 1 < W; ++x) {
                double s = 0.0;
                for (int64_t dy = -1; dy <= 1; ++dy)
                    for (int64_t dx = -1; dx <= 1; ++dx)
                        s += (dy == 0 && dx == 0 ? 5.0 : 1.0) * in.at3(c, y + dy, x + dx);
                s /= 13.0;
                out.at3(c, y, x) = v * in.at3(c, y, x) + (1.0 - v) * s;
            }
    return out;
}

Tensor op_solarize(const Tensor& in, double threshold, const ValueRange& r) {
    Tensor out(in.shape());
    for (int64_t i = 0; i < in.numel(); ++i) {
        const double bin = (in[i] - r.lo) / (r.hi - r.lo) * 255.0;
        out[i] = bin >= threshold ? r.lo + r.hi - in[i] : in[i];
    }
    return out;
}

}  // namespace

ImageSample apply_op(const ImageSample& img, const AugmentOp& op, double magnitude,
                     const ValueRange& range) {
    if (magnitude < op.lo || magnitude > op.hi)
        throw std::invalid_argument("apply_op: magnitude " + std::to_string(magnitude) +
                                    " outside range of " + to_string(op.name));
    const Tensor& in = img.pixels;
    const int64_t H = in.dim(1), W = in.dim(2);
    const double fill = range.lo;
    Tensor out;

    switch (op.name) {
        case OpName::AutoContrast: out = op_autocontrast(in, range); break;
        case OpName::Brightness: {
            out = in;
            for (int64_t i = 0; i < out.numel(); ++i) out[i] = magnitude * out[i];
            break;
        }
        case OpName::Color: out = op_blend_gray(in, magnitude); break;
        case OpName::Contrast: out = op_contrast(in, magnitude); break;
        case OpName::Equalize: out = op_equalize(in, range); break;
        case OpName::Posterize: out = op_posterize(in, magnitude, range); break;
        case OpName::Rotate: {
            const double rad = magnitude * 3.14159265358979323846 / 180.0;
            const double cx = static_cast<double>(W - 1) / 2.0;
            const double cy = static_cast<double>(H - 1) / 2.0;
            const double c = std::cos(rad), s = std::sin(rad);
            // inverse rotation about the image center
            out = affine_warp(in,
                              {c, s, cx - c * cx - s * cy, -s, c, cy + s * cx - c * cy},
                              fill);
            break;
        }
        case OpName::Sharpness: out = op_sharpness(in, magnitude); break;
        case OpName::ShearX:
            out = affine_warp(in, {1.0, magnitude, 0.0, 0.0, 1.0, 0.0}, fill);
            break;
        case OpName::ShearY:
            out = affine_warp(in, {1.0, 0.0, 0.0, magnitude, 1.0, 0.0}, fill);
            break;
        case OpName::Solarize: out = op_solarize(in, magnitude, range); break;
        case OpName::TranslateX:
            out = affine_warp(in, {1.0, 0.0, -magnitude * static_cast<double>(W), 0.0, 1.0, 0.0},
                              fill);
            break;
        case OpName::TranslateY:
            out = affine_warp(in, {1.0, 0.0, 0.0, 0.0, 1.0, -magnitude * static_cast<double>(H)},
                              fill);
            break;
    }

    clamp_to(out, range);
    return ImageSample{std::move(out), img.label, img.id};
}

}  // namespace msmatch::augment
