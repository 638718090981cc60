// SPDX-License-Identifier: Apache-2.0

#include "msmatch/saliency/guided.hpp"

#include <cmath>
#include <stdexcept>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "msmatch/io/io.hpp"
#include "msmatch/nn/nn.hpp"

namespace msmatch::saliency {

SaliencyMap guided_backprop(model::Classifier& model, const data::ImageSample& sample,
                            int64_t target) {
    if (target < 0 || target >= model.config().num_classes)
        throw std::invalid_argument("guided_backprop: target class " +
                                    std::to_string(target) + " out of range");

    const int64_t C = sample.channels(), H = sample.height(), W = sample.width();
    Tensor batch({1, C, H, W});
    std::copy(sample.pixels.data(), sample.pixels.data() + sample.pixels.numel(),
              batch.data());

    nn::RunCtx ctx;  // evaluation mode, gradient taping on
    ctx.training = false;
    ctx.grad = true;
    Tensor logits = model.forward(batch, ctx);

    Tensor gy(logits.shape());
    gy.fill(0.0);
    gy.at2(0, target) = 1.0;

    nn::set_guided_backprop(true);
    Tensor gx;
    try {
        gx = model.backward(gy);
    } catch (...) {
        nn::set_guided_backprop(false);
        throw;
    }
    nn::set_guided_backprop(false);
    model.zero_grad();  // parameter grads from the attribution pass are discarded

    SaliencyMap map;
    map.values = Tensor({C, H, W});
    std::copy(gx.data(), gx.data() + gx.numel(), map.values.data());
    for (int64_t i = 0; i < map.values.numel(); ++i)
        if (!std::isfinite(map.values[i]))
            throw std::runtime_error("guided_backprop: non-finite map value");
    map.sample_id = sample.id;
    map.target_class = target;
    return map;
}

void write_saliency_png(const SaliencyMap& map, const std::filesystem::path& path) {
    const int64_t C = map.values.dim(0), H = map.values.dim(1), W = map.values.dim(2);
    double peak = 0.0;
    for (int64_t i = 0; i < map.values.numel(); ++i)
        peak = std::max(peak, std::abs(map.values[i]));
    if (peak == 0.0) peak = 1.0;

    cv::Mat img(static_cast<int>(H), static_cast<int>(W), CV_8UC3);
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
            auto& px = img.at<cv::Vec3b>(static_cast<int>(y), static_cast<int>(x));
            if (C == 3) {
                for (int64_t c = 0; c < 3; ++c)
                    px[static_cast<int>(2 - c)] = static_cast<unsigned char>(
                        255.0 * std::abs(map.values.at3(c, y, x)) / peak);
            } else {
                double m = 0.0;  // channel-max magnitude
                for (int64_t c = 0; c < C; ++c)
                    m = std::max(m, std::abs(map.values.at3(c, y, x)));
                const auto v = static_cast<unsigned char>(255.0 * m / peak);
                px = {v, v, v};
            }
        }
    cv::imwrite(path.string(), img);
}

void write_saliency_npy(const SaliencyMap& map, const std::filesystem::path& path) {
    io::save_npy(path, map.values);
}

}  // namespace msmatch::saliency
