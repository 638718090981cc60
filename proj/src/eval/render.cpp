// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "msmatch/eval/metrics.hpp"

namespace msmatch::eval {

namespace {
cv::Scalar heat_color(double v) {  // 0..100 -> white..deep blue
    const double t = std::clamp(v / 100.0, 0.0, 1.0);
    return cv::Scalar(255.0, 255.0 - 157.0 * t, 255.0 - 210.0 * t);  // BGR
}
}  // namespace

void write_confusion_heatmap(const MetricsReport& r, const std::string& png_path) {
    const int k = static_cast<int>(r.num_classes());
    const int cell = 56, margin_left = 170, margin_top = 30, margin_bottom = 120;
    const int wpx = margin_left + k * cell + 20;
    const int hpx = margin_top + k * cell + margin_bottom;
    cv::Mat img(hpx, wpx, CV_8UC3, cv::Scalar(255, 255, 255));

    for (int y = 0; y < k; ++y)
        for (int x = 0; x < k; ++x) {
            const double v = r.confusion[static_cast<size_t>(y)][static_cast<size_t>(x)];
            cv::Rect rect(margin_left + x * cell, margin_top + y * cell, cell, cell);
            cv::rectangle(img, rect, heat_color(v), cv::FILLED);
            cv::rectangle(img, rect, cv::Scalar(190, 190, 190), 1);
            if (v != 0.0) {  // zero cells are not shown
                char buf[16];
                std::snprintf(buf, sizeof buf, v >= 99.95 ? "%.0f" : "%.1f", v);
                const auto color =
                    v > 55.0 ? cv::Scalar(255, 255, 255) : cv::Scalar(30, 30, 30);
                cv::putText(img, buf, {rect.x + 6, rect.y + cell / 2 + 5},
                            cv::FONT_HERSHEY_SIMPLEX, 0.42, color, 1, cv::LINE_AA);
            }
        }

    for (int y = 0; y < k; ++y)
        cv::putText(img, r.class_names[static_cast<size_t>(y)].substr(0, 18),
                    {4, margin_top + y * cell + cell / 2 + 4}, cv::FONT_HERSHEY_SIMPLEX,
                    0.38, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    for (int x = 0; x < k; ++x) {
        // column labels, drawn vertically under the grid
        const std::string name = r.class_names[static_cast<size_t>(x)].substr(0, 18);
        for (size_t i = 0; i < name.size(); ++i)
            cv::putText(img, std::string(1, name[i]),
                        {margin_left + x * cell + cell / 2 - 4,
                         margin_top + k * cell + 14 + static_cast<int>(i) * 11},
                        cv::FONT_HERSHEY_SIMPLEX, 0.32, cv::Scalar(0, 0, 0), 1,
                        cv::LINE_AA);
    }
    cv::imwrite(png_path, img);
}

void write_f1_budget_plot(const F1Table& t, const std::string& png_path) {
    const int wpx = 720, hpx = 480, ml = 60, mr = 170, mt = 20, mb = 50;
    const int pw = wpx - ml - mr, ph = hpx - mt - mb;
    cv::Mat img(hpx, wpx, CV_8UC3, cv::Scalar(255, 255, 255));

    cv::rectangle(img, {ml, mt, pw, ph}, cv::Scalar(120, 120, 120), 1);
    for (int g = 0; g <= 10; g += 2) {
        const int y = mt + ph - g * ph / 10;
        cv::line(img, {ml, y}, {ml + pw, y}, cv::Scalar(230, 230, 230), 1);
        cv::putText(img, std::to_string(g * 10), {ml - 34, y + 4},
                    cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    }

    const size_t nb = t.budgets.size();
    auto x_of = [&](size_t i) {
        return nb == 1 ? ml + pw / 2
                       : ml + static_cast<int>(i * static_cast<size_t>(pw) / (nb - 1));
    };
    for (size_t i = 0; i < nb; ++i)
        cv::putText(img, std::to_string(t.budgets[i]), {x_of(i) - 10, mt + ph + 20},
                    cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);

    for (size_t c = 0; c < t.class_names.size(); ++c) {
        const double hue = 180.0 * static_cast<double>(c) /
                           std::max<size_t>(1, t.class_names.size());
        cv::Mat hsv(1, 1, CV_8UC3, cv::Scalar(hue, 200, 200)), bgr;
        cv::cvtColor(hsv, bgr, cv::COLOR_HSV2BGR);
        const auto color = cv::Scalar(bgr.at<cv::Vec3b>(0, 0)[0], bgr.at<cv::Vec3b>(0, 0)[1],
                                      bgr.at<cv::Vec3b>(0, 0)[2]);
        for (size_t i = 0; i + 1 < nb; ++i) {
            const int y0 = mt + ph - static_cast<int>(t.f1[c][i] / 100.0 * ph);
            const int y1 = mt + ph - static_cast<int>(t.f1[c][i + 1] / 100.0 * ph);
            cv::line(img, {x_of(i), y0}, {x_of(i + 1), y1}, color, 2, cv::LINE_AA);
        }
        for (size_t i = 0; i < nb; ++i) {
            const int y0 = mt + ph - static_cast<int>(t.f1[c][i] / 100.0 * ph);
            cv::circle(img, {x_of(i), y0}, 3, color, cv::FILLED, cv::LINE_AA);
        }
        cv::putText(img, t.class_names[c].substr(0, 20),
                    {ml + pw + 8, mt + 14 + static_cast<int>(c) * 16},
                    cv::FONT_HERSHEY_SIMPLEX, 0.4, color, 1, cv::LINE_AA);
    }
    cv::putText(img, "labels per class", {ml + pw / 2 - 50, hpx - 10},
                cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    cv::imwrite(png_path, img);
}

}  // namespace msmatch::eval
