// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <filesystem>
#include <stdexcept>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "msmatch/data/dataset.hpp"

namespace msmatch::data {

namespace fs = std::filesystem;

namespace {

ValueRange range_for_depth(int depth) {
    switch (depth) {
        case CV_8U: return {0.0, 255.0};
        case CV_8S: return {-128.0, 127.0};
        case CV_16U: return {0.0, 65535.0};
        case CV_16S: return {-32768.0, 32767.0};
        case CV_32S: return {0.0, 2147483647.0};
        default: return {0.0, 1.0};  // float rasters
    }
}

// append the channels of one page into a CHW tensor at channel offset
void page_to_chw(const cv::Mat& page, Tensor& chw, int64_t offset) {
    cv::Mat as_double;
    page.convertTo(as_double, CV_64F);
    const int64_t pc = as_double.channels();
    const int64_t H = as_double.rows, W = as_double.cols;
    for (int64_t y = 0; y < H; ++y) {
        const double* row = as_double.ptr<double>(static_cast<int>(y));
        for (int64_t x = 0; x < W; ++x)
            for (int64_t c = 0; c < pc; ++c)
                chw.at3(offset + c, y, x) = row[x * pc + c];
    }
}

struct Decoded {
    Tensor chw;
    int depth = -1;
};

Decoded decode_rgb(const fs::path& file) {
    cv::Mat img = cv::imread(file.string(), cv::IMREAD_COLOR);
    if (img.empty()) throw std::runtime_error("cannot decode image: " + file.string());
    Decoded d;
    d.depth = img.depth();
    d.chw = Tensor({3, img.rows, img.cols});
    // OpenCV loads BGR; store as RGB planes
    for (int64_t y = 0; y < img.rows; ++y) {
        const unsigned char* row = img.ptr<unsigned char>(static_cast<int>(y));
        for (int64_t x = 0; x < img.cols; ++x) {
            d.chw.at3(0, y, x) = row[x * 3 + 2];
            d.chw.at3(1, y, x) = row[x * 3 + 1];
            d.chw.at3(2, y, x) = row[x * 3 + 0];
        }
    }
    return d;
}

Decoded decode_raster(const fs::path& file) {
    std::vector<cv::Mat> pages;
    if (!cv::imreadmulti(file.string(), pages, cv::IMREAD_UNCHANGED) || pages.empty()) {
        cv::Mat single = cv::imread(file.string(), cv::IMREAD_UNCHANGED);
        if (single.empty())
            throw std::runtime_error("cannot decode raster: " + file.string());
        pages.push_back(single);
    }
    int64_t bands = 0;
    for (const auto& p : pages) bands += p.channels();
    const int64_t H = pages.front().rows, W = pages.front().cols;
    Decoded d;
    d.depth = pages.front().depth();
    d.chw = Tensor({bands, H, W});
    int64_t offset = 0;
    for (const auto& p : pages) {
        if (p.rows != H || p.cols != W)
            throw std::runtime_error("raster pages disagree in size: " + file.string());
        page_to_chw(p, d.chw, offset);
        offset += p.channels();
    }
    return d;
}

}  // namespace

LabeledDataset load_folder_dataset(const fs::path& root, FolderFormat format,
                                   std::optional<int64_t> resize_to) {
    if (!fs::is_directory(root))
        throw std::runtime_error("dataset root is not a directory: " + root.string());

    std::vector<fs::path> class_dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) class_dirs.push_back(e.path());
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty())
        throw std::runtime_error("no class directories under " + root.string());

    LabeledDataset ds;
    struct Job {
        fs::path file;
        int64_t label;
        std::string id;
    };
    std::vector<Job> jobs;
    for (size_t c = 0; c < class_dirs.size(); ++c) {
        ds.class_names.push_back(class_dirs[c].filename().string());
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(class_dirs[c]))
            if (e.is_regular_file()) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        if (files.empty())
            throw std::runtime_error("class directory is empty: " + class_dirs[c].string());
        for (const auto& f : files)
            jobs.push_back({f, static_cast<int64_t>(c),
                            ds.class_names.back() + "/" + f.filename().string()});
    }

    std::vector<ImageSample> samples(jobs.size());
    std::vector<int> depths(jobs.size(), -1);
    std::vector<std::string> errors(jobs.size());

    // parallel decode, deterministic merge by job index
#pragma omp parallel for schedule(dynamic)
    for (int64_t i = 0; i < static_cast<int64_t>(jobs.size()); ++i) {
        const Job& job = jobs[static_cast<size_t>(i)];
        try {
            Decoded dec = format == FolderFormat::rgb_image ? decode_rgb(job.file)
                                                            : decode_raster(job.file);
            if (resize_to)
                dec.chw = resize_bilinear(dec.chw, *resize_to, *resize_to);
            samples[static_cast<size_t>(i)] =
                ImageSample{std::move(dec.chw), job.label, job.id};
            depths[static_cast<size_t>(i)] = dec.depth;
        } catch (const std::exception& e) {
            errors[static_cast<size_t>(i)] = e.what();
        }
    }
    for (const auto& err : errors)
        if (!err.empty()) throw std::runtime_error(err);

    const int64_t bands = samples.front().pixels.dim(0);
    for (size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].pixels.dim(0) != bands)
            throw std::runtime_error("band count mismatch in " + jobs[i].file.string() +
                                     ": got " + std::to_string(samples[i].pixels.dim(0)) +
                                     ", expected " + std::to_string(bands));
        if (depths[i] != depths[0])
            throw std::runtime_error("pixel depth mismatch in " + jobs[i].file.string());
    }

    ds.samples = std::move(samples);
    ds.channels = bands;
    ds.value_range = format == FolderFormat::rgb_image ? ValueRange{0.0, 255.0}
                                                       : range_for_depth(depths[0]);
    ds.validate();
    return ds;
}

}  // namespace msmatch::data
