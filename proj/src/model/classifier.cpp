// SPDX-License-Identifier: Apache-2.0

#include "msmatch/model/classifier.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace msmatch::model {

using nn::BufferT;
using nn::Param;

Variant variant_from_string(const std::string& s) {
    if (s == "desk_tiny") return Variant::desk_tiny;
    if (s == "B0" || s == "b0") return Variant::B0;
    if (s == "B1" || s == "b1") return Variant::B1;
    if (s == "B2" || s == "b2") return Variant::B2;
    if (s == "B3" || s == "b3") return Variant::B3;
    throw std::invalid_argument("unsupported model variant: " + s);
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::desk_tiny: return "desk_tiny";
        case Variant::B0: return "B0";
        case Variant::B1: return "B1";
        case Variant::B2: return "B2";
        case Variant::B3: return "B3";
    }
    return "?";
}

void ClassifierConfig::validate() const {
    if (input_channels < 1) throw std::invalid_argument("input_channels must be >= 1");
    if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
    if (dropout < 0.0 || dropout >= 1.0)
        throw std::invalid_argument("dropout must be in [0,1)");
}

Classifier::Classifier(ClassifierConfig cfg, nn::ModulePtr net)
    : cfg_(cfg), net_(std::move(net)) {
    net_->collect(params_, buffers_);
    char buf[16];
    for (size_t i = 0; i < params_.size(); ++i) {
        std::snprintf(buf, sizeof buf, "p%03zu.", i);
        params_[i]->name = buf + params_[i]->name;
    }
    for (size_t i = 0; i < buffers_.size(); ++i) {
        std::snprintf(buf, sizeof buf, "b%03zu.", i);
        buffers_[i]->name = buf + buffers_[i]->name;
    }
}

Tensor Classifier::forward(const Tensor& batch, nn::RunCtx& ctx) {
    if (batch.rank() != 4)
        throw std::invalid_argument("Classifier::forward expects [B,C,H,W]");
    if (batch.dim(1) != cfg_.input_channels)
        throw std::invalid_argument(
            "Classifier::forward: batch has " + std::to_string(batch.dim(1)) +
            " channels, model expects " + std::to_string(cfg_.input_channels));
    return net_->forward(batch, ctx);
}

Tensor Classifier::backward(const Tensor& gy) { return net_->backward(gy); }

int64_t Classifier::parameter_count() const {
    int64_t n = 0;
    for (const auto* p : params_) n += p->value.numel();
    return n;
}

void Classifier::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

std::vector<double> Classifier::parameter_vector() const {
    std::vector<double> flat;
    flat.reserve(static_cast<size_t>(parameter_count()));
    for (const auto* p : params_)
        flat.insert(flat.end(), p->value.data(), p->value.data() + p->value.numel());
    return flat;
}

void Classifier::set_parameter_vector(const std::vector<double>& flat) {
    size_t off = 0;
    for (auto* p : params_) {
        const size_t n = static_cast<size_t>(p->value.numel());
        if (off + n > flat.size())
            throw std::invalid_argument("set_parameter_vector: vector too short");
        std::copy(flat.begin() + off, flat.begin() + off + n, p->value.data());
        off += n;
    }
    if (off != flat.size())
        throw std::invalid_argument("set_parameter_vector: vector too long");
}

namespace {

// channel rounding used by the scaled family: nearest multiple of 8, never
// dropping below 90% of the requested width
int64_t make_divisible(double v) {
    int64_t n = std::max<int64_t>(8, (static_cast<int64_t>(v + 4.0) / 8) * 8);
    if (static_cast<double>(n) < 0.9 * v) n += 8;
    return n;
}

struct ScaledSpec {
    double width, depth;
};

ScaledSpec scaled_spec(Variant v) {
    switch (v) {
        case Variant::B0: return {1.0, 1.0};
        case Variant::B1: return {1.0, 1.1};
        case Variant::B2: return {1.1, 1.2};
        case Variant::B3: return {1.2, 1.4};
        default: throw std::invalid_argument("scaled_spec: not a scaled variant");
    }
}

nn::ModulePtr build_desk_tiny(const ClassifierConfig& cfg) {
    auto seq = std::make_unique<nn::Sequential>();
    seq->add(std::make_unique<nn::Conv2d>(cfg.input_channels, 16, 3, 1, 1, 1, false));
    seq->add(std::make_unique<nn::BatchNorm2d>(16));
    seq->add(std::make_unique<nn::ReLU>());
    seq->add(std::make_unique<nn::MaxPool2d>(2, 2));
    seq->add(std::make_unique<nn::Conv2d>(16, 32, 3, 1, 1, 1, false));
    seq->add(std::make_unique<nn::BatchNorm2d>(32));
    seq->add(std::make_unique<nn::ReLU>());
    seq->add(std::make_unique<nn::MaxPool2d>(2, 2));
    seq->add(std::make_unique<nn::Conv2d>(32, 64, 3, 1, 1, 1, false));
    seq->add(std::make_unique<nn::BatchNorm2d>(64));
    seq->add(std::make_unique<nn::ReLU>());
    seq->add(std::make_unique<nn::GlobalAvgPool>());
    seq->add(std::make_unique<nn::Dropout>(cfg.dropout));
    seq->add(std::make_unique<nn::Linear>(64, cfg.num_classes, true));
    return seq;
}

nn::ModulePtr build_scaled(const ClassifierConfig& cfg) {
    const ScaledSpec s = scaled_spec(cfg.variant);
    struct Stage {
        int64_t expand, kernel, stride, in_c, out_c, repeats;
    };
    const Stage base[] = {
        {1, 3, 1, 32, 16, 1},  {6, 3, 2, 16, 24, 2},  {6, 5, 2, 24, 40, 2},
        {6, 3, 2, 40, 80, 3},  {6, 5, 1, 80, 112, 3}, {6, 5, 2, 112, 192, 4},
        {6, 3, 1, 192, 320, 1},
    };

    auto adjust = [&](int64_t c) { return make_divisible(c * s.width); };

    auto seq = std::make_unique<nn::Sequential>();
    const int64_t stem = adjust(32);
    seq->add(std::make_unique<nn::Conv2d>(cfg.input_channels, stem, 3, 2, 1, 1, false));
    seq->add(std::make_unique<nn::BatchNorm2d>(stem));
    seq->add(std::make_unique<nn::SiLU>());

    int64_t last = stem;
    for (const Stage& st : base) {
        const int64_t out_c = adjust(st.out_c);
        const int64_t repeats =
            static_cast<int64_t>(std::ceil(st.repeats * s.depth));
        for (int64_t r = 0; r < repeats; ++r) {
            const int64_t in_c = r == 0 ? last : out_c;
            const int64_t stride = r == 0 ? st.stride : 1;
            const int64_t expanded =
                st.expand == 1 ? in_c : make_divisible(static_cast<double>(in_c * st.expand));
            const int64_t squeezed = std::max<int64_t>(1, in_c / 4);
            seq->add(std::make_unique<nn::MBConv>(in_c, out_c, st.kernel, stride,
                                                  expanded, squeezed));
            last = out_c;
        }
    }

    const int64_t head = 4 * last;
    seq->add(std::make_unique<nn::Conv2d>(last, head, 1, 1, 0, 1, false));
    seq->add(std::make_unique<nn::BatchNorm2d>(head));
    seq->add(std::make_unique<nn::SiLU>());
    seq->add(std::make_unique<nn::GlobalAvgPool>());
    seq->add(std::make_unique<nn::Dropout>(cfg.dropout));
    seq->add(std::make_unique<nn::Linear>(head, cfg.num_classes, true));
    return seq;
}

void init_parameters(Classifier& c, uint64_t seed) {
    Rng root(seed);
    uint64_t idx = 0;
    for (Param* p : c.parameters()) {
        Rng r = root.child(idx++);
        const auto& name = p->name;
        const auto& shape = p->value.shape();
        if (name.find("conv.weight") != std::string::npos) {
            // kaiming normal, fan-out mode
            const double fan_out =
                static_cast<double>(shape[0] * shape[2] * shape[3]);
            const double std = std::sqrt(2.0 / fan_out);
            for (int64_t i = 0; i < p->value.numel(); ++i)
                p->value[i] = r.normal(0.0, std);
        } else if (name.find("linear.weight") != std::string::npos) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(shape[1]));
            for (int64_t i = 0; i < p->value.numel(); ++i)
                p->value[i] = r.uniform(-bound, bound);
        }
        // biases and bn.beta stay zero; bn.gamma stays one
    }
}

}  // namespace

std::unique_ptr<Classifier> build_classifier(const ClassifierConfig& cfg, uint64_t seed) {
    cfg.validate();
    nn::ModulePtr net = cfg.variant == Variant::desk_tiny ? build_desk_tiny(cfg)
                                                          : build_scaled(cfg);
    auto c = std::make_unique<Classifier>(cfg, std::move(net));
    init_parameters(*c, seed);
    return c;
}

std::string config_to_json(const ClassifierConfig& cfg) {
    nlohmann::json j;
    j["input_channels"] = cfg.input_channels;
    j["num_classes"] = cfg.num_classes;
    j["variant"] = to_string(cfg.variant);
    j["dropout"] = cfg.dropout;
    return j.dump();
}

ClassifierConfig config_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    ClassifierConfig cfg;
    cfg.input_channels = j.at("input_channels").get<int64_t>();
    cfg.num_classes = j.at("num_classes").get<int64_t>();
    cfg.variant = variant_from_string(j.at("variant").get<std::string>());
    cfg.dropout = j.at("dropout").get<double>();
    return cfg;
}

}  // namespace msmatch::model
