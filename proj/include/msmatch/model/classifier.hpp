// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "msmatch/nn/nn.hpp"

namespace msmatch::model {

enum class Variant { desk_tiny, B0, B1, B2, B3 };

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

struct ClassifierConfig {
    int64_t input_channels = 3;
    int64_t num_classes = 10;
    Variant variant = Variant::desk_tiny;
    double dropout = 0.3;

    void validate() const;
};

/// A differentiable image classifier: module tree plus flat parameter views.
class Classifier {
public:
    Classifier(ClassifierConfig cfg, nn::ModulePtr net);

    /// batch: [B, C, H, W] -> logits [B, K]
    Tensor forward(const Tensor& batch, nn::RunCtx& ctx);
    /// gy: [B, K]; returns gradient w.r.t. the input batch.
    Tensor backward(const Tensor& gy);

    const ClassifierConfig& config() const { return cfg_; }
    const std::vector<nn::Param*>& parameters() { return params_; }
    const std::vector<nn::BufferT*>& buffers() { return buffers_; }
    int64_t parameter_count() const;

    void zero_grad();

    /// Flattened copies of all parameter values, in registration order.
    std::vector<double> parameter_vector() const;
    void set_parameter_vector(const std::vector<double>& flat);

private:
    ClassifierConfig cfg_;
    nn::ModulePtr net_;
    std::vector<nn::Param*> params_;
    std::vector<nn::BufferT*> buffers_;
};

/// Deterministic construction: (config, seed) fully determines the initial
/// parameters.
std::unique_ptr<Classifier> build_classifier(const ClassifierConfig& cfg, uint64_t seed);

std::string config_to_json(const ClassifierConfig& cfg);
ClassifierConfig config_from_json(const std::string& text);

}  // namespace msmatch::model
