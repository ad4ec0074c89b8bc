#pragma once

#include <cstdint>

#include <json.hpp>
#include <torch/torch.h>

#include "daseg/model/backbone.hpp"

namespace daseg {

struct ClassifierConfig {
    int n_blocks = 4;
    std::int64_t conv_channels = 100;
    std::int64_t fc_width = 100;
    std::int64_t n_domains = 2;

    void validate() const;
};

void to_json(nlohmann::json& j, const ClassifierConfig& c);
void from_json(const nlohmann::json& j, ClassifierConfig& c);

/// n_blocks x (double conv + max pool), global average pooling, FC(fc_width) + leaky ReLU,
/// linear layer to n_domains logits.
class DomainClassifierImpl : public torch::nn::Module {
public:
    DomainClassifierImpl(ClassifierConfig cfg, std::int64_t in_channels, int spatial_dims);

    torch::Tensor forward(const torch::Tensor& features);
    const ClassifierConfig& config() const { return cfg_; }

private:
    ClassifierConfig cfg_;
    int spatial_dims_;
    torch::nn::ModuleList blocks_;
    torch::nn::Linear fc_{nullptr};
    torch::nn::Linear out_{nullptr};
};
TORCH_MODULE(DomainClassifier);

DomainClassifier build_classifier(const ClassifierConfig& cfg, std::int64_t in_channels, int spatial_dims = 3);

}  // namespace daseg
