#include "daseg/model/classifier.hpp"

#include "daseg/error.hpp"

namespace daseg {

void ClassifierConfig::validate() const {
    if (n_blocks < 1) throw ConfigError("classifier n_blocks must be at least 1");
    if (conv_channels < 1 || fc_width < 1) throw ConfigError("classifier widths must be positive");
    if (n_domains != 2) throw ConfigError("the domain classifier has exactly two outputs");
}

void to_json(nlohmann::json& j, const ClassifierConfig& c) {
    j = nlohmann::json{{"n_blocks", c.n_blocks},
                       {"conv_channels", c.conv_channels},
                       {"fc_width", c.fc_width},
                       {"n_domains", c.n_domains}};
}

void from_json(const nlohmann::json& j, ClassifierConfig& c) {
    ClassifierConfig d;
    c.n_blocks = j.value("n_blocks", d.n_blocks);
    c.conv_channels = j.value("conv_channels", d.conv_channels);
    c.fc_width = j.value("fc_width", d.fc_width);
    c.n_domains = j.value("n_domains", d.n_domains);
}

DomainClassifierImpl::DomainClassifierImpl(ClassifierConfig cfg, std::int64_t in_channels, int spatial_dims)
    : cfg_(cfg), spatial_dims_(spatial_dims) {
    cfg_.validate();
    if (spatial_dims != 2 && spatial_dims != 3) throw ConfigError("spatial_dims must be 2 or 3");
    for (int b = 0; b < cfg_.n_blocks; ++b) {
        blocks_->push_back(DoubleConv(spatial_dims, b == 0 ? in_channels : cfg_.conv_channels, cfg_.conv_channels));
    }
    fc_ = torch::nn::Linear(cfg_.conv_channels, cfg_.fc_width);
    out_ = torch::nn::Linear(cfg_.fc_width, cfg_.n_domains);
    register_module("blocks", blocks_);
    register_module("fc", fc_);
    register_module("out", out_);
}

torch::Tensor DomainClassifierImpl::forward(const torch::Tensor& features) {
    if (features.dim() != spatial_dims_ + 2) throw ShapeError("classifier input has wrong rank");
    const std::int64_t need = std::int64_t{1} << cfg_.n_blocks;
    for (int a = 0; a < spatial_dims_; ++a) {
        if (features.size(2 + a) < need) {
            throw ShapeError("classifier with " + std::to_string(cfg_.n_blocks) + " blocks needs feature maps of at least " +
                             std::to_string(need) + " voxels per axis, got " + std::to_string(features.size(2 + a)));
        }
    }
    torch::Tensor h = features;
    for (const auto& block : *blocks_) {
        h = max_pool(block->as<DoubleConv>()->forward(h), spatial_dims_);
    }
    std::vector<std::int64_t> spatial_axes;
    for (int a = 0; a < spatial_dims_; ++a) spatial_axes.push_back(2 + a);
    h = h.mean(spatial_axes);
    return out_->forward(torch::leaky_relu(fc_->forward(h), 0.01));
}

DomainClassifier build_classifier(const ClassifierConfig& cfg, std::int64_t in_channels, int spatial_dims) {
    return DomainClassifier(cfg, in_channels, spatial_dims);
}

}  // namespace daseg
