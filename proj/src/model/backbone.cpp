#include "daseg/model/backbone.hpp"

#include <algorithm>
#include <cmath>

#include "daseg/error.hpp"

namespace daseg {

namespace nn = torch::nn;

void BackboneConfig::validate() const {
    if (spatial_dims != 2 && spatial_dims != 3) throw ConfigError("spatial_dims must be 2 or 3");
    if (n_stages < 2) throw ConfigError("n_stages must be at least 2");
    if (n_stages > 12) throw ConfigError("n_stages is unreasonably large");
    if (in_channels < 1 || base_channels < 1 || seg_out_channels < 1) {
        throw ConfigError("channel counts must be positive");
    }
    if (!(channel_growth >= 1.0)) throw ConfigError("channel_growth must be >= 1");
    if (max_channels < base_channels) throw ConfigError("max_channels must be >= base_channels");
}

std::int64_t BackboneConfig::stage_channels(int stage) const {
    const double c = static_cast<double>(base_channels) * std::pow(channel_growth, stage);
    return std::min<std::int64_t>(max_channels, static_cast<std::int64_t>(std::llround(c)));
}

void to_json(nlohmann::json& j, const BackboneConfig& c) {
    j = nlohmann::json{{"spatial_dims", c.spatial_dims},       {"n_stages", c.n_stages},
                       {"in_channels", c.in_channels},         {"base_channels", c.base_channels},
                       {"channel_growth", c.channel_growth},   {"max_channels", c.max_channels},
                       {"seg_out_channels", c.seg_out_channels}, {"deep_supervision", c.deep_supervision},
                       {"grl_tap", "bottleneck"}};
}

void from_json(const nlohmann::json& j, BackboneConfig& c) {
    BackboneConfig d;
    c.spatial_dims = j.value("spatial_dims", d.spatial_dims);
    c.n_stages = j.value("n_stages", d.n_stages);
    c.in_channels = j.value("in_channels", d.in_channels);
    c.base_channels = j.value("base_channels", d.base_channels);
    c.channel_growth = j.value("channel_growth", d.channel_growth);
    c.max_channels = j.value("max_channels", d.max_channels);
    c.seg_out_channels = j.value("seg_out_channels", d.seg_out_channels);
    c.deep_supervision = j.value("deep_supervision", d.deep_supervision);
    if (j.value("grl_tap", std::string("bottleneck")) != "bottleneck") {
        throw ConfigError("grl_tap: only 'bottleneck' is supported");
    }
    c.grl_tap = GrlTap::bottleneck;
}

ConvNormActImpl::ConvNormActImpl(int spatial_dims, std::int64_t in_channels, std::int64_t out_channels) {
    if (spatial_dims == 3) {
        conv_ = nn::AnyModule(nn::Conv3d(nn::Conv3dOptions(in_channels, out_channels, 3).padding(1)));
        norm_ = nn::AnyModule(nn::InstanceNorm3d(nn::InstanceNorm3dOptions(out_channels).affine(true)));
    } else {
        conv_ = nn::AnyModule(nn::Conv2d(nn::Conv2dOptions(in_channels, out_channels, 3).padding(1)));
        norm_ = nn::AnyModule(nn::InstanceNorm2d(nn::InstanceNorm2dOptions(out_channels).affine(true)));
    }
    register_module("conv", conv_.ptr());
    register_module("norm", norm_.ptr());
}

torch::Tensor ConvNormActImpl::forward(const torch::Tensor& x) {
    return torch::leaky_relu(norm_.forward(conv_.forward(x)), 0.01);
}

DoubleConvImpl::DoubleConvImpl(int spatial_dims, std::int64_t in_channels, std::int64_t out_channels)
    : first_(spatial_dims, in_channels, out_channels), second_(spatial_dims, out_channels, out_channels) {
    register_module("first", first_);
    register_module("second", second_);
}

torch::Tensor DoubleConvImpl::forward(const torch::Tensor& x) { return second_->forward(first_->forward(x)); }

torch::Tensor max_pool(const torch::Tensor& x, int spatial_dims) {
    return spatial_dims == 3 ? torch::max_pool3d(x, 2) : torch::max_pool2d(x, 2);
}

namespace {

nn::AnyModule make_upsample(int dims, std::int64_t in, std::int64_t out) {
    if (dims == 3) return nn::AnyModule(nn::ConvTranspose3d(nn::ConvTranspose3dOptions(in, out, 2).stride(2)));
    return nn::AnyModule(nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, 2).stride(2)));
}

nn::AnyModule make_projection(int dims, std::int64_t in, std::int64_t out) {
    if (dims == 3) return nn::AnyModule(nn::Conv3d(nn::Conv3dOptions(in, out, 1)));
    return nn::AnyModule(nn::Conv2d(nn::Conv2dOptions(in, out, 1)));
}

}  // namespace

BackboneImpl::BackboneImpl(BackboneConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    const int dims = cfg_.spatial_dims;
    for (int s = 0; s < cfg_.n_stages; ++s) {
        const auto in = s == 0 ? cfg_.in_channels : cfg_.stage_channels(s - 1);
        encoder_->push_back(DoubleConv(dims, in, cfg_.stage_channels(s)));
    }
    for (int level = 0; level + 1 < cfg_.n_stages; ++level) {
        const auto c = cfg_.stage_channels(level);
        up_->push_back(make_upsample(dims, cfg_.stage_channels(level + 1), c).ptr());
        decoder_->push_back(DoubleConv(dims, 2 * c, c));
    }
    if (cfg_.deep_supervision) {
        for (int level = 1; level + 1 < cfg_.n_stages; ++level) {
            aux_->push_back(make_projection(dims, cfg_.stage_channels(level), cfg_.seg_out_channels).ptr());
        }
    }
    head_ = make_projection(dims, cfg_.stage_channels(0), cfg_.seg_out_channels);
    register_module("encoder", encoder_);
    register_module("up", up_);
    register_module("decoder", decoder_);
    if (cfg_.deep_supervision) register_module("aux", aux_);
    register_module("head", head_.ptr());
}

void BackboneImpl::check_input(const torch::Tensor& x) const {
    const auto expected_rank = cfg_.spatial_dims + 2;
    if (x.dim() != expected_rank) {
        throw ShapeError("backbone expects a rank-" + std::to_string(expected_rank) + " input, got rank " +
                         std::to_string(x.dim()));
    }
    if (x.size(1) != cfg_.in_channels) {
        throw ShapeError("backbone expects " + std::to_string(cfg_.in_channels) + " input channels, got " +
                         std::to_string(x.size(1)));
    }
    const auto m = cfg_.min_extent();
    for (int a = 0; a < cfg_.spatial_dims; ++a) {
        const auto n = x.size(2 + a);
        if (n < m || n % m != 0) {
            throw ShapeError("spatial extent " + std::to_string(n) + " on axis " + std::to_string(a) +
                             " must be a positive multiple of " + std::to_string(m) + " for " +
                             std::to_string(cfg_.n_stages) + " stages");
        }
    }
}

std::vector<torch::Tensor> BackboneImpl::encode(const torch::Tensor& x) {
    check_input(x);
    std::vector<torch::Tensor> skips;
    skips.reserve(static_cast<std::size_t>(cfg_.n_stages));
    torch::Tensor h = x;
    for (int s = 0; s < cfg_.n_stages; ++s) {
        if (s > 0) h = max_pool(h, cfg_.spatial_dims);
        h = encoder_[static_cast<std::size_t>(s)]->as<DoubleConv>()->forward(h);
        skips.push_back(h);
    }
    return skips;
}

torch::Tensor BackboneImpl::encode_bottleneck(const torch::Tensor& x) { return encode(x).back(); }

BackboneOutput BackboneImpl::forward(const torch::Tensor& x) {
    auto skips = encode(x);
    BackboneOutput out;
    out.bottleneck = skips.back();
    torch::Tensor h = skips.back();
    std::vector<torch::Tensor> aux_rev;
    for (int level = cfg_.n_stages - 2; level >= 0; --level) {
        const auto l = static_cast<std::size_t>(level);
        h = up_[l]->as<nn::ConvTranspose3d>() ? up_[l]->as<nn::ConvTranspose3d>()->forward(h)
                                              : up_[l]->as<nn::ConvTranspose2d>()->forward(h);
        h = decoder_[l]->as<DoubleConv>()->forward(torch::cat({h, skips[l]}, 1));
        if (cfg_.deep_supervision && level >= 1) {
            const auto& head = aux_[l - 1];
            aux_rev.push_back(head->as<nn::Conv3d>() ? head->as<nn::Conv3d>()->forward(h)
                                                     : head->as<nn::Conv2d>()->forward(h));
        }
    }
    out.seg_logits = head_.forward(h);
    out.aux_logits.assign(aux_rev.rbegin(), aux_rev.rend());
    return out;
}

Backbone build_backbone(const BackboneConfig& cfg) { return Backbone(cfg); }

std::int64_t count_parameters(torch::nn::Module& m, bool trainable_only) {
    std::int64_t n = 0;
    for (const auto& p : m.parameters()) {
        if (!trainable_only || p.requires_grad()) n += p.numel();
    }
    return n;
}

}  // namespace daseg
