#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

namespace daseg {

enum class GrlTap { bottleneck };

struct BackboneConfig {
    int spatial_dims = 3;
    int n_stages = 4;
    std::int64_t in_channels = 4;
    std::int64_t base_channels = 16;
    double channel_growth = 2.0;
    std::int64_t max_channels = 320;
    std::int64_t seg_out_channels = 3;
    bool deep_supervision = false;
    GrlTap grl_tap = GrlTap::bottleneck;

    void validate() const;
    std::int64_t stage_channels(int stage) const;
    /// Spatial divisor imposed by the encoder: 2^(n_stages-1).
    std::int64_t min_extent() const { return std::int64_t{1} << (n_stages - 1); }
};

void to_json(nlohmann::json& j, const BackboneConfig& c);
void from_json(const nlohmann::json& j, BackboneConfig& c);

/// conv(3) -> instance norm (affine) -> leaky ReLU(0.01), for 2D or 3D inputs.
class ConvNormActImpl : public torch::nn::Module {
public:
    ConvNormActImpl(int spatial_dims, std::int64_t in_channels, std::int64_t out_channels);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::AnyModule conv_;
    torch::nn::AnyModule norm_;
};
TORCH_MODULE(ConvNormAct);

/// Two ConvNormAct layers; the block shared by encoder, decoder and domain classifier.
class DoubleConvImpl : public torch::nn::Module {
public:
    DoubleConvImpl(int spatial_dims, std::int64_t in_channels, std::int64_t out_channels);
    torch::Tensor forward(const torch::Tensor& x);

private:
    ConvNormAct first_{nullptr};
    ConvNormAct second_{nullptr};
};
TORCH_MODULE(DoubleConv);

torch::Tensor max_pool(const torch::Tensor& x, int spatial_dims);

struct BackboneOutput {
    torch::Tensor seg_logits;               // N x seg_out x spatial, full resolution
    std::vector<torch::Tensor> aux_logits;  // deep supervision, finest first (1/2, 1/4, ...)
    torch::Tensor bottleneck;               // GRL tap point
};

/// U-Net: n_stages encoder blocks (max-pool between stages), symmetric decoder with
/// transposed-conv upsampling and skip concatenation, 1x1 projection to region logits.
///
/// Submodule names define the parameter groups used by transfer strategies:
///   encoder.<i>            encoder stage i (the last one is the bottleneck)
///   up.<i>, decoder.<i>    decoder stage at resolution level i (0 = full resolution)
///   aux.<i>                deep-supervision head at level i (i >= 1)
///   head                   final projection
class BackboneImpl : public torch::nn::Module {
public:
    explicit BackboneImpl(BackboneConfig cfg);

    BackboneOutput forward(const torch::Tensor& x);
    /// Encoder only; returns the tap feature map.
    torch::Tensor encode_bottleneck(const torch::Tensor& x);

    const BackboneConfig& config() const { return cfg_; }
    std::int64_t bottleneck_channels() const { return cfg_.stage_channels(cfg_.n_stages - 1); }
    void check_input(const torch::Tensor& x) const;

private:
    std::vector<torch::Tensor> encode(const torch::Tensor& x);

    BackboneConfig cfg_;
    torch::nn::ModuleList encoder_;
    torch::nn::ModuleList up_;
    torch::nn::ModuleList decoder_;
    torch::nn::ModuleList aux_;
    torch::nn::AnyModule head_;
};
TORCH_MODULE(Backbone);

Backbone build_backbone(const BackboneConfig& cfg);

std::int64_t count_parameters(torch::nn::Module& m, bool trainable_only = false);

}  // namespace daseg
