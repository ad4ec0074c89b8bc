#include "daseg/model/joint.hpp"

#include <algorithm>
#include <set>

namespace daseg {

JointOutput forward_joint(Backbone& backbone, DomainClassifier& classifier, const torch::Tensor& patches,
                          GrlCoefficient coeff) {
    auto out = backbone->forward(patches);
    JointOutput j;
    j.seg_logits = std::move(out.seg_logits);
    j.aux_seg_logits = std::move(out.aux_logits);
    j.domain_logits = classifier->forward(grl(out.bottleneck, coeff));
    return j;
}

JointOutput forward_joint(Backbone& backbone, DomainClassifier& classifier, const Batch& batch,
                          GrlCoefficient coeff) {
    return forward_joint(backbone, classifier, batch.patches, coeff);
}

namespace {

std::vector<std::int64_t> window_starts(std::int64_t extent, std::int64_t patch, double step_fraction) {
    if (extent <= patch) return {0};
    const auto step = std::max<std::int64_t>(1, static_cast<std::int64_t>(static_cast<double>(patch) * step_fraction));
    std::set<std::int64_t> s;
    for (std::int64_t p = 0; p + patch < extent; p += step) s.insert(p);
    s.insert(extent - patch);
    return {s.begin(), s.end()};
}

}  // namespace

torch::Tensor predict_logits(Backbone& backbone, const Volume& volume, const InferenceOptions& options) {
    if (backbone->config().spatial_dims != 3) throw ConfigError("sliding-window inference supports 3D backbones");
    torch::NoGradGuard no_grad;
    const bool was_training = backbone->is_training();
    backbone->eval();

    const auto& dims = volume.dims;
    const auto& ps = options.patch_size;
    const auto regions = backbone->config().seg_out_channels;
    auto logits = torch::zeros({regions, dims[0], dims[1], dims[2]}, torch::kFloat32);
    auto counts = torch::zeros({1, dims[0], dims[1], dims[2]}, torch::kFloat32);

    // Source volume as a tensor, zero padded up to at least one patch on every axis.
    Shape3 padded{std::max(dims[0], ps[0]), std::max(dims[1], ps[1]), std::max(dims[2], ps[2])};
    auto vol = torch::from_blob(const_cast<float*>(volume.data.data()), {volume.channels, dims[0], dims[1], dims[2]},
                                torch::kFloat32);
    auto src = torch::zeros({volume.channels, padded[0], padded[1], padded[2]}, torch::kFloat32);
    src.narrow(1, 0, dims[0]).narrow(2, 0, dims[1]).narrow(3, 0, dims[2]).copy_(vol);
    auto acc = torch::zeros({regions, padded[0], padded[1], padded[2]}, torch::kFloat32);
    auto cnt = torch::zeros({1, padded[0], padded[1], padded[2]}, torch::kFloat32);

    std::vector<Shape3> origins;
    for (auto z : window_starts(padded[0], ps[0], options.step_fraction))
        for (auto y : window_starts(padded[1], ps[1], options.step_fraction))
            for (auto x : window_starts(padded[2], ps[2], options.step_fraction)) origins.push_back({z, y, x});

    const auto chunk = std::max<std::int64_t>(1, options.windows_per_forward);
    for (std::size_t i = 0; i < origins.size(); i += static_cast<std::size_t>(chunk)) {
        const auto end = std::min(origins.size(), i + static_cast<std::size_t>(chunk));
        std::vector<torch::Tensor> windows;
        for (std::size_t w = i; w < end; ++w) {
            const auto& o = origins[w];
            windows.push_back(src.narrow(1, o[0], ps[0]).narrow(2, o[1], ps[1]).narrow(3, o[2], ps[2]));
        }
        auto out = backbone->forward(torch::stack(windows)).seg_logits;
        for (std::size_t w = i; w < end; ++w) {
            const auto& o = origins[w];
            acc.narrow(1, o[0], ps[0]).narrow(2, o[1], ps[1]).narrow(3, o[2], ps[2]).add_(out[static_cast<std::int64_t>(w - i)]);
            cnt.narrow(1, o[0], ps[0]).narrow(2, o[1], ps[1]).narrow(3, o[2], ps[2]).add_(1.0);
        }
    }
    logits.copy_(acc.narrow(1, 0, dims[0]).narrow(2, 0, dims[1]).narrow(3, 0, dims[2]));
    counts.copy_(cnt.narrow(1, 0, dims[0]).narrow(2, 0, dims[1]).narrow(3, 0, dims[2]));
    if (was_training) backbone->train();
    return logits / counts;
}

}  // namespace daseg
