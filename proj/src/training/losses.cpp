#include "daseg/training/losses.hpp"

#include <numeric>

#include "daseg/error.hpp"

namespace daseg {

namespace F = torch::nn::functional;

namespace {

torch::Tensor supervised_rows(const torch::Tensor& logits, const std::vector<bool>& supervised) {
    if (static_cast<std::int64_t>(supervised.size()) != logits.size(0)) {
        throw ShapeError("supervision mask length does not match the batch");
    }
    std::vector<std::int64_t> idx;
    for (std::size_t i = 0; i < supervised.size(); ++i) {
        if (supervised[i]) idx.push_back(static_cast<std::int64_t>(i));
    }
    if (idx.empty()) throw Error("no supervised items in batch; segmentation loss is undefined");
    if (static_cast<std::int64_t>(idx.size()) == logits.size(0)) return logits;
    return logits.index_select(0, torch::tensor(idx, torch::TensorOptions().dtype(torch::kInt64).device(logits.device())));
}

}  // namespace

torch::Tensor seg_loss(const torch::Tensor& seg_logits, const torch::Tensor& targets,
                       const std::vector<bool>& supervised, double smooth) {
    auto logits = supervised_rows(seg_logits, supervised);
    if (targets.sizes() != logits.sizes()) {
        throw ShapeError("segmentation targets do not match the supervised logits");
    }
    auto t = targets.to(logits.dtype());
    auto p = torch::sigmoid(logits);
    std::vector<std::int64_t> pooled{0};
    for (std::int64_t a = 2; a < logits.dim(); ++a) pooled.push_back(a);
    auto intersection = (p * t).sum(pooled);
    auto denom = p.sum(pooled) + t.sum(pooled);
    auto dice = 1.0 - (2.0 * intersection + smooth) / (denom + smooth);
    auto bce = F::binary_cross_entropy_with_logits(logits, t);
    return dice.mean() + bce;
}

std::vector<double> deep_supervision_weights(std::size_t n_outputs) {
    std::vector<double> w(n_outputs);
    double v = 1.0;
    for (auto& x : w) {
        x = v;
        v *= 0.5;
    }
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= s;
    return w;
}

torch::Tensor deep_supervision_seg_loss(const torch::Tensor& seg_logits, std::span<const torch::Tensor> aux_logits,
                                        const torch::Tensor& targets, const std::vector<bool>& supervised,
                                        double smooth) {
    if (aux_logits.empty()) return seg_loss(seg_logits, targets, supervised, smooth);
    const auto w = deep_supervision_weights(aux_logits.size() + 1);
    auto total = w[0] * seg_loss(seg_logits, targets, supervised, smooth);
    for (std::size_t i = 0; i < aux_logits.size(); ++i) {
        const auto& aux = aux_logits[i];
        std::vector<std::int64_t> size(aux.sizes().begin() + 2, aux.sizes().end());
        auto down = F::interpolate(targets, F::InterpolateFuncOptions().size(size).mode(torch::kNearest));
        total = total + w[i + 1] * seg_loss(aux, down, supervised, smooth);
    }
    return total;
}

torch::Tensor domain_loss(const torch::Tensor& domain_logits, const torch::Tensor& domain_labels) {
    if (domain_logits.dim() != 2 || domain_logits.sizes() != domain_labels.sizes()) {
        throw ShapeError("domain logits and one-hot labels must both be B x 2");
    }
    auto logp = torch::log_softmax(domain_logits, 1);
    return -(domain_labels.to(logp.dtype()) * logp).sum(1).mean();
}

LossBreakdown total_loss(double l_seg, double l_d, const LossWeights& weights) {
    return {l_seg, l_d, l_seg + weights.lambda * l_d};
}

}  // namespace daseg
