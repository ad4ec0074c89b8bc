#pragma once

#include <span>
#include <vector>

#include <torch/torch.h>

#include "daseg/training/config.hpp"

namespace daseg {

/// Batch soft Dice (pooled over the supervised items and voxels, per region channel,
/// averaged over channels) plus voxel-wise binary cross-entropy on sigmoid outputs.
/// Only items flagged in `supervised` contribute; `targets` holds their region masks in item order.
torch::Tensor seg_loss(const torch::Tensor& seg_logits, const torch::Tensor& targets,
                       const std::vector<bool>& supervised, double smooth = 1e-5);

/// seg_loss over the full-resolution output and each auxiliary output, weighted 1, 1/2, 1/4, ...
/// and normalised to sum to one. Targets are downsampled by nearest-neighbour sampling.
torch::Tensor deep_supervision_seg_loss(const torch::Tensor& seg_logits, std::span<const torch::Tensor> aux_logits,
                                        const torch::Tensor& targets, const std::vector<bool>& supervised,
                                        double smooth = 1e-5);

std::vector<double> deep_supervision_weights(std::size_t n_outputs);

/// Mean softmax cross-entropy against one-hot domain labels (B x 2).
torch::Tensor domain_loss(const torch::Tensor& domain_logits, const torch::Tensor& domain_labels);

struct LossBreakdown {
    double l_seg = 0.0;
    double l_d = 0.0;
    double l_total = 0.0;
};

/// l_total = l_seg + lambda * l_d
LossBreakdown total_loss(double l_seg, double l_d, const LossWeights& weights);

}  // namespace daseg
