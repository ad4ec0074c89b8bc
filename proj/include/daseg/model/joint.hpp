#pragma once

#include <vector>

#include <torch/torch.h>

#include "daseg/data/case.hpp"
#include "daseg/data/sampling.hpp"
#include "daseg/model/backbone.hpp"
#include "daseg/model/classifier.hpp"
#include "daseg/model/grl.hpp"

namespace daseg {

struct JointOutput {
    torch::Tensor seg_logits;                   // B x regions x patch
    std::vector<torch::Tensor> aux_seg_logits;  // deep supervision, finest first
    torch::Tensor domain_logits;                // B x 2
};

/// One shared encoder pass: segmentation from the decoder, domain logits from
/// classifier(grl(bottleneck)).
JointOutput forward_joint(Backbone& backbone, DomainClassifier& classifier, const torch::Tensor& patches,
                          GrlCoefficient coeff);
JointOutput forward_joint(Backbone& backbone, DomainClassifier& classifier, const Batch& batch,
                          GrlCoefficient coeff);

struct InferenceOptions {
    Shape3 patch_size{64, 64, 64};
    double step_fraction = 0.5;  // window stride as a fraction of the patch
    std::int64_t windows_per_forward = 4;
};

/// Sliding-window prediction with uniform averaging of overlapping logits.
/// Returns regions x D x H x W logits for a 3D backbone.
torch::Tensor predict_logits(Backbone& backbone, const Volume& volume, const InferenceOptions& options);

}  // namespace daseg
