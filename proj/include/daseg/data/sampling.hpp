#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "daseg/data/case.hpp"

namespace daseg {

using Rng = std::mt19937_64;

enum class LabelUse {
    if_present,  // crop labels and honour foreground bias when the case has labels
    never,       // treat the case as unlabeled; labels are not read at all
};

struct Patch {
    Volume image;                   // channels x patch_size, zero outside the case volume
    std::optional<LabelMap> labels;  // cropped identically to image
    Shape3 center{0, 0, 0};
    bool foreground_centered = false;
};

/// Crops a patch_size window. With probability foreground_bias (and labels available)
/// the window is centred on a uniformly chosen non-background voxel; otherwise the
/// window is placed uniformly inside the volume (centred with zero padding on axes
/// where the volume is smaller than the patch).
Patch sample_patch(const Case& c, const Shape3& patch_size, Rng& rng, double foreground_bias,
                   LabelUse use = LabelUse::if_present);

/// Copies a window with the given origin; out-of-volume voxels are zero.
Patch crop_patch(const Case& c, const Shape3& origin, const Shape3& patch_size, LabelUse use);

/// One training step's worth of patches.
struct Batch {
    torch::Tensor patches;        // B x C x D x H x W, float32
    torch::Tensor seg_targets;    // L x 3 x D x H x W region masks (WT, TC, ET) for labeled items, in item order
    torch::Tensor domain_labels;  // B x 2 one-hot
    std::vector<bool> source_mask;
    std::vector<bool> labeled_mask;  // items with seg targets; equals source_mask in adversarial batches
    std::vector<std::string> case_ids;
    std::int64_t batch_id = 0;

    std::int64_t size() const { return static_cast<std::int64_t>(case_ids.size()); }
    std::int64_t labeled_count() const;
    std::int64_t source_count() const;
    /// Indices of labeled items, as an int64 tensor.
    torch::Tensor labeled_index() const;
};

struct StreamOptions {
    std::int64_t batch_size = 4;
    Shape3 patch_size{64, 64, 64};
    double foreground_bias = 0.33;
    /// Attach seg targets to target-domain items too (supervised mixing). Off for adversarial training.
    bool target_labeled = false;
};

/// Round-robin over a shuffled order, reshuffling at each wrap, or i.i.d. draws with replacement.
class CaseCycler {
public:
    CaseCycler(std::size_t n, bool with_replacement);
    std::size_t next(Rng& rng);

private:
    std::size_t n_;
    bool with_replacement_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

/// Every batch holds batch_size/2 source and batch_size/2 target items (sources first).
/// The larger domain is visited by shuffled passes; the smaller is resampled with replacement.
class BalancedBatchStream {
public:
    BalancedBatchStream(std::span<const Case> source, std::span<const Case> target, StreamOptions options,
                        std::uint64_t seed);

    Batch next();
    /// ceil(max(|source|, |target|) * 2 / batch_size)
    std::int64_t batches_per_epoch() const;
    Rng& rng() { return rng_; }

private:
    std::span<const Case> source_;
    std::span<const Case> target_;
    StreamOptions options_;
    Rng rng_;
    CaseCycler source_cycle_;
    CaseCycler target_cycle_;
    std::int64_t produced_ = 0;
};

/// Batches drawn from a single labeled pool (one or both domains mixed freely).
class UniformBatchStream {
public:
    UniformBatchStream(std::span<const Case* const> cases, StreamOptions options, std::uint64_t seed);

    Batch next();
    std::int64_t batches_per_epoch() const;
    Rng& rng() { return rng_; }

private:
    std::vector<const Case*> cases_;
    StreamOptions options_;
    Rng rng_;
    CaseCycler cycle_;
    std::int64_t produced_ = 0;
};

/// Stacks patches into a Batch. Labels of an item are used only when with_labels[i] is true.
Batch collate(std::span<const Patch> patches, std::span<const Domain> domains, const std::vector<bool>& with_labels,
              std::span<const std::string> ids);

/// Sub-batch of the given items, in the given order; seg targets follow their items.
Batch select_items(const Batch& batch, std::span<const std::int64_t> items);

/// Region-mask tensor (3 x D x H x W, channels WT, TC, ET) for one label map.
torch::Tensor region_target_tensor(const LabelMap& labels);

}  // namespace daseg
