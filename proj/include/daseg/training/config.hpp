#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "daseg/grid.hpp"
#include "daseg/model/backbone.hpp"
#include "daseg/model/classifier.hpp"

namespace daseg {

struct LossWeights {
    double lambda = 0.01;  // domain-classifier weight
    void validate() const;
};

/// Truncated ramp for the GRL coefficient.
struct AlphaSchedule {
    int e_min = 100;
    int e_max = 350;
    double alpha_max = 3.0;
    void validate() const;
};

/// SGD with the inverse-decay learning rate lr0 / (1 + a*p)^b, p = epoch / max_epochs.
struct OptimConfig {
    double lr0 = 0.01;
    double lr_decay_alpha = 10.0;
    double lr_decay_beta = 0.75;
    int max_epochs = 500;
    double momentum = 0.99;
    double weight_decay = 3e-5;
    bool nesterov = true;
    double grad_clip_norm = 12.0;  // <= 0 disables clipping
    void validate() const;
};

struct TrainingLoopConfig {
    std::int64_t batch_size = 4;
    Shape3 patch_size{64, 64, 64};
    double foreground_bias = 0.33;
    /// Optimizer steps per epoch; 0 uses the stream's natural epoch length.
    std::int64_t steps_per_epoch = 50;
    int checkpoint_every = 50;
    double dice_smooth = 1e-5;
    void validate() const;
};

/// Fine-tuning knobs for the transfer strategies.
struct TransferConfig {
    double lr_divisor = 10.0;     // strategies 6-8: lr0 / lr_divisor
    double epoch_divisor = 5.0;   // strategies 6-8: max_epochs / epoch_divisor
    /// Strategy number -> trainable parameter groups. Groups: encoder, bottleneck,
    /// decoder.<level> (level 0 = full resolution), decoder.* (all levels), projection.
    std::map<std::string, std::vector<std::string>> trainable_groups{
        {"5", {"projection"}},
        {"6", {"decoder.0", "projection"}},
        {"7", {"decoder.*", "projection"}},
        {"8", {"decoder.*", "bottleneck", "projection"}},
    };
    void validate() const;
};

struct TrainConfig {
    BackboneConfig backbone;
    ClassifierConfig classifier;
    LossWeights loss;
    AlphaSchedule alpha;
    OptimConfig optim;
    TrainingLoopConfig loop;
    TransferConfig transfer;

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace daseg
