#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "daseg/model/backbone.hpp"
#include "daseg/training/config.hpp"

namespace daseg {

/// Training regimes. Numbers match the baseline model numbering (1-8); uda is the adversarial model.
enum class StrategyKind {
    scratch_adult = 1,
    scratch_ped = 2,
    scratch_both = 3,
    pretrain_then_full_retrain = 4,
    feature_extractor_frozen = 5,
    finetune_partial_a = 6,
    finetune_partial_b = 7,
    finetune_partial_c = 8,
    uda = 9,
};

/// Which data feed the segmentation loss, and whether target images are seen at all.
struct DatasetSelection {
    bool source_labels = false;
    bool target_labels = false;
    bool target_images = false;  // unlabeled target images (adversarial branch)
};

struct Strategy {
    StrategyKind kind = StrategyKind::uda;
    std::string name;  // CLI spelling: "1".."8", "1s".."3s", "uda"
    bool deep_supervision = false;
    DatasetSelection datasets;
    /// Empty means every backbone parameter trains.
    std::vector<std::string> trainable_groups;
    std::optional<double> lr_override;
    std::optional<int> epochs_override;
    bool requires_checkpoint = false;

    bool adversarial() const { return kind == StrategyKind::uda; }
};

/// Parses "1".."8", "1s".."3s" (deep supervision off) or "uda".
Strategy make_strategy(std::string_view name, const TrainConfig& cfg);
std::vector<std::string> strategy_names();

/// Parameter group of a backbone parameter name: encoder, bottleneck, decoder.<level>, projection.
std::string parameter_group(const std::string& param_name, int n_stages);

bool group_selected(const std::string& group, const std::vector<std::string>& selectors);

/// Everything the training loop needs after a strategy is applied to a network.
struct TrainerInputs {
    std::map<std::string, bool> trainable;  // backbone parameter name -> trains
    DatasetSelection datasets;
    double lr0 = 0.01;
    int max_epochs = 1;
    bool deep_supervision = false;
    bool loaded_checkpoint = false;
};

/// Loads pretrained backbone weights when the strategy needs them, sets requires_grad per the
/// strategy's trainable groups and resolves the learning-rate and epoch schedule.
/// Strategies 4-8 without a checkpoint are a ConfigError; 1-3 and uda ignore it.
TrainerInputs apply_strategy(const Strategy& strategy, Backbone& backbone, const TrainConfig& cfg,
                             const std::optional<std::filesystem::path>& pretrained_checkpoint);

}  // namespace daseg
