#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>
#include <torch/torch.h>

#include "daseg/model/backbone.hpp"
#include "daseg/model/classifier.hpp"

namespace daseg {

struct CheckpointMeta {
    nlohmann::json config;     // resolved TrainConfig
    std::string strategy;      // CLI spelling
    int epochs_completed = 0;
    std::uint64_t seed = 0;
    bool has_classifier = false;
    bool has_optimizer = false;
};

/// Writes to a temporary file and renames, so an interrupted save never leaves a torn checkpoint.
void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta, Backbone& backbone,
                     DomainClassifier* classifier, torch::optim::Optimizer* optimizer);

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);

/// Restores whatever the caller passes; a classifier or optimizer requested but absent is an Error.
CheckpointMeta load_checkpoint(const std::filesystem::path& path, Backbone& backbone, DomainClassifier* classifier,
                               torch::optim::Optimizer* optimizer);

/// Backbone parameters and buffers only. Shapes must match the receiving network.
void load_backbone_weights(const std::filesystem::path& path, Backbone& backbone);

}  // namespace daseg
