#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "daseg/data/case.hpp"
#include "daseg/data/sampling.hpp"
#include "daseg/model/backbone.hpp"
#include "daseg/model/classifier.hpp"
#include "daseg/training/config.hpp"
#include "daseg/training/losses.hpp"
#include "daseg/training/strategy.hpp"

namespace daseg {

struct StepRecord {
    int epoch = 0;
    std::int64_t step = 0;
    std::int64_t batch_id = 0;
    double l_seg = 0.0;
    double l_d = 0.0;
    double l_total = 0.0;
    double domain_accuracy = 0.0;  // NaN without a domain classifier
    double alpha = 0.0;
    double lr = 0.0;
};

struct EpochRecord {
    int epoch = 0;
    double l_seg = 0.0;  // means over the epoch's steps
    double l_d = 0.0;
    double l_total = 0.0;
    double domain_accuracy = 0.0;
    double alpha = 0.0;
    double lr = 0.0;
    std::int64_t steps = 0;
};

void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history);
std::vector<EpochRecord> read_history_csv(const std::filesystem::path& path);
nlohmann::json history_to_json(std::span<const EpochRecord> history);
std::vector<EpochRecord> history_from_json(const nlohmann::json& j);

struct TrainerOptions {
    std::uint64_t seed = 0;
    /// Checkpoints, history, resolved config and divergence dumps go here when set.
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::filesystem::path> pretrained_checkpoint;
    /// Continue from out_dir/checkpoint_latest.pt when it exists.
    bool resume = false;
    bool keep_step_history = false;
    std::function<void(const EpochRecord&)> on_epoch;
};

/// Seed of the batch stream for one epoch; streams are rebuilt per epoch so a resumed
/// run draws exactly the batches the uninterrupted run would have drawn.
std::uint64_t epoch_stream_seed(std::uint64_t seed, int epoch);

/// Owns the networks and optimizer for one strategy. Source cases must carry labels; target
/// cases carry labels only when the strategy trains on them.
class Trainer {
public:
    Trainer(TrainConfig cfg, Strategy strategy, std::span<const Case> source, std::span<const Case> target,
            TrainerOptions options = {});

    /// One optimizer step on a prepared batch. Non-finite loss raises DivergenceError.
    StepRecord step(const Batch& batch, int epoch);

    /// Runs the remaining epochs and writes the final checkpoint.
    const std::vector<EpochRecord>& fit();

    /// Draws the batches of one epoch, in order.
    std::vector<Batch> epoch_batches(int epoch);
    std::int64_t steps_per_epoch();

    Backbone& backbone() { return backbone_; }
    DomainClassifier* classifier() { return strategy_.adversarial() ? &classifier_ : nullptr; }
    torch::optim::SGD& optimizer() { return *optimizer_; }
    const TrainConfig& config() const { return cfg_; }
    const Strategy& strategy() const { return strategy_; }
    const TrainerInputs& inputs() const { return inputs_; }
    const std::vector<EpochRecord>& history() const { return history_; }
    const std::vector<StepRecord>& step_history() const { return steps_; }
    int epochs_completed() const { return epochs_completed_; }
    int max_epochs() const { return inputs_.max_epochs; }
    double lr_for_epoch(int epoch) const;
    double alpha_for_epoch(int epoch) const;

    void save(const std::filesystem::path& path);

private:
    void check_datasets() const;
    void dump_divergence(const Batch& batch, int epoch, double l_seg, double l_d, double l_total) const;

    TrainConfig cfg_;
    Strategy strategy_;
    std::span<const Case> source_;
    std::span<const Case> target_;
    std::vector<const Case*> uniform_pool_;
    TrainerOptions options_;
    Backbone backbone_{nullptr};
    DomainClassifier classifier_{nullptr};
    TrainerInputs inputs_;
    std::unique_ptr<torch::optim::SGD> optimizer_;
    std::vector<torch::Tensor> trainable_;
    std::vector<EpochRecord> history_;
    std::vector<StepRecord> steps_;
    int epochs_completed_ = 0;
    std::int64_t global_step_ = 0;
};

}  // namespace daseg
