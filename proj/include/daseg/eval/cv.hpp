#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "daseg/data/case.hpp"
#include "daseg/data/folds.hpp"
#include "daseg/eval/records.hpp"
#include "daseg/eval/regions.hpp"
#include "daseg/model/joint.hpp"
#include "daseg/training/config.hpp"
#include "daseg/training/trainer.hpp"

namespace daseg {

/// Sliding-window logits thresholded at 0.5 probability, nesting repaired.
RegionMasks predict_case(Backbone& backbone, const Case& c, const InferenceOptions& options);

std::map<std::string, RegionMasks> predict_cases(Backbone& backbone, std::span<const Case> cases,
                                                 const InferenceOptions& options);

/// Ground-truth references of labeled cases. Must not run under a TargetLabelLock for target cases.
std::vector<Reference> make_references(std::span<const Case> cases);

InferenceOptions inference_options_for(const TrainConfig& cfg);

struct CvExperiment {
    TrainConfig train;
    std::vector<std::string> strategies;  // CLI spellings
    std::uint64_t seed = 0;
    EvalOptions eval;
    /// Retain only cases with at least this many ground-truth ET voxels when set.
    std::optional<std::int64_t> min_et_voxels;
    /// Per-strategy / per-fold run directories go here when set.
    std::optional<std::filesystem::path> out_dir;
    /// Backbone for strategies 4-8. When absent, a source-only model (strategy 1) is trained once and used.
    std::optional<std::filesystem::path> pretrained_checkpoint;
    std::function<void(const std::string& strategy, int fold, const EpochRecord&)> on_epoch;
};

struct CvResult {
    std::vector<MetricsRecord> records;  // all folds, concatenated; model_tag = strategy name
    AggregateTable table;
    /// strategy -> checkpoint per fold (one shared entry per fold for source-only models)
    std::map<std::string, std::vector<std::filesystem::path>> checkpoints;
};

/// k-fold cross-validation over the target cases. For each fold every strategy trains on the
/// target training split (the source set, when used, is always complete) and predicts the held-out
/// split. Source-only strategies train once and are reused across folds.
CvResult run_cv(const CvExperiment& experiment, std::span<const Case> source, std::span<const Case> target,
                const FoldSplit& folds);

}  // namespace daseg
