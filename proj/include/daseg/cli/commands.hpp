#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "daseg/data/case.hpp"
#include "daseg/data/dataset_io.hpp"

namespace daseg {

/// Environment variable that overrides the dataset root of a config file.
inline constexpr const char* kDataRootEnv = "DASEG_DATA_ROOT";

/// Where a run finds its source and target cases.
struct DataSpec {
    std::filesystem::path root;
    DatasetLayout layout = DatasetLayout::synthetic_container;
    std::string source_dir = "source";
    std::string target_dir = "target";
    BratsLayoutOptions brats;
};

/// Reads the optional "data" section of an experiment config. Precedence for the root:
/// explicit override, then $DASEG_DATA_ROOT, then the config value.
DataSpec resolve_data_spec(const nlohmann::json& config, const std::optional<std::filesystem::path>& override_root);

struct LoadedData {
    std::vector<Case> source;
    std::vector<Case> target;
    std::map<std::string, std::string> hashes;  // "source"/"target" -> directory hash
};

LoadedData load_data(const DataSpec& spec);

nlohmann::json read_json_file(const std::filesystem::path& path);

/// Refuses a non-empty existing directory unless force; with force it is removed first.
void prepare_output_dir(const std::filesystem::path& dir, bool force);

struct SynthArgs {
    std::filesystem::path config;
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;
    bool force = false;
    std::vector<std::string> argv;
};

/// Writes out/source, out/target (container layout) and out/manifest.json.
void cmd_synth(const SynthArgs& args);

struct TrainArgs {
    std::filesystem::path config;
    std::string strategy;
    std::uint64_t seed = 0;
    std::filesystem::path out;
    std::optional<std::filesystem::path> data_root;
    /// Trains one model per fold on the complement of that fold's target cases.
    std::optional<int> folds;
    std::optional<std::filesystem::path> pretrained;
    bool force = false;
    bool resume = false;
    std::vector<std::string> argv;
};

/// Run directory: manifest.json, config.resolved.json, history.csv, checkpoints; with --folds,
/// folds.json and one fold_<i>/ subdirectory per fold.
void cmd_train(const TrainArgs& args);

struct EvaluateArgs {
    std::vector<std::filesystem::path> runs;
    std::filesystem::path out;
    std::optional<std::filesystem::path> data_root;
    std::optional<std::int64_t> min_et;
    std::optional<double> hd95_sentinel;
    bool exclude_sentinel = false;
    bool force = false;
    std::vector<std::string> argv;
};

/// metrics.csv, aggregate.csv/.txt, optional filtered tables, significance.csv/.txt for 2+ runs.
void cmd_evaluate(const EvaluateArgs& args);

struct ReportArgs {
    std::vector<std::filesystem::path> inputs;  // evaluation directories or metrics CSV files
    std::filesystem::path out;
    bool force = false;
    std::vector<std::string> argv;
};

void cmd_report(const ReportArgs& args);

}  // namespace daseg
