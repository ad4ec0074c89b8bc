#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>
#include <torch/torch.h>

#include "daseg/cli/commands.hpp"
#include "daseg/error.hpp"
#include "daseg/training/strategy.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Domain-adversarial brain tumour segmentation lab"};
    app.require_subcommand(1);
    std::vector<std::string> raw(argv, argv + argc);
    int threads = 0;
    app.add_option("--threads", threads, "Intra-op threads for LibTorch (0 keeps the default)");
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

    daseg::SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic two-domain dataset");
    s->add_option("--config", synth.config, "Synthetic config (JSON)")->required()->check(CLI::ExistingFile);
    s->add_option("--out", synth.out, "Output dataset directory")->required();
    s->add_option("--seed", synth.seed, "Override the config seed");
    s->add_flag("--force", synth.force, "Replace a non-empty output directory");

    daseg::TrainArgs train;
    std::string data_root;
    std::string pretrained;
    int folds = 0;
    auto* t = app.add_subcommand("train", "Train one strategy");
    t->add_option("--config", train.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    t->add_option("--strategy", train.strategy, "1-8, 1s-3s (deep supervision off) or uda")
        ->required()
        ->check(CLI::IsMember(daseg::strategy_names()));
    t->add_option("--seed", train.seed, "Random seed")->default_val(0);
    t->add_option("--out", train.out, "Run directory")->required();
    t->add_option("--data", data_root, std::string("Dataset root (overrides $") + daseg::kDataRootEnv + " and the config)");
    t->add_option("--folds", folds, "Train one model per cross-validation fold of the target set")->check(CLI::Range(2, 1000));
    t->add_option("--pretrained", pretrained, "Backbone checkpoint for strategies 4-8")->check(CLI::ExistingFile);
    t->add_flag("--force", train.force, "Replace a non-empty run directory");
    t->add_flag("--resume", train.resume, "Continue an interrupted run from its latest checkpoint");

    daseg::EvaluateArgs eval;
    std::string eval_data;
    std::int64_t min_et = -1;
    double sentinel = -1.0;
    auto* e = app.add_subcommand("evaluate", "Predict target cases and compute Dice/HD95 tables");
    e->add_option("runs", eval.runs, "Run directories")->required()->check(CLI::ExistingDirectory);
    e->add_option("--out", eval.out, "Evaluation directory")->required();
    e->add_option("--data", eval_data, "Dataset root override");
    e->add_option("--min-et", min_et, "Drop cases with fewer ground-truth ET voxels (e.g. 60)")->check(CLI::NonNegativeNumber);
    e->add_option("--hd95-sentinel", sentinel, "HD95 when exactly one mask is empty (mm)")->check(CLI::PositiveNumber);
    e->add_flag("--exclude-sentinel", eval.exclude_sentinel, "Leave sentinel HD95 values out of the statistics");
    e->add_flag("--force", eval.force, "Replace a non-empty evaluation directory");

    daseg::ReportArgs report;
    auto* r = app.add_subcommand("report", "Render box plots and a markdown summary");
    r->add_option("inputs", report.inputs, "Evaluation directories or metrics CSV files")->required()->check(CLI::ExistingPath);
    r->add_option("--out", report.out, "Report directory")->required();
    r->add_flag("--force", report.force, "Replace a non-empty report directory");

    CLI11_PARSE(app, argc, argv);
    if (quiet) spdlog::set_level(spdlog::level::warn);
    if (threads > 0) torch::set_num_threads(threads);

    try {
        if (*s) {
            synth.argv = raw;
            daseg::cmd_synth(synth);
        } else if (*t) {
            train.argv = raw;
            if (!data_root.empty()) train.data_root = data_root;
            if (!pretrained.empty()) train.pretrained = pretrained;
            if (folds > 0) train.folds = folds;
            daseg::cmd_train(train);
        } else if (*e) {
            eval.argv = raw;
            if (!eval_data.empty()) eval.data_root = eval_data;
            if (min_et >= 0) eval.min_et = min_et;
            if (sentinel > 0) eval.hd95_sentinel = sentinel;
            daseg::cmd_evaluate(eval);
        } else if (*r) {
            report.argv = raw;
            daseg::cmd_report(report);
        }
    } catch (const daseg::ConfigError& ex) {
        spdlog::error("configuration error: {}", ex.what());
        return 2;
    } catch (const std::exception& ex) {
        spdlog::error("{}", ex.what());
        return 1;
    }
    return 0;
}
