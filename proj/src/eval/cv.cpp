#include "daseg/eval/cv.hpp"

#include <set>

#include <spdlog/spdlog.h>

#include "daseg/error.hpp"
#include "daseg/training/strategy.hpp"

namespace daseg {

RegionMasks predict_case(Backbone& backbone, const Case& c, const InferenceOptions& options) {
    const auto logits = predict_logits(backbone, c.volume(), options).contiguous();
    return binarize_region_logits(std::span<const float>(logits.data_ptr<float>(), static_cast<std::size_t>(logits.numel())),
                                  c.dims());
}

std::map<std::string, RegionMasks> predict_cases(Backbone& backbone, std::span<const Case> cases,
                                                 const InferenceOptions& options) {
    std::map<std::string, RegionMasks> out;
    for (const auto& c : cases) out.emplace(c.id(), predict_case(backbone, c, options));
    return out;
}

std::vector<Reference> make_references(std::span<const Case> cases) {
    std::vector<Reference> refs;
    refs.reserve(cases.size());
    for (const auto& c : cases) refs.push_back({c.id(), c.labels(), c.spacing()});
    return refs;
}

InferenceOptions inference_options_for(const TrainConfig& cfg) {
    InferenceOptions o;
    o.patch_size = cfg.loop.patch_size;
    return o;
}

namespace {

std::vector<Case> subset(std::span<const Case> cases, const std::vector<std::string>& ids) {
    std::set<std::string> wanted(ids.begin(), ids.end());
    std::vector<Case> out;
    for (const auto& c : cases) {
        if (wanted.count(c.id())) out.push_back(c);
    }
    return out;
}

bool source_only(const Strategy& s) {
    return s.datasets.source_labels && !s.datasets.target_labels && !s.datasets.target_images;
}

}  // namespace

CvResult run_cv(const CvExperiment& ex, std::span<const Case> source, std::span<const Case> target,
                const FoldSplit& folds) {
    folds.validate();
    std::set<std::string> target_ids;
    for (const auto& c : target) target_ids.insert(c.id());
    std::set<std::string> fold_ids;
    for (const auto& [id, _] : folds.assignments) fold_ids.insert(id);
    if (fold_ids != target_ids) throw ConfigError("fold split does not cover exactly the target cases");
    if (ex.strategies.empty()) throw ConfigError("no strategies requested");

    std::vector<Strategy> strategies;
    for (const auto& name : ex.strategies) strategies.push_back(make_strategy(name, ex.train));

    CvResult result;
    const auto inference = inference_options_for(ex.train);
    auto run_dir = [&](const std::string& name, std::optional<int> fold) -> std::optional<std::filesystem::path> {
        if (!ex.out_dir) return std::nullopt;
        auto d = *ex.out_dir / ("strategy_" + name);
        if (fold) d /= "fold_" + std::to_string(*fold);
        return d;
    };
    auto options_for = [&](const std::string& name, int fold) {
        TrainerOptions o;
        o.seed = ex.seed;
        o.out_dir = run_dir(name, source_only(make_strategy(name, ex.train)) ? std::nullopt : std::optional<int>(fold));
        if (ex.on_epoch) o.on_epoch = [&, name, fold](const EpochRecord& e) { ex.on_epoch(name, fold, e); };
        return o;
    };

    // Source-only models (and the pretrained backbone for transfer strategies) are fold independent.
    std::map<std::string, std::unique_ptr<Trainer>> shared;
    auto shared_model = [&](const std::string& name) -> Trainer& {
        auto it = shared.find(name);
        if (it != shared.end()) return *it->second;
        spdlog::info("cv: training {} once on all source cases", name);
        auto t = std::make_unique<Trainer>(ex.train, make_strategy(name, ex.train), source, std::span<const Case>{},
                                           options_for(name, -1));
        t->fit();
        return *shared.emplace(name, std::move(t)).first->second;
    };

    std::optional<std::filesystem::path> pretrained = ex.pretrained_checkpoint;
    std::optional<std::filesystem::path> scratch_dir;
    const bool needs_pretrained =
        std::any_of(strategies.begin(), strategies.end(), [](const Strategy& s) { return s.requires_checkpoint; });
    if (needs_pretrained && !pretrained) {
        auto& adult = shared_model("1");
        if (ex.out_dir) {
            pretrained = *ex.out_dir / "strategy_1" / "checkpoint_final.pt";
        } else {
            scratch_dir = std::filesystem::temp_directory_path() / ("daseg_cv_" + std::to_string(ex.seed) + "_" +
                                                                  std::to_string(reinterpret_cast<std::uintptr_t>(&adult)));
            pretrained = *scratch_dir / "pretrained.pt";
            adult.save(*pretrained);
        }
    }

    for (int fold = 0; fold < folds.k; ++fold) {
        const auto test = subset(target, folds.members(fold));
        const auto train_target = subset(target, folds.complement(fold));
        auto refs = make_references(test);
        if (ex.min_et_voxels) refs = filter_small_et(refs, *ex.min_et_voxels);

        for (const auto& s : strategies) {
            Backbone* net = nullptr;
            std::unique_ptr<Trainer> local;
            if (source_only(s)) {
                net = &shared_model(s.name).backbone();
            } else {
                spdlog::info("cv: fold {} strategy {}", fold, s.name);
                auto opts = options_for(s.name, fold);
                if (s.requires_checkpoint) opts.pretrained_checkpoint = pretrained;
                local = std::make_unique<Trainer>(ex.train, s, source, train_target, opts);
                local->fit();
                net = &local->backbone();
            }
            const auto preds = predict_cases(*net, test, inference);
            auto recs = evaluate_cases(preds, refs, ex.eval, s.name, fold);
            result.records.insert(result.records.end(), recs.begin(), recs.end());
            if (auto d = run_dir(s.name, source_only(s) ? std::nullopt : std::optional<int>(fold))) {
                result.checkpoints[s.name].push_back(*d / "checkpoint_final.pt");
            }
        }
    }
    if (scratch_dir) std::filesystem::remove_all(*scratch_dir);
    result.table = aggregate_metrics(result.records, ex.eval);
    return result;
}

}  // namespace daseg
