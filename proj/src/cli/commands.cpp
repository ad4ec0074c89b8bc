#include "daseg/cli/commands.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "daseg/cli/manifest.hpp"
#include "daseg/cli/report.hpp"
#include "daseg/data/folds.hpp"
#include "daseg/data/preprocess.hpp"
#include "daseg/data/synthetic.hpp"
#include "daseg/error.hpp"
#include "daseg/eval/cv.hpp"
#include "daseg/eval/records.hpp"
#include "daseg/training/checkpoint.hpp"
#include "daseg/training/config.hpp"
#include "daseg/training/strategy.hpp"
#include "daseg/training/trainer.hpp"

namespace daseg {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path staging_path(const fs::path& out) {
    auto p = out;
    p += ".partial";
    return p;
}

/// Moves a completed staging directory into place.
void publish(const fs::path& staging, const fs::path& out) {
    if (fs::exists(out)) fs::remove_all(out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    fs::rename(staging, out);
}

std::vector<std::string> list_outputs(const fs::path& dir) {
    std::vector<std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out.push_back(fs::relative(e.path(), dir).generic_string());
    }
    std::sort(out.begin(), out.end());
    out.push_back(kManifestName);
    return out;
}

json data_spec_json(const DataSpec& d) {
    return {{"root", d.root.string()},
            {"layout", std::string(to_string(d.layout))},
            {"source", d.source_dir},
            {"target", d.target_dir}};
}

std::string model_tag_for(const fs::path& run, const std::string& strategy, const std::set<std::string>& taken) {
    if (!taken.count(strategy)) return strategy;
    return run.filename().string();
}

}  // namespace

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

DataSpec resolve_data_spec(const json& config, const std::optional<fs::path>& override_root) {
    DataSpec d;
    if (config.contains("data")) {
        const auto& j = config.at("data");
        d.root = j.value("root", std::string{});
        d.layout = layout_from_string(j.value("layout", std::string(to_string(d.layout))));
        d.source_dir = j.value("source", d.source_dir);
        d.target_dir = j.value("target", d.target_dir);
        if (j.contains("modality_files")) d.brats.modality_files = j.at("modality_files").get<std::vector<std::string>>();
        if (j.contains("label_file")) d.brats.label_file = j.at("label_file").get<std::string>();
    }
    if (const char* env = std::getenv(kDataRootEnv); env && *env) d.root = env;
    if (override_root) d.root = *override_root;
    if (d.root.empty()) {
        throw ConfigError(fmt::format("no dataset root: pass --data, set {} or add data.root to the config", kDataRootEnv));
    }
    return d;
}

LoadedData load_data(const DataSpec& spec) {
    LoadedData out;
    auto load = [&](const std::string& sub, Domain domain, std::vector<Case>& dst) {
        const auto dir = spec.root / sub;
        if (!fs::is_directory(dir)) return;
        LoadOptions lo;
        lo.domain = domain;
        lo.brats = spec.brats;
        dst = load_dataset(dir, spec.layout, lo);
        if (spec.layout == DatasetLayout::brats_nifti) {
            for (auto& c : dst) zscore_normalize_inplace(c.volume());
        }
        for (const auto& c : dst) {
            if (c.domain() != domain) throw DataError("case '" + c.id() + "' under " + dir.string() + " has the wrong domain");
        }
        out.hashes[to_string(domain).data()] = hash_directory(dir);
    };
    load(spec.source_dir, Domain::source, out.source);
    load(spec.target_dir, Domain::target, out.target);
    if (out.source.empty() && out.target.empty()) throw DataError("no cases found under " + spec.root.string());
    return out;
}

void prepare_output_dir(const fs::path& dir, bool force) {
    if (fs::exists(dir) && !(fs::is_directory(dir) && fs::is_empty(dir))) {
        if (!force) throw ConfigError("output " + dir.string() + " exists and is not empty; pass --force to replace it");
        fs::remove_all(dir);
    }
}

void cmd_synth(const SynthArgs& args) {
    const auto j = read_json_file(args.config);
    auto cfg = (j.contains("synthetic") ? j.at("synthetic") : j).get<SyntheticConfig>();
    if (args.seed) cfg.seed = *args.seed;
    cfg.validate();
    prepare_output_dir(args.out, args.force);
    const auto staging = staging_path(args.out);
    fs::remove_all(staging);

    spdlog::info("generating {} source and {} target cases at {}", cfg.n_source, cfg.n_target, to_string(cfg.grid_size));
    const auto ds = generate_synthetic(cfg);
    write_container_dataset(staging / "source", ds.source);
    write_container_dataset(staging / "target", ds.target);

    RunManifest m;
    m.run_id = make_run_id(args.out.string());
    m.command = "synth";
    m.argv = args.argv;
    m.config = cfg;
    m.dataset_hashes["source"] = hash_directory(staging / "source");
    m.dataset_hashes["target"] = hash_directory(staging / "target");
    m.version = version_stamp();
    m.outputs = {"source/", "target/", kManifestName};
    write_manifest(staging, m);
    publish(staging, args.out);
    spdlog::info("wrote {}", args.out.string());
}

void cmd_train(const TrainArgs& args) {
    const auto j = read_json_file(args.config);
    auto cfg = j.get<TrainConfig>();
    cfg.validate();
    const auto strategy = make_strategy(args.strategy, cfg);
    const auto spec = resolve_data_spec(j, args.data_root);
    auto data = load_data(spec);
    if (strategy.adversarial() && (data.source.empty() || data.target.empty())) {
        throw ConfigError("strategy uda needs both source and target cases");
    }

    const auto staging = staging_path(args.out);
    const bool resuming = args.resume && fs::exists(staging);
    if (!resuming) {
        prepare_output_dir(args.out, args.force);
        fs::remove_all(staging);
    }
    fs::create_directories(staging);

    const bool source_only = strategy.datasets.source_labels && !strategy.datasets.target_labels &&
                             !strategy.datasets.target_images;
    auto run_one = [&](const fs::path& dir, std::span<const Case> target) {
        TrainerOptions o;
        o.seed = args.seed;
        o.out_dir = dir;
        o.pretrained_checkpoint = args.pretrained;
        o.resume = args.resume;
        o.on_epoch = [&](const EpochRecord& e) {
            spdlog::info("[{}] epoch {} l_seg={:.4f} l_d={:.4f} acc={:.3f} alpha={:.3f} lr={:.5f}", strategy.name, e.epoch,
                         e.l_seg, e.l_d, e.domain_accuracy, e.alpha, e.lr);
        };
        Trainer t(cfg, strategy, data.source, target, o);
        t.fit();
    };

    json folds_json;
    if (args.folds && !source_only) {
        if (data.target.empty()) throw ConfigError("--folds splits the target cases, but none were found");
        const auto split = make_folds(data.target, *args.folds, args.seed);
        folds_json = to_json(split);
        std::ofstream(staging / "folds.json") << folds_json.dump(2) << '\n';
        for (int f = 0; f < split.k; ++f) {
            const auto keep = split.complement(f);
            const std::set<std::string> ids(keep.begin(), keep.end());
            std::vector<Case> train_target;
            for (const auto& c : data.target) {
                if (ids.count(c.id())) train_target.push_back(c);
            }
            spdlog::info("fold {}/{}: {} target training cases", f + 1, split.k, train_target.size());
            run_one(staging / fmt::format("fold_{}", f), train_target);
        }
    } else {
        if (args.folds) spdlog::info("strategy {} uses no target data; training a single model", strategy.name);
        run_one(staging, data.target);
    }

    RunManifest m;
    m.run_id = make_run_id(args.out.string() + args.strategy);
    m.command = "train";
    m.argv = args.argv;
    json resolved = cfg;
    resolved["strategy"] = strategy.name;
    resolved["seed"] = args.seed;
    resolved["data"] = data_spec_json(spec);
    if (args.folds && !source_only) resolved["folds"] = *args.folds;
    if (args.pretrained) resolved["pretrained"] = args.pretrained->string();
    m.config = resolved;
    m.dataset_hashes = data.hashes;
    m.version = version_stamp();
    m.outputs = list_outputs(staging);
    write_manifest(staging, m);
    publish(staging, args.out);
    spdlog::info("wrote {}", args.out.string());
}

void cmd_evaluate(const EvaluateArgs& args) {
    if (args.runs.empty()) throw ConfigError("evaluate needs at least one run directory");
    EvalOptions eo;
    if (args.hd95_sentinel) eo.hd95_sentinel = *args.hd95_sentinel;
    eo.include_sentinel = !args.exclude_sentinel;

    prepare_output_dir(args.out, args.force);
    const auto staging = staging_path(args.out);
    fs::remove_all(staging);
    fs::create_directories(staging);

    std::vector<MetricsRecord> records;
    std::set<std::string> tags;
    std::map<std::string, std::string> hashes;
    json runs = json::array();
    for (const auto& run : args.runs) {
        const auto manifest = read_manifest(run);
        if (manifest.command != "train") throw ConfigError(run.string() + " is not a training run");
        const auto& rc = manifest.config;
        const auto cfg = rc.get<TrainConfig>();
        const auto strategy_name = rc.at("strategy").get<std::string>();
        const auto spec = resolve_data_spec(rc, args.data_root);
        const auto data = load_data(spec);
        for (const auto& [k, v] : data.hashes) hashes[run.filename().string() + ":" + k] = v;
        if (data.target.empty()) throw DataError("no target cases to evaluate under " + spec.root.string());
        const auto tag = model_tag_for(run, strategy_name, tags);
        tags.insert(tag);
        const auto inference = inference_options_for(cfg);

        auto evaluate_with = [&](const fs::path& ckpt, std::span<const Case> cases, int fold) {
            if (!fs::exists(ckpt)) throw Error("missing checkpoint " + ckpt.string());
            const auto meta = read_checkpoint_meta(ckpt);
            auto backbone = build_backbone(meta.config.get<TrainConfig>().backbone);
            load_backbone_weights(ckpt, backbone);
            auto refs = make_references(cases);
            if (args.min_et) refs = filter_small_et(refs, *args.min_et);
            std::vector<Case> kept;
            std::set<std::string> keep_ids;
            for (const auto& r : refs) keep_ids.insert(r.case_id);
            for (const auto& c : cases) {
                if (keep_ids.count(c.id())) kept.push_back(c);
            }
            const auto preds = predict_cases(backbone, kept, inference);
            const auto recs = evaluate_cases(preds, refs, eo, tag, fold);
            records.insert(records.end(), recs.begin(), recs.end());
        };

        if (fs::exists(run / "folds.json")) {
            std::ifstream in(run / "folds.json");
            const auto split = fold_split_from_json(json::parse(in));
            for (int f = 0; f < split.k; ++f) {
                const auto members = split.members(f);
                const std::set<std::string> ids(members.begin(), members.end());
                std::vector<Case> test;
                for (const auto& c : data.target) {
                    if (ids.count(c.id())) test.push_back(c);
                }
                if (test.size() != ids.size()) throw DataError("fold split does not match the target dataset");
                evaluate_with(run / fmt::format("fold_{}", f) / "checkpoint_final.pt", test, f);
            }
        } else {
            evaluate_with(run / "checkpoint_final.pt", data.target, -1);
        }
        runs.push_back({{"run", run.string()}, {"model_tag", tag}, {"run_id", manifest.run_id}});
    }

    write_metrics_csv(staging / "metrics.csv", records);
    const auto table = aggregate_metrics(records, eo);
    write_aggregate_csv(staging / "aggregate.csv", table);
    std::ofstream(staging / "aggregate.txt") << format_aggregate_table(table);
    if (tags.size() >= 2) {
        const auto sig = pairwise_significance(records);
        write_significance_csv(staging / "significance.csv", sig);
        std::ofstream(staging / "significance.txt") << format_significance(sig);
    }

    RunManifest m;
    m.run_id = make_run_id(args.out.string());
    m.command = "evaluate";
    m.argv = args.argv;
    m.config = {{"runs", runs},
                {"min_et", args.min_et ? json(*args.min_et) : json(nullptr)},
                {"hd95_sentinel", eo.hd95_sentinel},
                {"include_sentinel", eo.include_sentinel}};
    m.dataset_hashes = hashes;
    m.version = version_stamp();
    m.outputs = list_outputs(staging);
    write_manifest(staging, m);
    publish(staging, args.out);
    std::fputs(format_aggregate_table(table).c_str(), stdout);
}

void cmd_report(const ReportArgs& args) {
    if (args.inputs.empty()) throw ConfigError("report needs at least one evaluation directory or metrics CSV");
    std::vector<MetricsRecord> records;
    EvalOptions eo;
    std::map<std::string, std::string> hashes;
    for (const auto& in : args.inputs) {
        fs::path csv = in;
        if (fs::is_directory(in)) {
            csv = in / "metrics.csv";
            if (fs::exists(in / kManifestName)) {
                const auto m = read_manifest(in);
                if (m.config.contains("hd95_sentinel")) eo.hd95_sentinel = m.config.at("hd95_sentinel").get<double>();
                if (m.config.contains("include_sentinel")) eo.include_sentinel = m.config.at("include_sentinel").get<bool>();
            }
        }
        if (!fs::exists(csv)) throw DataError("no metrics found at " + in.string());
        hashes[csv.string()] = sha256_file(csv);
        const auto recs = read_metrics_csv(csv);
        records.insert(records.end(), recs.begin(), recs.end());
    }
    if (records.empty()) throw DataError("no metrics records in the given inputs");

    prepare_output_dir(args.out, args.force);
    const auto staging = staging_path(args.out);
    fs::remove_all(staging);
    const auto res = write_report(staging, records, eo);
    for (const auto& n : res.notices) spdlog::warn("{}", n);

    RunManifest m;
    m.run_id = make_run_id(args.out.string());
    m.command = "report";
    m.argv = args.argv;
    json inputs = json::array();
    for (const auto& in : args.inputs) inputs.push_back(in.string());
    m.config = {{"inputs", inputs}, {"hd95_sentinel", eo.hd95_sentinel}, {"include_sentinel", eo.include_sentinel}};
    m.dataset_hashes = hashes;
    m.version = version_stamp();
    m.outputs = list_outputs(staging);
    write_manifest(staging, m);
    publish(staging, args.out);
}

}  // namespace daseg
