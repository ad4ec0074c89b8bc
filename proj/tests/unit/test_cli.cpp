#include "support/doctest_torch.hpp"

#include <cstdlib>
#include <fstream>
#include <iterator>

#include "daseg/cli/commands.hpp"
#include "daseg/cli/manifest.hpp"
#include "daseg/cli/report.hpp"
#include "daseg/error.hpp"
#include "daseg/eval/records.hpp"
#include "daseg/training/schedules.hpp"
#include "daseg/training/trainer.hpp"
#include "support/fixtures.hpp"

using namespace daseg;
using daseg::testing::TempDir;
namespace fs = std::filesystem;

namespace {

void write_json(const fs::path& p, const nlohmann::json& j) { std::ofstream(p) << j.dump(2); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("sha256 and directory hashing") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    TempDir d("hash");
    std::ofstream(d.path() / "a.txt") << "one";
    fs::create_directories(d.path() / "sub");
    std::ofstream(d.path() / "sub" / "b.txt") << "two";
    const auto h = hash_directory(d.path());
    CHECK(h == hash_directory(d.path()));
    std::ofstream(d.path() / "sub" / "b.txt") << "three";
    CHECK(h != hash_directory(d.path()));
}

TEST_CASE("box statistics") {
    const auto b = box_stats({1, 2, 3, 4, 5, 6, 7, 8, 9, 100});
    CHECK(b.median == doctest::Approx(5.5));
    CHECK(b.q1 == doctest::Approx(3.25));
    CHECK(b.q3 == doctest::Approx(7.75));
    CHECK(b.whisker_high == 9.0);
    REQUIRE(b.outliers.size() == 1);
    CHECK(b.outliers[0] == 100.0);
    const std::vector<PlotSeries> s{{"a", {0.1, 0.5}}, {"b", {0.7}}};
    const auto svg = render_box_plot_svg("Dice ET", "Dice", s);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("Dice ET") != std::string::npos);
}

TEST_CASE("data root precedence: flag, then environment, then config") {
    const nlohmann::json cfg{{"data", {{"root", "/from/config"}}}};
    ::unsetenv(kDataRootEnv);
    CHECK(resolve_data_spec(cfg, std::nullopt).root == "/from/config");
    ::setenv(kDataRootEnv, "/from/env", 1);
    CHECK(resolve_data_spec(cfg, std::nullopt).root == "/from/env");
    CHECK(resolve_data_spec(cfg, fs::path("/from/flag")).root == "/from/flag");
    ::unsetenv(kDataRootEnv);
    CHECK_THROWS_AS(resolve_data_spec(nlohmann::json::object(), std::nullopt), ConfigError);
}

TEST_CASE("synth, train, evaluate and report end to end") {
    TempDir d("cli");
    const auto root = d.path();
    SyntheticConfig sc;
    sc.n_source = 4;
    sc.n_target = 4;
    sc.grid_size = {16, 16, 16};
    write_json(root / "synth.json", nlohmann::json{{"synthetic", sc}});

    SynthArgs sa;
    sa.config = root / "synth.json";
    sa.out = root / "data";
    cmd_synth(sa);
    CHECK(fs::exists(root / "data" / "source"));
    CHECK_FALSE(fs::exists(root / "data.partial"));
    const auto sm = read_manifest(root / "data");
    CHECK(sm.command == "synth");
    CHECK(sm.dataset_hashes.at("target") == hash_directory(root / "data" / "target"));
    CHECK_THROWS_AS(cmd_synth(sa), ConfigError);  // refuses a non-empty output
    sa.force = true;
    cmd_synth(sa);
    CHECK(read_manifest(root / "data").dataset_hashes == sm.dataset_hashes);  // same seed, same bytes

    nlohmann::json tc = testing::tiny_config(1);
    tc["data"] = {{"root", (root / "data").string()}};
    write_json(root / "train.json", tc);

    TrainArgs ta;
    ta.config = root / "train.json";
    ta.strategy = "1";
    ta.seed = 1;
    ta.out = root / "run_s1";
    ta.folds = 2;  // ignored for source-only training
    cmd_train(ta);
    CHECK(fs::exists(root / "run_s1" / "checkpoint_final.pt"));
    CHECK(fs::exists(root / "run_s1" / "history.csv"));
    CHECK(fs::exists(root / "run_s1" / "config.resolved.json"));
    CHECK_FALSE(fs::exists(root / "run_s1" / "folds.json"));

    ta.strategy = "uda";
    ta.out = root / "run_uda";
    cmd_train(ta);
    CHECK(fs::exists(root / "run_uda" / "folds.json"));
    CHECK(fs::exists(root / "run_uda" / "fold_1" / "checkpoint_final.pt"));
    const auto tm = read_manifest(root / "run_uda");
    CHECK(tm.config.at("strategy") == "uda");
    CHECK(tm.config.at("folds") == 2);

    ta.strategy = "5";
    ta.out = root / "run_s5";
    CHECK_THROWS_AS(cmd_train(ta), ConfigError);

    EvaluateArgs ea;
    ea.runs = {root / "run_s1", root / "run_uda"};
    ea.out = root / "eval";
    cmd_evaluate(ea);
    const auto recs = read_metrics_csv(root / "eval" / "metrics.csv");
    CHECK(recs.size() == 2 * 4 * 3);
    CHECK(fs::exists(root / "eval" / "significance.csv"));
    CHECK(fs::exists(root / "eval" / "aggregate.txt"));
    for (const auto& r : recs) {
        if (r.model_tag == "uda") CHECK(r.fold >= 0);
        CHECK(r.dice >= 0.0);
        CHECK(r.dice <= 1.0);
    }

    // Re-evaluation is byte-identical; the ET filter keeps only cases with >= min_et ET voxels.
    ea.out = root / "eval_again";
    cmd_evaluate(ea);
    CHECK(slurp(root / "eval" / "metrics.csv") == slurp(root / "eval_again" / "metrics.csv"));
    ea.out = root / "eval_filtered";
    ea.min_et = 1000000;
    CHECK_THROWS(cmd_evaluate(ea));  // nothing survives the filter
    CHECK_FALSE(fs::exists(root / "eval_filtered"));

    ReportArgs ra;
    ra.inputs = {root / "eval"};
    ra.out = root / "report";
    cmd_report(ra);
    CHECK(fs::exists(root / "report" / "summary.md"));
    CHECK(fs::exists(root / "report" / "dice_TC.svg"));
    ra.out = root / "report_again";
    cmd_report(ra);
    CHECK(slurp(root / "report" / "summary.md") == slurp(root / "report_again" / "summary.md"));

    // Starred strategies switch deep supervision off in the resolved config; uda logs alpha_at.
    ta.strategy = "1s";
    ta.out = root / "run_1s";
    cmd_train(ta);
    CHECK(read_json_file(root / "run_1s" / "config.resolved.json").at("backbone").at("deep_supervision") == false);
    const auto h = read_history_csv(root / "run_uda" / "fold_0" / "history.csv");
    for (const auto& e : h) CHECK(e.alpha == alpha_at(e.epoch, testing::tiny_config(1).alpha));
}

TEST_CASE("train --resume continues the epoch numbering of an interrupted run") {
    TempDir d("cli_resume");
    const auto root = d.path();
    SyntheticConfig sc;
    sc.n_source = 4;
    sc.n_target = 4;
    sc.grid_size = {16, 16, 16};
    write_json(root / "synth.json", sc);
    SynthArgs sa;
    sa.config = root / "synth.json";
    sa.out = root / "data";
    cmd_synth(sa);

    nlohmann::json tc = testing::tiny_config(3);
    tc["data"] = {{"root", (root / "data").string()}};
    write_json(root / "train.json", tc);
    TrainArgs ta;
    ta.config = root / "train.json";
    ta.strategy = "uda";
    ta.out = root / "run";
    cmd_train(ta);
    const auto reference = read_history_csv(root / "run" / "history.csv");

    // Simulate an interruption after the first epoch: the staging directory holds that checkpoint.
    fs::create_directories(root / "run2.partial");
    {
        auto cfg = testing::tiny_config(3);
        TrainerOptions o;
        o.out_dir = root / "run2.partial";
        o.on_epoch = [](const EpochRecord& e) {
            if (e.epoch == 1) throw std::runtime_error("stop");
        };
        auto data = load_data(resolve_data_spec(tc, std::nullopt));
        CHECK_THROWS(Trainer(cfg, make_strategy("uda", cfg), data.source, data.target, o).fit());
    }
    ta.out = root / "run2";
    ta.resume = true;
    cmd_train(ta);
    const auto resumed = read_history_csv(root / "run2" / "history.csv");
    REQUIRE(resumed.size() == reference.size());
    for (std::size_t i = 0; i < resumed.size(); ++i) {
        CHECK(resumed[i].epoch == static_cast<int>(i));
        CHECK(resumed[i].l_total == reference[i].l_total);
    }
}

TEST_CASE("evaluate rejects directories that are not training runs") {
    TempDir d("cli_bad");
    EvaluateArgs ea;
    ea.runs = {d.path()};
    ea.out = d.path() / "eval";
    CHECK_THROWS_AS(cmd_evaluate(ea), Error);
}
