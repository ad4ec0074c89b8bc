#include "support/doctest_torch.hpp"

#include <cmath>
#include <filesystem>
#include <numeric>

#include <fmt/format.h>
#include <torch/torch.h>

#include "daseg/error.hpp"
#include "daseg/model/joint.hpp"
#include "daseg/training/checkpoint.hpp"
#include "daseg/training/losses.hpp"
#include "daseg/training/schedules.hpp"
#include "daseg/training/strategy.hpp"
#include "daseg/training/trainer.hpp"
#include "support/fixtures.hpp"

using namespace daseg;
using daseg::testing::TempDir;
using daseg::testing::tiny_config;
using daseg::testing::tiny_data;

namespace {

std::vector<bool> all_true(std::size_t n) { return std::vector<bool>(n, true); }

std::map<std::string, torch::Tensor> snapshot(Backbone& net) {
    std::map<std::string, torch::Tensor> out;
    for (const auto& p : net->named_parameters()) out[p.key()] = p.value().detach().clone();
    return out;
}

}  // namespace

TEST_CASE("seg_loss: zero logits give ln 2 cross-entropy plus the closed-form Dice term") {
    // 2x2x2 target, half ones, in all three region channels.
    auto t = torch::zeros({1, 3, 2, 2, 2});
    t.index_put_({torch::indexing::Slice(), torch::indexing::Slice(), 0}, 1.0);
    const auto logits = torch::zeros({1, 3, 2, 2, 2}, torch::kFloat64);
    const double smooth = 1e-5;
    const double l = seg_loss(logits, t, all_true(1), smooth).item<double>();
    // p = 1/2 everywhere: intersection 2, denominator 4 + 4.
    const double dice_term = 1.0 - (2.0 * 2.0 + smooth) / (8.0 + smooth);
    CHECK(l == doctest::Approx(dice_term + std::log(2.0)).epsilon(1e-12));
    const double bce = torch::nn::functional::binary_cross_entropy_with_logits(logits, t.to(torch::kFloat64)).item<double>();
    CHECK(std::abs(bce - std::log(2.0)) < 1e-6);
}

TEST_CASE("seg_loss: confident correct logits are near zero; mask handling") {
    torch::manual_seed(0);
    auto t = (torch::rand({2, 3, 4, 4, 4}) > 0.5).to(torch::kFloat32);
    auto logits = (t * 2 - 1) * 20;
    CHECK(seg_loss(logits, t, all_true(2)).item<double>() < 1e-4);
    CHECK_THROWS_AS(seg_loss(logits, t, {false, false}), Error);
    CHECK_THROWS_AS(seg_loss(logits, t, {true}), ShapeError);
    // Only the second item is supervised; its target row is the only one passed.
    auto t1 = t.slice(0, 1, 2);
    CHECK(seg_loss(logits, t1, {false, true}).item<double>() == seg_loss(logits.slice(0, 1, 2), t1, {true}).item<double>());
}

TEST_CASE("seg_loss ignores unsupervised logits entirely") {
    torch::manual_seed(1);
    auto logits = torch::randn({4, 3, 4, 4, 4});
    auto t = (torch::rand({2, 3, 4, 4, 4}) > 0.5).to(torch::kFloat32);
    const std::vector<bool> mask{true, true, false, false};
    const double a = seg_loss(logits, t, mask).item<double>();
    auto other = logits.clone();
    other.slice(0, 2, 4) = torch::randn({2, 3, 4, 4, 4}) * 50;
    CHECK(seg_loss(other, t, mask).item<double>() == a);
    auto swapped = logits.index_select(0, torch::tensor({0, 1, 3, 2}));
    CHECK(seg_loss(swapped, t, mask).item<double>() == a);
}

TEST_CASE("deep supervision weights halve per scale and sum to one") {
    const auto w = deep_supervision_weights(4);
    CHECK(w[0] == doctest::Approx(8.0 / 15.0));
    CHECK(w[3] == doctest::Approx(1.0 / 15.0));
    CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0));
    // No auxiliary outputs reduces to the plain loss.
    auto logits = torch::randn({1, 3, 4, 4, 4});
    auto t = (torch::rand({1, 3, 4, 4, 4}) > 0.5).to(torch::kFloat32);
    CHECK(deep_supervision_seg_loss(logits, {}, t, all_true(1)).item<double>() ==
          seg_loss(logits, t, all_true(1)).item<double>());
}

TEST_CASE("domain_loss: uniform logits, confident logits and direct oracle") {
    const auto labels = torch::tensor({1.0, 0.0, 0.0, 1.0}, torch::kFloat64).reshape({2, 2});
    CHECK(domain_loss(torch::zeros({2, 2}, torch::kFloat64), labels).item<double>() == doctest::Approx(std::log(2.0)));
    const auto conf = torch::tensor({20.0, -20.0}, torch::kFloat64).reshape({1, 2});
    CHECK(domain_loss(conf, labels.slice(0, 0, 1)).item<double>() < 1e-8);
    torch::manual_seed(2);
    const auto logits = torch::randn({6, 2}, torch::kFloat64);
    const auto lab = torch::tensor({1., 0., 0., 1., 1., 0., 1., 0., 0., 1., 0., 1.}, torch::kFloat64).reshape({6, 2});
    double expect = 0.0;
    for (int i = 0; i < 6; ++i) {
        const double a = logits[i][0].item<double>(), b = logits[i][1].item<double>();
        const double lse = std::log(std::exp(a) + std::exp(b));
        expect += -(lab[i][0].item<double>() * (a - lse) + lab[i][1].item<double>() * (b - lse));
    }
    CHECK(domain_loss(logits, lab).item<double>() == doctest::Approx(expect / 6).epsilon(1e-12));
    CHECK_THROWS_AS(domain_loss(torch::zeros({2, 3}), labels), ShapeError);
}

TEST_CASE("total_loss decomposition") {
    LossWeights w;
    const auto b = total_loss(1.0, 0.5, w);
    CHECK(b.l_total == doctest::Approx(1.005).epsilon(1e-15));
    w.lambda = 0.0;
    CHECK(total_loss(0.7, 123.0, w).l_total == 0.7);
}

TEST_CASE("alpha schedule and learning rate") {
    AlphaSchedule s;
    CHECK(alpha_at(0, s) == 0.0);
    CHECK(alpha_at(100, s) == 0.0);
    CHECK(alpha_at(225, s) == 1.5);
    CHECK(alpha_at(350, s) == 3.0);
    CHECK(alpha_at(500, s) == 3.0);
    for (int e = 0; e < 500; ++e) {
        CHECK(alpha_at(e + 1, s) >= alpha_at(e, s));
        CHECK(alpha_at(e + 1, s) - alpha_at(e, s) <= 3.0 / 250 + 1e-12);
    }
    OptimConfig o;
    CHECK(lr_at(0.0, o) == 0.01);
    CHECK(lr_at(1.0, o) == doctest::Approx(0.01 / std::pow(11.0, 0.75)).epsilon(1e-14));
    AlphaSchedule bad;
    bad.e_max = 50;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("strategy catalogue") {
    const TrainConfig cfg;
    CHECK(strategy_names().size() == 12);
    const auto s3 = make_strategy("3", cfg);
    CHECK(s3.datasets.source_labels);
    CHECK(s3.datasets.target_labels);
    CHECK(s3.deep_supervision);
    CHECK_FALSE(make_strategy("3s", cfg).deep_supervision);
    const auto u = make_strategy("uda", cfg);
    CHECK(u.adversarial());
    CHECK_FALSE(u.datasets.target_labels);
    CHECK(u.datasets.target_images);
    const auto s7 = make_strategy("7", cfg);
    CHECK(s7.requires_checkpoint);
    CHECK(*s7.lr_override == doctest::Approx(0.001));
    CHECK(*s7.epochs_override == 100);
    CHECK_THROWS_AS(make_strategy("9", cfg), ConfigError);
    CHECK_THROWS_AS(make_strategy("4s", cfg), ConfigError);
}

TEST_CASE("parameter groups") {
    CHECK(parameter_group("encoder.0.first.conv.weight", 4) == "encoder");
    CHECK(parameter_group("encoder.3.second.norm.bias", 4) == "bottleneck");
    CHECK(parameter_group("up.1.weight", 4) == "decoder.1");
    CHECK(parameter_group("decoder.0.first.conv.weight", 4) == "decoder.0");
    CHECK(parameter_group("aux.0.weight", 4) == "decoder.1");
    CHECK(parameter_group("head.bias", 4) == "projection");
    CHECK(group_selected("decoder.2", {"decoder.*"}));
    CHECK_FALSE(group_selected("bottleneck", {"decoder.*", "projection"}));
}

TEST_CASE("GRL scales the domain-loss gradient on encoder parameters by -alpha") {
    torch::manual_seed(4);
    auto cfg = tiny_config();
    auto net = build_backbone(cfg.backbone);
    auto clf = build_classifier(cfg.classifier, net->bottleneck_channels());
    net->to(torch::kFloat64);
    clf->to(torch::kFloat64);
    const auto x = torch::randn({4, 4, 8, 8, 8}, torch::kFloat64);
    const auto labels = torch::tensor({1., 0., 1., 0., 0., 1., 0., 1.}, torch::kFloat64).reshape({4, 2});
    std::vector<torch::Tensor> enc;
    for (const auto& p : net->named_parameters()) {
        if (p.key().rfind("encoder.", 0) == 0) enc.push_back(p.value());
    }
    auto grads = [&](double alpha) {
        auto out = forward_joint(net, clf, x, GrlCoefficient(alpha));
        return torch::autograd::grad({domain_loss(out.domain_logits, labels)}, enc, {}, false, false, true);
    };
    const auto g1 = grads(1.0);
    const auto g3 = grads(3.0);
    const auto g0 = grads(0.0);
    for (std::size_t i = 0; i < enc.size(); ++i) {
        CHECK(torch::allclose(g3[i], 3.0 * g1[i], 1e-12, 1e-15));
        CHECK(g0[i].abs().max().item<double>() == 0.0);
    }
    CHECK(g1[0].abs().max().item<double>() > 0.0);
}

TEST_CASE("strategies 4-8 require a pretrained checkpoint") {
    const auto data = tiny_data();
    const auto cfg = tiny_config();
    for (const char* n : {"4", "5", "6", "7", "8"}) {
        CHECK_THROWS_AS(Trainer(cfg, make_strategy(n, cfg), data.source, data.target), ConfigError);
    }
    CHECK_THROWS_AS(Trainer(cfg, make_strategy("uda", cfg), data.source, {}), ConfigError);
}

TEST_CASE("strategy dataset contracts show up in the batches") {
    const auto data = tiny_data();
    const auto cfg = tiny_config();
    auto check = [&](const char* name, int want_source, int want_target, bool target_labeled) {
        Trainer t(cfg, make_strategy(name, cfg), data.source, data.target);
        for (const auto& b : t.epoch_batches(0)) {
            CHECK(b.source_count() == want_source);
            CHECK(b.size() - b.source_count() == want_target);
            for (std::int64_t i = 0; i < b.size(); ++i) {
                const bool labeled = b.labeled_mask[static_cast<std::size_t>(i)];
                CHECK(labeled == (b.source_mask[static_cast<std::size_t>(i)] || target_labeled));
            }
        }
    };
    check("1", 4, 0, false);
    check("2", 0, 4, true);
    check("3", 2, 2, true);
    check("uda", 2, 2, false);
}

TEST_CASE("training is deterministic for a fixed seed") {
    const auto data = tiny_data();
    const auto cfg = tiny_config(2);
    auto run = [&] {
        TrainerOptions o;
        o.seed = 11;
        Trainer t(cfg, make_strategy("2", cfg), data.source, data.target, o);
        return t.fit();
    };
    const auto a = run();
    const auto b = run();
    REQUIRE(a.size() == 2);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].l_seg == b[i].l_seg);
        CHECK(a[i].l_total == b[i].l_total);
    }
}

TEST_CASE("uda run: decomposition, alpha pass-through and the label guard") {
    const auto data = tiny_data();
    const auto cfg = tiny_config(3);
    TrainerOptions o;
    o.seed = 5;
    o.keep_step_history = true;
    bool guard_active = false;
    bool read_blocked = false;
    o.on_epoch = [&](const EpochRecord&) {
        guard_active = TargetLabelLock::active();
        try {
            (void)data.target[0].labels();
        } catch (const TargetLabelAccessError&) {
            read_blocked = true;
        }
    };
    TargetLabelLock::reset_violations();
    Trainer t(cfg, make_strategy("uda", cfg), data.source, data.target, o);
    const auto& h = t.fit();
    CHECK(guard_active);
    CHECK(read_blocked);
    TargetLabelLock::reset_violations();
    for (const auto& e : h) CHECK(e.alpha == alpha_at(e.epoch, cfg.alpha));
    REQUIRE(t.step_history().size() == 6);
    for (const auto& s : t.step_history()) {
        CHECK(s.l_total == s.l_seg + cfg.loss.lambda * s.l_d);
        CHECK(s.domain_accuracy >= 0.0);
        CHECK(s.domain_accuracy <= 1.0);
    }
    CHECK_FALSE(TargetLabelLock::active());
}

TEST_CASE("uda with lambda 0 follows the source-only trajectory on the same source items") {
    const auto data = tiny_data();
    auto cfg = tiny_config(2);
    cfg.loss.lambda = 0.0;
    TrainerOptions o;
    o.seed = 9;
    Trainer uda(cfg, make_strategy("uda", cfg), data.source, data.target, o);
    Trainer src(cfg, make_strategy("1s", cfg), data.source, data.target, o);
    for (int epoch = 0; epoch < 2; ++epoch) {
        for (const auto& b : uda.epoch_batches(epoch)) {
            std::vector<std::int64_t> items;
            for (std::int64_t i = 0; i < b.size(); ++i) {
                if (b.source_mask[static_cast<std::size_t>(i)]) items.push_back(i);
            }
            const auto ru = uda.step(b, epoch);
            const auto rs = src.step(select_items(b, items), epoch);
            CHECK(ru.l_seg == rs.l_seg);
            CHECK(ru.l_total == rs.l_total);
        }
    }
}

TEST_CASE("target payloads do not affect the segmentation loss") {
    const auto data = tiny_data();
    const auto cfg = tiny_config();
    Trainer t(cfg, make_strategy("uda", cfg), data.source, data.target, {.seed = 2});
    auto batch = t.epoch_batches(0).front();
    auto& net = t.backbone();
    torch::NoGradGuard ng;
    auto loss_of = [&](const Batch& b) {
        return seg_loss(net->forward(b.patches).seg_logits, b.seg_targets, b.labeled_mask).item<double>();
    };
    const double base = loss_of(batch);
    auto permuted = batch;
    permuted.patches = batch.patches.index_select(0, torch::tensor({0, 1, 3, 2}));
    CHECK(loss_of(permuted) == base);
    permuted.patches = batch.patches.clone();
    permuted.patches.slice(0, 2, 4).normal_();
    CHECK(loss_of(permuted) == base);
}

TEST_CASE("strategy 5 trains only the projection; frozen weights stay bit-identical") {
    const auto data = tiny_data();
    const auto cfg = tiny_config(1);
    TempDir dir("s5");
    {
        TrainerOptions o;
        o.out_dir = dir.path() / "s1";
        Trainer pre(cfg, make_strategy("1", cfg), data.source, data.target, o);
        pre.fit();
    }
    TrainerOptions o;
    o.pretrained_checkpoint = dir.path() / "s1" / "checkpoint_final.pt";
    Trainer t(cfg, make_strategy("5", cfg), data.source, data.target, o);
    CHECK(count_parameters(*t.backbone(), true) == 4 * 3 + 3);
    const auto before = snapshot(t.backbone());
    t.fit();
    const auto after = snapshot(t.backbone());
    for (const auto& [name, v] : before) {
        if (parameter_group(name, cfg.backbone.n_stages) == "projection") {
            CHECK_FALSE(torch::equal(v, after.at(name)));
        } else {
            CHECK(torch::equal(v, after.at(name)));
        }
    }
}

TEST_CASE("resumed training reproduces the uninterrupted history") {
    const auto data = tiny_data();
    const auto cfg = tiny_config(3);
    TempDir dir("resume");
    TrainerOptions full;
    full.seed = 21;
    full.out_dir = dir.path() / "full";
    const auto reference = Trainer(cfg, make_strategy("uda", cfg), data.source, data.target, full).fit();

    TrainerOptions cut = full;
    cut.out_dir = dir.path() / "cut";
    cut.on_epoch = [](const EpochRecord& e) {
        if (e.epoch == 1) throw std::runtime_error("interrupted");
    };
    CHECK_THROWS(Trainer(cfg, make_strategy("uda", cfg), data.source, data.target, cut).fit());
    CHECK(read_checkpoint_meta(dir.path() / "cut" / "checkpoint_latest.pt").epochs_completed == 1);

    cut.on_epoch = nullptr;
    cut.resume = true;
    Trainer resumed(cfg, make_strategy("uda", cfg), data.source, data.target, cut);
    CHECK(resumed.epochs_completed() == 1);
    const auto h = resumed.fit();
    REQUIRE(h.size() == reference.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        CHECK(h[i].l_seg == reference[i].l_seg);
        CHECK(h[i].l_d == reference[i].l_d);
        CHECK(h[i].domain_accuracy == reference[i].domain_accuracy);
    }
    const auto csv = read_history_csv(dir.path() / "cut" / "history.csv");
    REQUIRE(csv.size() == 3);
    CHECK(csv[2].l_total == h[2].l_total);
    CHECK(std::filesystem::exists(dir.path() / "cut" / "config.resolved.json"));
}

TEST_CASE("non-finite loss aborts with a diagnostic dump") {
    const auto data = tiny_data();
    const auto cfg = tiny_config();
    TempDir dir("diverge");
    TrainerOptions o;
    o.out_dir = dir.path();
    Trainer t(cfg, make_strategy("uda", cfg), data.source, data.target, o);
    auto b = t.epoch_batches(0).front();
    b.patches = b.patches.clone();
    b.patches[0][0][0][0][0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(t.step(b, 0), DivergenceError);
    CHECK(std::filesystem::exists(dir.path() / fmt::format("divergence_epoch0_batch{}.json", b.batch_id)));
}

TEST_CASE("checkpoint round trip restores weights and rejects mismatched shapes") {
    const auto data = tiny_data();
    auto cfg = tiny_config(1);
    TempDir dir("ckpt");
    Trainer t(cfg, make_strategy("uda", cfg), data.source, data.target, {.seed = 1});
    t.fit();
    t.save(dir.path() / "c.pt");
    const auto meta = read_checkpoint_meta(dir.path() / "c.pt");
    CHECK(meta.strategy == "uda");
    CHECK(meta.has_classifier);
    auto net = build_backbone(cfg.backbone);
    load_backbone_weights(dir.path() / "c.pt", net);
    const auto a = snapshot(t.backbone());
    const auto b = snapshot(net);
    for (const auto& [k, v] : a) CHECK(torch::equal(v, b.at(k)));
    auto wide = cfg.backbone;
    wide.base_channels = 6;
    auto other = build_backbone(wide);
    CHECK_THROWS_AS(load_backbone_weights(dir.path() / "c.pt", other), ShapeError);
}
