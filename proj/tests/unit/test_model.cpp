#include "support/doctest_torch.hpp"

#include <set>

#include <torch/torch.h>

#include "daseg/data/case.hpp"
#include "daseg/error.hpp"
#include "daseg/model/backbone.hpp"
#include "daseg/model/classifier.hpp"
#include "daseg/model/grl.hpp"
#include "daseg/model/joint.hpp"

using namespace daseg;

namespace {

BackboneConfig tiny(bool ds = false, int stages = 3) {
    BackboneConfig c;
    c.n_stages = stages;
    c.base_channels = 4;
    c.deep_supervision = ds;
    return c;
}

std::int64_t double_conv_params(std::int64_t cin, std::int64_t c, std::int64_t k) {
    return (cin * c * k + c) + 2 * c + (c * c * k + c) + 2 * c;
}

}  // namespace

TEST_CASE("backbone output shapes, channel plan and deep supervision heads") {
    torch::manual_seed(0);
    auto net = build_backbone(tiny(true, 4));
    CHECK(net->config().stage_channels(0) == 4);
    CHECK(net->config().stage_channels(3) == 32);
    const auto out = net->forward(torch::randn({2, 4, 16, 16, 16}));
    CHECK(out.seg_logits.sizes() == torch::IntArrayRef({2, 3, 16, 16, 16}));
    CHECK(out.bottleneck.sizes() == torch::IntArrayRef({2, 32, 2, 2, 2}));
    REQUIRE(out.aux_logits.size() == 2);
    CHECK(out.aux_logits[0].size(2) == 8);  // finest first
    CHECK(out.aux_logits[1].size(2) == 4);
    auto plain = build_backbone(tiny(false, 4));
    CHECK(plain->forward(torch::randn({1, 4, 8, 8, 8})).aux_logits.empty());
}

TEST_CASE("backbone channel cap and 2D variant") {
    BackboneConfig c = tiny(false, 5);
    c.base_channels = 32;
    c.max_channels = 320;
    CHECK(c.stage_channels(4) == 320);
    BackboneConfig flat = tiny(false, 3);
    flat.spatial_dims = 2;
    auto net = build_backbone(flat);
    CHECK(net->forward(torch::randn({1, 4, 8, 8})).seg_logits.sizes() == torch::IntArrayRef({1, 3, 8, 8}));
}

TEST_CASE("backbone rejects inputs not divisible by the encoder stride") {
    auto net = build_backbone(tiny(false, 3));
    CHECK_THROWS_AS(net->forward(torch::randn({1, 4, 8, 8, 6})), ShapeError);
    CHECK_THROWS_AS(net->forward(torch::randn({1, 4, 2, 2, 2})), ShapeError);
    CHECK_THROWS_AS(net->forward(torch::randn({1, 3, 8, 8, 8})), ShapeError);
    BackboneConfig bad = tiny();
    bad.n_stages = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("backbone parameter count matches the closed form") {
    const auto cfg = tiny(true, 4);
    auto net = build_backbone(cfg);
    std::int64_t expect = 0;
    for (int i = 0; i < cfg.n_stages; ++i) {
        expect += double_conv_params(i == 0 ? 4 : cfg.stage_channels(i - 1), cfg.stage_channels(i), 27);
    }
    for (int i = 0; i + 1 < cfg.n_stages; ++i) {
        const auto ci = cfg.stage_channels(i), cn = cfg.stage_channels(i + 1);
        expect += cn * ci * 8 + ci;                      // transposed conv
        expect += double_conv_params(2 * ci, ci, 27);  // decoder block
    }
    expect += cfg.stage_channels(0) * 3 + 3;  // head
    for (int l = 1; l <= cfg.n_stages - 2; ++l) expect += cfg.stage_channels(l) * 3 + 3;
    CHECK(count_parameters(*net) == expect);
}

TEST_CASE("classifier parameter count matches the closed form and shape guard") {
    ClassifierConfig cc;
    cc.n_blocks = 2;
    cc.conv_channels = 10;
    cc.fc_width = 7;
    auto clf = build_classifier(cc, 16);
    const auto expect = double_conv_params(16, 10, 27) + double_conv_params(10, 10, 27) + (10 * 7 + 7) + (7 * 2 + 2);
    CHECK(count_parameters(*clf) == expect);
    CHECK(clf->forward(torch::randn({3, 16, 4, 4, 4})).sizes() == torch::IntArrayRef({3, 2}));
    CHECK_THROWS_AS(clf->forward(torch::randn({3, 16, 2, 4, 4})), ShapeError);
    // Default sizes: four blocks of 100 channels, FC 100.
    ClassifierConfig defaults;
    CHECK(defaults.n_blocks == 4);
    CHECK(defaults.conv_channels == 100);
    CHECK(defaults.fc_width == 100);
    cc.n_domains = 3;
    CHECK_THROWS_AS(cc.validate(), ConfigError);
}

TEST_CASE("GRL: identity forward, -alpha gradient, alpha validation") {
    torch::Tensor x = torch::randn({3, 4}, torch::kFloat64).requires_grad_(true);
    for (const double alpha : {0.0, 1.0, 2.5}) {
        auto y = grl(x, GrlCoefficient(alpha));
        CHECK(torch::equal(y, x));
        auto w = torch::randn({3, 4}, torch::kFloat64);
        auto g = torch::autograd::grad({(y * w).sum()}, {x})[0];
        CHECK(torch::allclose(g, -alpha * w, 0.0, 1e-15));
    }
    CHECK_THROWS_AS(GrlCoefficient(-0.1), ConfigError);
    CHECK_THROWS_AS(GrlCoefficient(std::nan("")), ConfigError);
}

TEST_CASE("segmentation path does not depend on the classifier head") {
    torch::manual_seed(1);
    auto net = build_backbone(tiny());
    ClassifierConfig cc;
    cc.n_blocks = 1;
    cc.conv_channels = 8;
    cc.fc_width = 8;
    auto clf = build_classifier(cc, net->bottleneck_channels());
    net->eval();
    const auto x = torch::randn({2, 4, 8, 8, 8});
    torch::NoGradGuard ng;
    const auto joint = forward_joint(net, clf, x, GrlCoefficient(2.0));
    const auto alone = net->forward(x);
    CHECK(torch::equal(joint.seg_logits, alone.seg_logits));
    CHECK(joint.domain_logits.sizes() == torch::IntArrayRef({2, 2}));
}

TEST_CASE("parameter names expose the transfer groups") {
    auto net = build_backbone(tiny(true, 4));
    std::set<std::string> prefixes;
    for (const auto& p : net->named_parameters()) prefixes.insert(p.key().substr(0, p.key().find('.', p.key().find('.') + 1)));
    CHECK(prefixes.count("encoder.3"));
    CHECK(prefixes.count("decoder.0"));
    CHECK(prefixes.count("up.2"));
    CHECK(prefixes.count("aux.0"));
    CHECK(prefixes.count("head.weight"));
}

TEST_CASE("sliding-window prediction covers the volume and averages overlaps") {
    torch::manual_seed(2);
    auto net = build_backbone(tiny());
    Volume v(4, {12, 10, 9});
    for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = static_cast<float>((i * 37) % 11) / 11.0f;
    InferenceOptions o;
    o.patch_size = {8, 8, 8};
    const auto logits = predict_logits(net, v, o);
    CHECK(logits.sizes() == torch::IntArrayRef({3, 12, 10, 9}));
    CHECK(torch::isfinite(logits).all().item<bool>());
    // A patch-sized volume reduces to one forward pass.
    Volume w(4, {8, 8, 8});
    for (std::size_t i = 0; i < w.data.size(); ++i) w.data[i] = static_cast<float>(i % 5);
    const auto one = predict_logits(net, w, o);
    net->eval();
    torch::NoGradGuard ng;
    const auto direct = net->forward(torch::from_blob(w.data.data(), {1, 4, 8, 8, 8}).clone()).seg_logits[0];
    CHECK(torch::allclose(one, direct, 1e-5, 1e-5));
}
