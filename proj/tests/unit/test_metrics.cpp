#include "support/doctest_torch.hpp"

#include <cmath>
#include <random>

#include "../support/oracles.hpp"
#include "daseg/error.hpp"
#include "daseg/eval/metrics.hpp"

using namespace daseg;
using daseg::testing::brute_hd95;
using daseg::testing::random_mask;
using daseg::testing::set_dice;

TEST_CASE("dice: identical, disjoint and empty masks") {
    Mask a({4, 4, 4}, 0), b({4, 4, 4}, 0);
    CHECK(dice_score(a, b) == 1.0);
    a(1, 1, 1) = 1;
    CHECK(dice_score(a, a) == 1.0);
    b(2, 2, 2) = 1;
    CHECK(dice_score(a, b) == 0.0);
    CHECK(dice_score(a, Mask({4, 4, 4}, 0)) == 0.0);
}

TEST_CASE("dice matches set counting on random 8^3 masks and is symmetric") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 50; ++i) {
        const auto a = random_mask({8, 8, 8}, 0.3, rng);
        const auto b = random_mask({8, 8, 8}, 0.4, rng);
        CHECK(dice_score(a, b) == set_dice(a, b));
        CHECK(dice_score(a, b) == dice_score(b, a));
    }
}

TEST_CASE("dice and hd95 reject shape mismatch") {
    CHECK_THROWS_AS(dice_score(Mask({2, 2, 2}, 0), Mask({2, 2, 3}, 0)), ShapeError);
    CHECK_THROWS_AS(hd95(Mask({2, 2, 2}, 0), Mask({2, 2, 3}, 0), {1, 1, 1}), ShapeError);
}

TEST_CASE("hd95 of single voxels offset by (3,0,0) is 3") {
    Mask a({8, 8, 8}, 0), b({8, 8, 8}, 0);
    a(1, 4, 4) = 1;
    b(4, 4, 4) = 1;
    CHECK(hd95(a, b, {1, 1, 1}) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(hd95(a, b, {2, 1, 1}) == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("hd95 empty conventions") {
    Mask e({5, 5, 5}, 0), f({5, 5, 5}, 0);
    f(2, 2, 2) = 1;
    CHECK(hd95(e, e, {1, 1, 1}) == 0.0);
    CHECK(hd95(e, f, {1, 1, 1}) == kDefaultHd95Sentinel);
    CHECK(hd95(f, e, {1, 1, 1}, 99.0) == 99.0);
    CHECK(hd95(f, f, {1, 1, 1}) == 0.0);
}

TEST_CASE("hd95 matches the all-pairs oracle on random masks, anisotropic spacing") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> ext(2, 12);
    for (int i = 0; i < 60; ++i) {
        const Shape3 s{ext(rng), ext(rng), ext(rng)};
        const Spacing3 sp{1.0 + 0.5 * (i % 3), 1.0, 0.75};
        const auto a = random_mask(s, 0.2, rng);
        const auto b = random_mask(s, 0.25, rng);
        CHECK(std::abs(hd95(a, b, sp) - brute_hd95(a, b, sp, kDefaultHd95Sentinel)) <= 1e-6);
    }
}

TEST_CASE("hd95 is symmetric and translation invariant") {
    std::mt19937_64 rng(3);
    Mask a({16, 16, 16}, 0), b({16, 16, 16}, 0);
    for (int z = 4; z < 8; ++z)
        for (int y = 4; y < 9; ++y)
            for (int x = 3; x < 7; ++x) a(z, y, x) = 1;
    for (int z = 5; z < 9; ++z)
        for (int y = 3; y < 7; ++y)
            for (int x = 4; x < 9; ++x) b(z, y, x) = 1;
    const double d = hd95(a, b, {1, 1, 1});
    CHECK(d == hd95(b, a, {1, 1, 1}));
    Mask a2({16, 16, 16}, 0), b2({16, 16, 16}, 0);
    for (std::int64_t z = 0; z + 3 < 16; ++z)
        for (std::int64_t y = 0; y + 2 < 16; ++y)
            for (std::int64_t x = 0; x + 1 < 16; ++x) {
                a2(z + 3, y + 2, x + 1) = a(z, y, x);
                b2(z + 3, y + 2, x + 1) = b(z, y, x);
            }
    CHECK(hd95(a2, b2, {1, 1, 1}) == doctest::Approx(d).epsilon(1e-12));
}

TEST_CASE("squared distance transform against brute force") {
    std::mt19937_64 rng(5);
    const auto m = random_mask({6, 7, 5}, 0.05, rng);
    const Spacing3 sp{1.5, 1.0, 0.5};
    const auto dt = squared_distance_transform(m, sp);
    for (std::int64_t z = 0; z < 6; ++z)
        for (std::int64_t y = 0; y < 7; ++y)
            for (std::int64_t x = 0; x < 5; ++x) {
                double best = INFINITY;
                for (std::int64_t c = 0; c <= 6 * 7 * 5 - 1; ++c) {
                    if (!m[c]) continue;
                    const auto cz = c / 35, cy = (c / 5) % 7, cx = c % 5;
                    const double d = std::pow((z - cz) * sp[0], 2) + std::pow((y - cy) * sp[1], 2) +
                                     std::pow((x - cx) * sp[2], 2);
                    best = std::min(best, d);
                }
                CHECK(dt(z, y, x) == doctest::Approx(best).epsilon(1e-12));
            }
    CHECK(std::isinf(squared_distance_transform(Mask({3, 3, 3}, 0), sp)(1, 1, 1)));
}

TEST_CASE("surface voxels: foreground with a background or out-of-volume 6-neighbour") {
    Mask m({5, 5, 5}, 0);
    for (int z = 1; z < 4; ++z)
        for (int y = 1; y < 4; ++y)
            for (int x = 1; x < 4; ++x) m(z, y, x) = 1;
    const auto s = surface_voxels(m);
    CHECK(count_nonzero(s) == 26);
    CHECK(s(2, 2, 2) == 0);
    Mask full({2, 2, 2}, 1);
    CHECK(count_nonzero(surface_voxels(full)) == 8);
}

TEST_CASE("percentile uses linear interpolation") {
    CHECK(percentile({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
    CHECK(percentile({0, 10}, 0.95) == doctest::Approx(9.5));
    CHECK(percentile({4}, 0.95) == 4.0);
}
