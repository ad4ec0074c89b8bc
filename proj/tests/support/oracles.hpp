#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "daseg/data/case.hpp"
#include "daseg/grid.hpp"

namespace daseg::testing {

inline Mask random_mask(const Shape3& s, double density, std::mt19937_64& rng) {
    std::bernoulli_distribution on(density);
    Mask m(s, 0);
    for (auto& v : m.values()) v = on(rng) ? 1 : 0;
    return m;
}

inline std::vector<std::array<std::int64_t, 3>> boundary_points(const Mask& m) {
    std::vector<std::array<std::int64_t, 3>> pts;
    const auto& s = m.shape();
    const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (std::int64_t z = 0; z < s[0]; ++z)
        for (std::int64_t y = 0; y < s[1]; ++y)
            for (std::int64_t x = 0; x < s[2]; ++x) {
                if (!m(z, y, x)) continue;
                bool edge = false;
                for (const auto& o : off) {
                    const auto a = z + o[0], b = y + o[1], c = x + o[2];
                    if (!m.contains(a, b, c) || !m(a, b, c)) edge = true;
                }
                if (edge) pts.push_back({z, y, x});
            }
    return pts;
}

inline double linear_percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// All-pairs surface distance HD95.
inline double brute_hd95(const Mask& a, const Mask& b, const Spacing3& sp, double sentinel) {
    const auto pa = boundary_points(a);
    const auto pb = boundary_points(b);
    if (pa.empty() && pb.empty()) return 0.0;
    if (pa.empty() || pb.empty()) return sentinel;
    auto directed = [&](const auto& from, const auto& to) {
        std::vector<double> d;
        for (const auto& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : to) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) {
                    const double t = static_cast<double>(p[k] - q[k]) * sp[k];
                    s += t * t;
                }
                best = std::min(best, s);
            }
            d.push_back(std::sqrt(best));
        }
        return linear_percentile(d, 0.95);
    };
    return std::max(directed(pa, pb), directed(pb, pa));
}

inline double set_dice(const Mask& a, const Mask& b) {
    std::int64_t na = 0, nb = 0, both = 0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        na += a[i] != 0;
        nb += b[i] != 0;
        both += (a[i] != 0) && (b[i] != 0);
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

inline LabelMap random_labels(const Shape3& s, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> code(0, 3);
    Grid3<std::uint8_t> g(s, 0);
    for (auto& v : g.values()) v = static_cast<std::uint8_t>(code(rng));
    return LabelMap(std::move(g));
}

}  // namespace daseg::testing
