#include "daseg/data/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "daseg/data/preprocess.hpp"
#include "daseg/error.hpp"

namespace daseg {
namespace {

// Mean intensity per tissue (background/tissue, NC, ED, ET) and channel (T1, T1ce, T2, FLAIR).
constexpr std::array<std::array<double, 4>, 4> kMeans{{
    {1.0, 1.0, 1.0, 1.0},
    {0.6, 0.7, 1.8, 1.3},
    {0.85, 1.0, 1.6, 1.8},
    {0.9, 2.2, 1.4, 1.4},
}};

constexpr double kReferenceGrid = 48.0;

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void check_probability(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(fmt::format("{} must lie in [0, 1], got {}", name, p));
}

/// In-place separable Gaussian smoothing with a truncated (3 sigma) kernel and clamped edges.
void gaussian_smooth(std::vector<double>& v, const Shape3& s, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[static_cast<std::size_t>(i + radius)];
    }
    for (auto& w : k) w /= sum;

    std::vector<double> tmp(v.size());
    const std::array<std::int64_t, 3> stride{s[1] * s[2], s[2], 1};
    for (int axis = 0; axis < 3; ++axis) {
        const auto n = s[static_cast<std::size_t>(axis)];
        const auto st = stride[static_cast<std::size_t>(axis)];
        for (std::int64_t z = 0; z < s[0]; ++z)
            for (std::int64_t y = 0; y < s[1]; ++y)
                for (std::int64_t x = 0; x < s[2]; ++x) {
                    const std::array<std::int64_t, 3> p{z, y, x};
                    const auto pos = p[static_cast<std::size_t>(axis)];
                    const auto base = z * stride[0] + y * stride[1] + x - pos * st;
                    double acc = 0.0;
                    for (int i = -radius; i <= radius; ++i) {
                        const auto q = std::clamp<std::int64_t>(pos + i, 0, n - 1);
                        acc += k[static_cast<std::size_t>(i + radius)] * v[static_cast<std::size_t>(base + q * st)];
                    }
                    tmp[static_cast<std::size_t>(z * stride[0] + y * stride[1] + x)] = acc;
                }
        v.swap(tmp);
    }
}

}  // namespace

void SyntheticConfig::validate() const {
    if (n_source < 0 || n_target < 0) throw ConfigError("case counts must be non-negative");
    for (const auto g : grid_size) {
        if (g < 16) throw ConfigError("grid_size " + to_string(grid_size) + " too small to contain a lesion (each axis >= 16)");
    }
    if (channels < 1) throw ConfigError("channels must be positive");
    for (const auto sp : spacing) {
        if (!(sp > 0.0)) throw ConfigError("spacing must be positive");
    }
    check_probability(shift.enhancing_ring_probability_source, "enhancing_ring_probability_source");
    check_probability(shift.enhancing_ring_probability_target, "enhancing_ring_probability_target");
    check_probability(shift.edema_probability_source, "edema_probability_source");
    check_probability(shift.edema_probability_target, "edema_probability_target");
    if (!(shift.size_scale_target > 0.0)) throw ConfigError("size_scale_target must be positive");
    if (!(shift.noise_sigma_source > 0.0) || !(shift.noise_sigma_target > 0.0)) {
        throw ConfigError("noise sigmas must be positive");
    }
    if (!(shift.noise_correlation_target >= 0.0)) throw ConfigError("noise_correlation_target must be >= 0");
    const auto n = static_cast<std::size_t>(channels);
    if (shift.intensity_scale.size() != n || shift.intensity_offset.size() != n) {
        throw ConfigError(fmt::format("intensity_scale and intensity_offset need {} entries", channels));
    }
}

void to_json(nlohmann::json& j, const SyntheticConfig& c) {
    j = {{"n_source", c.n_source},
         {"n_target", c.n_target},
         {"grid_size", c.grid_size},
         {"channels", c.channels},
         {"spacing", c.spacing},
         {"seed", c.seed},
         {"zscore", c.zscore},
         {"shift",
          {{"intensity_scale", c.shift.intensity_scale},
           {"intensity_offset", c.shift.intensity_offset},
           {"enhancing_ring_probability_source", c.shift.enhancing_ring_probability_source},
           {"enhancing_ring_probability_target", c.shift.enhancing_ring_probability_target},
           {"edema_probability_source", c.shift.edema_probability_source},
           {"edema_probability_target", c.shift.edema_probability_target},
           {"size_scale_target", c.shift.size_scale_target},
           {"noise_sigma_source", c.shift.noise_sigma_source},
           {"noise_sigma_target", c.shift.noise_sigma_target},
           {"noise_correlation_target", c.shift.noise_correlation_target}}}};
}

void from_json(const nlohmann::json& j, SyntheticConfig& c) {
    c = SyntheticConfig{};
    const auto known = {"n_source", "n_target", "grid_size", "channels", "spacing", "seed", "zscore", "shift"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("unknown synthetic config key '" + key + "'");
        }
    }
    c.n_source = j.value("n_source", c.n_source);
    c.n_target = j.value("n_target", c.n_target);
    c.grid_size = j.value("grid_size", c.grid_size);
    c.channels = j.value("channels", c.channels);
    c.spacing = j.value("spacing", c.spacing);
    c.seed = j.value("seed", c.seed);
    c.zscore = j.value("zscore", c.zscore);
    if (j.contains("shift")) {
        const auto& s = j.at("shift");
        auto& t = c.shift;
        t.intensity_scale = s.value("intensity_scale", t.intensity_scale);
        t.intensity_offset = s.value("intensity_offset", t.intensity_offset);
        t.enhancing_ring_probability_source = s.value("enhancing_ring_probability_source", t.enhancing_ring_probability_source);
        t.enhancing_ring_probability_target = s.value("enhancing_ring_probability_target", t.enhancing_ring_probability_target);
        t.edema_probability_source = s.value("edema_probability_source", t.edema_probability_source);
        t.edema_probability_target = s.value("edema_probability_target", t.edema_probability_target);
        t.size_scale_target = s.value("size_scale_target", t.size_scale_target);
        t.noise_sigma_source = s.value("noise_sigma_source", t.noise_sigma_source);
        t.noise_sigma_target = s.value("noise_sigma_target", t.noise_sigma_target);
        t.noise_correlation_target = s.value("noise_correlation_target", t.noise_correlation_target);
    }
}

Case generate_synthetic_case(const SyntheticConfig& cfg, Domain domain, std::int64_t index) {
    const bool target = domain == Domain::target;
    const auto& sh = cfg.shift;
    std::mt19937_64 rng(mix(mix(cfg.seed) ^ (target ? 0xa5a5a5a5ULL : 0x5a5a5a5aULL)) ^ static_cast<std::uint64_t>(index));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    const auto& g = cfg.grid_size;
    const double scale = static_cast<double>(*std::min_element(g.begin(), g.end())) / kReferenceGrid;
    const double size = target ? sh.size_scale_target : 1.0;

    std::array<double, 3> radius{};
    for (auto& r : radius) r = uniform(3.5, 6.0) * scale * size;
    std::array<double, 3> centre{};
    for (std::size_t a = 0; a < 3; ++a) {
        const double mid = static_cast<double>(g[a]) / 2.0;
        centre[a] = uniform(mid - 8.0 * scale, mid + 8.0 * scale);
    }
    const bool ring = unit(rng) < (target ? sh.enhancing_ring_probability_target : sh.enhancing_ring_probability_source);
    const bool edema = unit(rng) < (target ? sh.edema_probability_target : sh.edema_probability_source);
    const double ring_width = uniform(1.5, 2.5) * scale;
    const double halo_width = edema ? uniform(3.0, 5.0) * scale : 0.0;

    // Normalised ellipsoid distance of (z, y, x) for radii grown by `pad`.
    auto ellipsoid = [&](std::int64_t z, std::int64_t y, std::int64_t x, double pad) {
        const std::array<double, 3> p{static_cast<double>(z), static_cast<double>(y), static_cast<double>(x)};
        double d = 0.0;
        for (std::size_t a = 0; a < 3; ++a) {
            const double q = (p[a] - centre[a]) / (radius[a] + pad);
            d += q * q;
        }
        return d;
    };

    LabelMap labels(g);
    Grid3<std::uint8_t> brain(g, 0);
    for (std::int64_t z = 0; z < g[0]; ++z)
        for (std::int64_t y = 0; y < g[1]; ++y)
            for (std::int64_t x = 0; x < g[2]; ++x) {
                const std::array<double, 3> p{static_cast<double>(z), static_cast<double>(y), static_cast<double>(x)};
                double b = 0.0;
                for (std::size_t a = 0; a < 3; ++a) {
                    const double q = (p[a] - static_cast<double>(g[a]) / 2.0) / (0.46 * static_cast<double>(g[a]));
                    b += q * q;
                }
                if (b > 1.0) continue;
                brain(z, y, x) = 1;
                if (ellipsoid(z, y, x, 0.0) <= 1.0) {
                    labels.set(z, y, x, Tissue::nc);
                } else if (ring && ellipsoid(z, y, x, ring_width) <= 1.0) {
                    labels.set(z, y, x, Tissue::et);
                } else if (edema && ellipsoid(z, y, x, ring_width + halo_width) <= 1.0) {
                    labels.set(z, y, x, Tissue::ed);
                }
            }

    Volume vol(cfg.channels, g);
    const auto n = voxel_count(g);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> noise(static_cast<std::size_t>(n));
    for (std::int64_t ch = 0; ch < cfg.channels; ++ch) {
        for (auto& v : noise) v = gauss(rng);
        if (target && sh.noise_correlation_target > 0.0) {
            gaussian_smooth(noise, g, sh.noise_correlation_target);
            double ss = 0.0;
            for (const auto v : noise) ss += v * v;
            const double rms = std::sqrt(ss / static_cast<double>(n));
            for (auto& v : noise) v /= rms;
        }
        const double sigma = target ? sh.noise_sigma_target : sh.noise_sigma_source;
        const auto table_ch = static_cast<std::size_t>(ch % 4);
        auto out = vol.channel(ch);
        const auto& lab = labels.grid().values();
        for (std::int64_t i = 0; i < n; ++i) {
            const auto u = static_cast<std::size_t>(i);
            if (!brain.values()[u]) continue;
            const auto tissue = lab[u];
            double mean = kMeans[tissue][table_ch];
            if (target && tissue != 0) {
                const auto c = static_cast<std::size_t>(ch);
                mean = 1.0 + sh.intensity_scale[c] * (mean - 1.0) + sh.intensity_offset[c];
            }
            double v = mean + sigma * noise[u];
            // Keep brain voxels nonzero so the brain mask survives normalisation.
            if (v == 0.0) v = 1e-6;
            out[u] = static_cast<float>(v);
        }
    }
    if (cfg.zscore) zscore_normalize_inplace(vol);

    const auto id = fmt::format("{}_{:04d}", target ? "tgt" : "src", index);
    return Case(id, std::move(vol), std::move(labels), domain, cfg.spacing);
}

SyntheticDataset generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    SyntheticDataset ds;
    ds.source.reserve(static_cast<std::size_t>(cfg.n_source));
    ds.target.reserve(static_cast<std::size_t>(cfg.n_target));
    for (std::int64_t i = 0; i < cfg.n_source; ++i) ds.source.push_back(generate_synthetic_case(cfg, Domain::source, i));
    for (std::int64_t i = 0; i < cfg.n_target; ++i) ds.target.push_back(generate_synthetic_case(cfg, Domain::target, i));
    return ds;
}

}  // namespace daseg
