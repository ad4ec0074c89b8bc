#include "daseg/eval/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "daseg/error.hpp"

namespace daseg {

namespace {

void require_same_shape(const Mask& a, const Mask& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("mask shapes differ: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
}

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) along one line with
/// sample spacing `h`. f holds squared distances; result written to d.
void edt_1d(const double* f, double* d, std::int64_t n, double h, std::vector<std::int64_t>& v,
            std::vector<double>& z) {
    const double h2 = h * h;
    std::int64_t k = -1;
    v.resize(static_cast<std::size_t>(n));
    z.resize(static_cast<std::size_t>(n) + 1);
    for (std::int64_t q = 0; q < n; ++q) {
        if (f[q] == kInf) continue;
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -kInf;
            z[1] = kInf;
            continue;
        }
        // z[0] = -inf stops the scan, so k never drops below zero.
        double s = 0.0;
        while (true) {
            const auto p = v[static_cast<std::size_t>(k)];
            s = ((f[q] + h2 * static_cast<double>(q * q)) - (f[p] + h2 * static_cast<double>(p * p))) /
                (2.0 * h2 * static_cast<double>(q - p));
            if (s > z[static_cast<std::size_t>(k)]) break;
            --k;
        }
        ++k;
        v[static_cast<std::size_t>(k)] = q;
        z[static_cast<std::size_t>(k)] = s;
        z[static_cast<std::size_t>(k) + 1] = kInf;
    }
    if (k < 0) {
        std::fill(d, d + n, kInf);
        return;
    }
    std::int64_t j = 0;
    for (std::int64_t q = 0; q < n; ++q) {
        while (z[static_cast<std::size_t>(j) + 1] < static_cast<double>(q)) ++j;
        const auto p = v[static_cast<std::size_t>(j)];
        const double dq = static_cast<double>(q - p);
        d[q] = h2 * dq * dq + f[p];
    }
}

}  // namespace

double dice_score(const Mask& pred, const Mask& gt) {
    require_same_shape(pred, gt);
    std::int64_t a = 0, b = 0, both = 0;
    for (std::int64_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] != 0;
        const bool g = gt[i] != 0;
        a += p;
        b += g;
        both += p && g;
    }
    if (a + b == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

Mask surface_voxels(const Mask& m) {
    const auto& s = m.shape();
    Mask out(s, 0);
    constexpr std::int64_t offsets[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
    for (std::int64_t z = 0; z < s[0]; ++z) {
        for (std::int64_t y = 0; y < s[1]; ++y) {
            for (std::int64_t x = 0; x < s[2]; ++x) {
                if (!m(z, y, x)) continue;
                for (const auto& o : offsets) {
                    const auto nz = z + o[0], ny = y + o[1], nx = x + o[2];
                    if (!m.contains(nz, ny, nx) || !m(nz, ny, nx)) {
                        out(z, y, x) = 1;
                        break;
                    }
                }
            }
        }
    }
    return out;
}

Grid3<double> squared_distance_transform(const Mask& features, const Spacing3& spacing) {
    const auto& s = features.shape();
    Grid3<double> g(s, kInf);
    for (std::int64_t i = 0; i < features.size(); ++i) {
        if (features[i]) g[i] = 0.0;
    }
    std::vector<double> line, out;
    std::vector<std::int64_t> v;
    std::vector<double> z;
    // One pass per axis; each pass transforms all lines parallel to that axis.
    for (int axis = 2; axis >= 0; --axis) {
        const std::int64_t n = s[axis];
        line.resize(static_cast<std::size_t>(n));
        out.resize(static_cast<std::size_t>(n));
        const std::int64_t stride = axis == 2 ? 1 : (axis == 1 ? s[2] : s[1] * s[2]);
        const std::int64_t a_n = axis == 0 ? s[1] : s[0];
        const std::int64_t b_n = axis == 2 ? s[1] : s[2];
        for (std::int64_t a = 0; a < a_n; ++a) {
            for (std::int64_t b = 0; b < b_n; ++b) {
                std::int64_t base = 0;
                if (axis == 0) base = a * s[2] + b;
                else if (axis == 1) base = a * s[1] * s[2] + b;
                else base = (a * s[1] + b) * s[2];
                for (std::int64_t i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = g[base + i * stride];
                edt_1d(line.data(), out.data(), n, spacing[static_cast<std::size_t>(axis)], v, z);
                for (std::int64_t i = 0; i < n; ++i) g[base + i * stride] = out[static_cast<std::size_t>(i)];
            }
        }
    }
    return g;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw StatisticsError("percentile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw StatisticsError("percentile rank must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

std::vector<double> directed_surface_distances(const Mask& from, const Mask& to, const Spacing3& spacing) {
    require_same_shape(from, to);
    const auto from_surface = surface_voxels(from);
    const auto dist2 = squared_distance_transform(surface_voxels(to), spacing);
    std::vector<double> d;
    for (std::int64_t i = 0; i < from_surface.size(); ++i) {
        if (from_surface[i]) d.push_back(std::sqrt(dist2[i]));
    }
    return d;
}

double hd95(const Mask& pred, const Mask& gt, const Spacing3& spacing, double sentinel) {
    require_same_shape(pred, gt);
    const bool pred_empty = count_nonzero(pred) == 0;
    const bool gt_empty = count_nonzero(gt) == 0;
    if (pred_empty && gt_empty) return 0.0;
    if (pred_empty || gt_empty) return sentinel;
    const double ab = percentile(directed_surface_distances(pred, gt, spacing), 0.95);
    const double ba = percentile(directed_surface_distances(gt, pred, spacing), 0.95);
    return std::max(ab, ba);
}

}  // namespace daseg
