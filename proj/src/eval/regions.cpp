#include "daseg/eval/regions.hpp"

#include <string>

namespace daseg {

std::string_view to_string(Region r) {
    switch (r) {
        case Region::et: return "ET";
        case Region::tc: return "TC";
        case Region::wt: return "WT";
    }
    return "?";
}

Region region_from_string(std::string_view s) {
    if (s == "ET") return Region::et;
    if (s == "TC") return Region::tc;
    if (s == "WT") return Region::wt;
    throw DataError("unknown region '" + std::string(s) + "'");
}

const Mask& RegionMasks::get(Region r) const {
    switch (r) {
        case Region::et: return et;
        case Region::tc: return tc;
        case Region::wt: return wt;
    }
    return wt;
}

Mask& RegionMasks::get(Region r) { return const_cast<Mask&>(static_cast<const RegionMasks&>(*this).get(r)); }

bool RegionMasks::nested() const {
    if (et.shape() != tc.shape() || tc.shape() != wt.shape()) return false;
    for (std::int64_t i = 0; i < wt.size(); ++i) {
        if ((et[i] && !tc[i]) || (tc[i] && !wt[i])) return false;
    }
    return true;
}

RegionMasks compose_regions(const LabelMap& labels) {
    const auto& g = labels.grid();
    RegionMasks r{Mask(g.shape()), Mask(g.shape()), Mask(g.shape())};
    for (std::int64_t i = 0; i < g.size(); ++i) {
        switch (g[i]) {
            case 0: break;
            case 1: r.wt[i] = r.tc[i] = 1; break;
            case 2: r.wt[i] = 1; break;
            case 3: r.wt[i] = r.tc[i] = r.et[i] = 1; break;
            default: throw DataError("unknown label code " + std::to_string(g[i]));
        }
    }
    return r;
}

RegionMasks binarize_region_logits(std::span<const float> logits, const Shape3& dims) {
    const auto n = voxel_count(dims);
    if (static_cast<std::int64_t>(logits.size()) != kNumRegions * n) {
        throw ShapeError("region logits must hold 3 channels of " + to_string(dims));
    }
    RegionMasks r{Mask(dims), Mask(dims), Mask(dims)};
    const float* wt = logits.data() + region_channel(Region::wt) * n;
    const float* tc = logits.data() + region_channel(Region::tc) * n;
    const float* et = logits.data() + region_channel(Region::et) * n;
    for (std::int64_t i = 0; i < n; ++i) {
        // sigmoid(x) >= 0.5  <=>  x >= 0
        r.wt[i] = wt[i] >= 0.0f;
        r.tc[i] = r.wt[i] && tc[i] >= 0.0f;
        r.et[i] = r.tc[i] && et[i] >= 0.0f;
    }
    return r;
}

LabelMap to_label_map(const RegionMasks& regions) {
    LabelMap out(regions.shape());
    Grid3<std::uint8_t> g(regions.shape(), 0);
    for (std::int64_t i = 0; i < g.size(); ++i) {
        if (regions.et[i]) g[i] = 3;
        else if (regions.tc[i]) g[i] = 1;
        else if (regions.wt[i]) g[i] = 2;
    }
    return LabelMap(std::move(g));
}

}  // namespace daseg
