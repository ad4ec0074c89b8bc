#pragma once

#include <array>
#include <span>
#include <string_view>

#include "daseg/data/case.hpp"
#include "daseg/grid.hpp"

namespace daseg {

/// Evaluation regions, in report order.
enum class Region { et = 0, tc = 1, wt = 2 };
inline constexpr std::array<Region, 3> kRegions{Region::et, Region::tc, Region::wt};
inline constexpr int kNumRegions = 3;

std::string_view to_string(Region r);
Region region_from_string(std::string_view s);

/// Network output channel of each region: channels are ordered (WT, TC, ET).
constexpr int region_channel(Region r) {
    switch (r) {
        case Region::wt: return 0;
        case Region::tc: return 1;
        case Region::et: return 2;
    }
    return -1;
}

/// Overlapping binary regions; invariant et ⊆ tc ⊆ wt.
struct RegionMasks {
    Mask wt;
    Mask tc;
    Mask et;

    const Mask& get(Region r) const;
    Mask& get(Region r);
    const Shape3& shape() const { return wt.shape(); }
    bool nested() const;
};

/// wt = NC ∪ ED ∪ ET, tc = NC ∪ ET, et = ET.
RegionMasks compose_regions(const LabelMap& labels);

/// Thresholds per-channel logits (channels WT, TC, ET) at sigmoid >= 0.5, then repairs
/// nesting by intersecting tc with wt and et with tc.
RegionMasks binarize_region_logits(std::span<const float> logits, const Shape3& dims);

/// Inverse of compose_regions for nested masks: ET where et, NC where tc \ et, ED where wt \ tc.
LabelMap to_label_map(const RegionMasks& regions);

}  // namespace daseg
