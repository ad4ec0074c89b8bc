#include "daseg/data/preprocess.hpp"

#include <cmath>

namespace daseg {

void zscore_normalize_inplace(Volume& v) {
    for (std::int64_t c = 0; c < v.channels; ++c) {
        auto ch = v.channel(c);
        double sum = 0.0;
        std::int64_t n = 0;
        for (const float x : ch) {
            if (x != 0.0f) {
                sum += x;
                ++n;
            }
        }
        if (n == 0) throw DataError("channel " + std::to_string(c) + " has no nonzero voxels");
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (const float x : ch) {
            if (x != 0.0f) ss += (x - mean) * (x - mean);
        }
        const double sd = std::sqrt(ss / static_cast<double>(n));
        if (!(sd > 0.0)) throw DataError("channel " + std::to_string(c) + " is constant over its nonzero voxels");
        for (float& x : ch) {
            if (x != 0.0f) x = static_cast<float>((x - mean) / sd);
        }
    }
}

Case zscore_normalize(Case c) {
    try {
        zscore_normalize_inplace(c.volume());
    } catch (const DataError& e) {
        throw DataError("case '" + c.id() + "': " + e.what());
    }
    return c;
}

}  // namespace daseg
