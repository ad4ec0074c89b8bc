#pragma once

#include "daseg/data/case.hpp"

namespace daseg {

/// Per-channel z-score over the channel's nonzero voxels; zero voxels stay zero.
/// Throws DataError for a channel with no nonzero voxel or zero spread.
Case zscore_normalize(Case c);
void zscore_normalize_inplace(Volume& v);

}  // namespace daseg
