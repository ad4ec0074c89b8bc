#pragma once

#include <limits>
#include <span>
#include <vector>

#include "daseg/grid.hpp"

namespace daseg {

/// HD95 reported when exactly one of the two masks is empty (volume diagonal of a 240x240x155 mm grid).
inline constexpr double kDefaultHd95Sentinel = 373.13;

/// 2|A∩B| / (|A| + |B|); 1 when both masks are empty.
double dice_score(const Mask& pred, const Mask& gt);

/// Foreground voxels with at least one background (or out-of-volume) 6-neighbour.
Mask surface_voxels(const Mask& m);

/// Squared Euclidean distance (mm^2, spacing-aware) from every voxel to the nearest nonzero
/// voxel of `features`. Exact separable transform; +inf everywhere when there are no features.
Grid3<double> squared_distance_transform(const Mask& features, const Spacing3& spacing);

/// Linear interpolation between order statistics (q in [0, 1]). Sorts a copy.
double percentile(std::vector<double> values, double q);

/// Symmetric 95th-percentile surface distance in mm.
/// Both empty -> 0; exactly one empty -> `sentinel`.
double hd95(const Mask& pred, const Mask& gt, const Spacing3& spacing, double sentinel = kDefaultHd95Sentinel);

/// Directed distances (mm) from each surface voxel of `from` to the nearest surface voxel of `to`.
std::vector<double> directed_surface_distances(const Mask& from, const Mask& to, const Spacing3& spacing);

}  // namespace daseg
