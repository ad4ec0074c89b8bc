#pragma once

#include <filesystem>
#include <vector>

#include "daseg/grid.hpp"

namespace daseg::nifti {

/// Single-volume NIfTI-1 image. Voxels are stored as grid(i, j, k) with k contiguous,
/// i.e. the file's first axis becomes the grid's first (slowest) axis.
struct Image {
    Shape3 dims{0, 0, 0};
    Spacing3 spacing{1.0, 1.0, 1.0};
    std::vector<float> data;
};

enum class StorageType { uint8, int16, float32 };

/// Reads .nii or .nii.gz (either byte order). Applies scl_slope/scl_inter when set.
/// Only the first 3D volume is read from 4D files.
Image read(const std::filesystem::path& path);

/// Writes .nii.gz when the extension is ".gz", plain .nii otherwise.
void write(const std::filesystem::path& path, const Image& img, StorageType storage = StorageType::float32);

}  // namespace daseg::nifti
