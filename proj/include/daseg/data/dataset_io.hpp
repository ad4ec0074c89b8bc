#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "daseg/data/case.hpp"

namespace daseg {

enum class DatasetLayout { brats_nifti, synthetic_container };

DatasetLayout layout_from_string(std::string_view s);
std::string_view to_string(DatasetLayout layout);

/// File naming and label conventions for `<root>/<case_id>/<file>` NIfTI datasets.
/// A "{id}" token in a file name is replaced by the case id.
struct BratsLayoutOptions {
    std::vector<std::string> modality_files{"t1.nii.gz", "t1ce.nii.gz", "t2.nii.gz", "flair.nii.gz"};
    std::string label_file = "seg.nii.gz";
    /// Volumes larger than this are centre-cropped; smaller ones are rejected.
    std::optional<Shape3> expected_shape = Shape3{240, 240, 155};
    /// External code -> canonical code. BraTS releases use 4 or 3 for ET.
    std::map<int, std::uint8_t> label_remap{{0, 0}, {1, 1}, {2, 2}, {3, 3}, {4, 3}};
};

struct LoadOptions {
    Domain domain = Domain::source;  // brats_nifti only; containers carry their own domain
    BratsLayoutOptions brats;
};

/// Cases sorted by id. Missing modality, unknown label value, or modality shape mismatch is fatal.
std::vector<Case> load_dataset(const std::filesystem::path& root, DatasetLayout layout,
                               const LoadOptions& options = {});

Case load_brats_case(const std::filesystem::path& case_dir, const std::string& case_id,
                     const LoadOptions& options);

// Container format: volume.raw (float32 LE, C x D x H x W), labels.raw (uint8 D x H x W, optional),
// meta.json (dims, channels, spacing, domain, legend).
void write_case_container(const std::filesystem::path& case_dir, const Case& c);
Case read_case_container(const std::filesystem::path& case_dir);
void write_container_dataset(const std::filesystem::path& root, std::span<const Case> cases);

}  // namespace daseg
