#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "daseg/grid.hpp"

namespace daseg {

enum class Domain : std::uint8_t { source = 0, target = 1 };

inline constexpr int kNumDomains = 2;

std::string_view to_string(Domain d);
Domain domain_from_string(std::string_view s);
std::array<float, kNumDomains> one_hot(Domain d);

/// Canonical tissue codes. External datasets are remapped onto these on read.
enum class Tissue : std::uint8_t { background = 0, nc = 1, ed = 2, et = 3 };

inline constexpr std::uint8_t kMaxTissueCode = 3;
std::string_view tissue_name(std::uint8_t code);

/// Voxel labels restricted to the canonical legend {0: background, 1: NC, 2: ED, 3: ET}.
class LabelMap {
public:
    LabelMap() = default;
    explicit LabelMap(Shape3 shape) : grid_(shape, 0) {}
    /// Throws DataError if any voxel lies outside the legend.
    explicit LabelMap(Grid3<std::uint8_t> grid);

    const Grid3<std::uint8_t>& grid() const { return grid_; }
    const Shape3& shape() const { return grid_.shape(); }
    std::uint8_t operator()(std::int64_t z, std::int64_t y, std::int64_t x) const { return grid_(z, y, x); }
    void set(std::int64_t z, std::int64_t y, std::int64_t x, Tissue t) {
        grid_(z, y, x) = static_cast<std::uint8_t>(t);
    }
    std::int64_t count(Tissue t) const;

    bool operator==(const LabelMap&) const = default;

private:
    Grid3<std::uint8_t> grid_;
};

/// Multi-channel intensity volume, layout channels x depth x height x width.
struct Volume {
    std::int64_t channels = 0;
    Shape3 dims{0, 0, 0};
    std::vector<float> data;

    Volume() = default;
    Volume(std::int64_t c, Shape3 d) : channels(c), dims(d), data(static_cast<std::size_t>(c * voxel_count(d)), 0.0f) {}

    std::int64_t voxels() const { return voxel_count(dims); }
    std::span<float> channel(std::int64_t c) {
        return std::span<float>(data).subspan(static_cast<std::size_t>(c * voxels()), static_cast<std::size_t>(voxels()));
    }
    std::span<const float> channel(std::int64_t c) const {
        return std::span<const float>(data).subspan(static_cast<std::size_t>(c * voxels()),
                                                    static_cast<std::size_t>(voxels()));
    }
    float& at(std::int64_t c, std::int64_t z, std::int64_t y, std::int64_t x) {
        return data[static_cast<std::size_t>(((c * dims[0] + z) * dims[1] + y) * dims[2] + x)];
    }
    float at(std::int64_t c, std::int64_t z, std::int64_t y, std::int64_t x) const {
        return data[static_cast<std::size_t>(((c * dims[0] + z) * dims[1] + y) * dims[2] + x)];
    }

    bool operator==(const Volume&) const = default;
};

/// One subject. Label reads go through labels(), which honours TargetLabelLock.
class Case {
public:
    Case() = default;
    Case(std::string id, Volume volume, std::optional<LabelMap> labels, Domain domain, Spacing3 spacing);

    const std::string& id() const { return id_; }
    const Volume& volume() const { return volume_; }
    Volume& volume() { return volume_; }
    Domain domain() const { return domain_; }
    const Spacing3& spacing() const { return spacing_; }
    const Shape3& dims() const { return volume_.dims; }

    bool has_labels() const { return labels_.has_value(); }
    /// Label grid extent; metadata only, so it is readable under a TargetLabelLock.
    std::optional<Shape3> label_shape() const {
        return labels_ ? std::optional<Shape3>(labels_->shape()) : std::nullopt;
    }
    /// Throws TargetLabelAccessError for target cases while a TargetLabelLock is alive,
    /// DataError when the case is unlabeled.
    const LabelMap& labels() const;
    void set_labels(std::optional<LabelMap> labels);

    bool operator==(const Case&) const = default;

private:
    std::string id_;
    Volume volume_;
    std::optional<LabelMap> labels_;
    Domain domain_ = Domain::source;
    Spacing3 spacing_{1.0, 1.0, 1.0};
};

/// While at least one lock is alive, reading labels of any target-domain case throws.
/// Every blocked attempt is counted so tests can assert the guard never fired.
class TargetLabelLock {
public:
    TargetLabelLock();
    ~TargetLabelLock();
    TargetLabelLock(const TargetLabelLock&) = delete;
    TargetLabelLock& operator=(const TargetLabelLock&) = delete;

    static bool active();
    static std::uint64_t violations();
    static void reset_violations();
};

/// Sanity checks shared by loaders: positive spacing, matching label dims, constant channels.
void validate_case(const Case& c);
void validate_dataset(std::span<const Case> cases);

}  // namespace daseg
