#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "daseg/error.hpp"

namespace daseg {

/// Spatial extent (depth, height, width); the last axis is contiguous in memory.
using Shape3 = std::array<std::int64_t, 3>;
using Spacing3 = std::array<double, 3>;

inline std::int64_t voxel_count(const Shape3& s) { return s[0] * s[1] * s[2]; }

std::string to_string(const Shape3& s);

/// Dense row-major 3D array.
template <typename T>
class Grid3 {
public:
    Grid3() = default;

    explicit Grid3(Shape3 shape, T fill = T{}) : shape_(shape), data_(checked_count(shape), fill) {}

    Grid3(Shape3 shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
        if (static_cast<std::int64_t>(data_.size()) != checked_count(shape_)) {
            throw ShapeError("grid data size " + std::to_string(data_.size()) +
                             " does not match shape " + to_string(shape_));
        }
    }

    const Shape3& shape() const { return shape_; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    std::int64_t index(std::int64_t z, std::int64_t y, std::int64_t x) const {
        return (z * shape_[1] + y) * shape_[2] + x;
    }
    bool contains(std::int64_t z, std::int64_t y, std::int64_t x) const {
        return z >= 0 && y >= 0 && x >= 0 && z < shape_[0] && y < shape_[1] && x < shape_[2];
    }

    T& operator()(std::int64_t z, std::int64_t y, std::int64_t x) { return data_[index(z, y, x)]; }
    const T& operator()(std::int64_t z, std::int64_t y, std::int64_t x) const {
        return data_[index(z, y, x)];
    }
    T& operator[](std::int64_t i) { return data_[i]; }
    const T& operator[](std::int64_t i) const { return data_[i]; }

    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }

    bool operator==(const Grid3&) const = default;

private:
    static std::int64_t checked_count(const Shape3& s) {
        if (s[0] < 0 || s[1] < 0 || s[2] < 0) throw ShapeError("negative grid extent " + to_string(s));
        return voxel_count(s);
    }

    Shape3 shape_{0, 0, 0};
    std::vector<T> data_;
};

/// Binary voxel set stored as 0/1 bytes.
using Mask = Grid3<std::uint8_t>;

std::int64_t count_nonzero(const Mask& m);

}  // namespace daseg
