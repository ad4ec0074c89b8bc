#include "daseg/grid.hpp"

#include <algorithm>

namespace daseg {

std::string to_string(const Shape3& s) {
    return "[" + std::to_string(s[0]) + ", " + std::to_string(s[1]) + ", " + std::to_string(s[2]) + "]";
}

std::int64_t count_nonzero(const Mask& m) {
    const auto v = m.values();
    return static_cast<std::int64_t>(std::count_if(v.begin(), v.end(), [](std::uint8_t b) { return b != 0; }));
}

}  // namespace daseg
