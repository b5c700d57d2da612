#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "error.hpp"

namespace spikenerf {

/// Interleaved RGB image with values nominally in [0, 1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> rgb;

    Image() = default;
    Image(int w, int h, float fill = 0.f)
        : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}

    std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
    float& at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    float at(int x, int y, int c) const {
        return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    void clamp01() {
        for (auto& v : rgb) v = std::clamp(v, 0.f, 1.f);
    }
};

} // namespace spikenerf
