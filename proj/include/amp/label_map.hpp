#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace amp {

// Per-pixel class ids; 255 marks pixels excluded from loss and metrics.
struct LabelMap {
    static constexpr uint8_t kIgnore = 255;

    int height = 0;
    int width = 0;
    std::vector<uint8_t> labels;

    LabelMap() = default;
    LabelMap(int h, int w, uint8_t fill = 0)
        : height(h), width(w), labels(static_cast<size_t>(h) * w, fill) {
        if (h <= 0 || w <= 0)
            throw std::invalid_argument("LabelMap: dimensions must be positive");
    }

    uint8_t& at(int y, int x) { return labels[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int y, int x) const { return labels[static_cast<size_t>(y) * width + x]; }

    bool operator==(const LabelMap& o) const {
        return height == o.height && width == o.width && labels == o.labels;
    }
};

}  // namespace amp
