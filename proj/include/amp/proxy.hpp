#pragma once

#include <array>
#include <string>
#include <vector>

#include "amp/backbone.hpp"
#include "amp/tensor.hpp"

namespace amp {

// Per-pixel real weights in [0, 1]; binary masks are the {0, 1} special case.
struct SoftMask {
    int height = 0;
    int width = 0;
    std::vector<Real> weights;

    SoftMask() = default;
    SoftMask(int h, int w, Real fill = 0.0)
        : height(h), width(w), weights(static_cast<size_t>(h) * w, fill) {
        if (h <= 0 || w <= 0)
            throw std::invalid_argument("SoftMask: dimensions must be positive");
    }
    Real& at(int y, int x) { return weights[static_cast<size_t>(y) * width + x]; }
    Real at(int y, int x) const { return weights[static_cast<size_t>(y) * width + x]; }
    Real total() const {
        Real s = 0.0;
        for (Real w : weights) s += w;
        return s;
    }
};

// L2-normalized per-resolution class signature.
struct Proxy {
    int class_id = 0;
    std::array<Vector, 3> vectors;
};

// Bias-free 1x1 filters per resolution, one row per class; class 0 is
// background and always occupies row 0.
struct ClassifierBank {
    std::vector<int> class_ids;
    std::array<Matrix, 3> filters;

    int row_of(int class_id) const {
        for (size_t i = 0; i < class_ids.size(); ++i)
            if (class_ids[i] == class_id) return static_cast<int>(i);
        return -1;
    }
    bool has(int class_id) const { return row_of(class_id) >= 0; }
    int num_classes() const { return static_cast<int>(class_ids.size()); }

    Vector row(int resolution, int row_index) const {
        const Matrix& m = filters[resolution];
        return Vector(m.data.begin() + static_cast<size_t>(row_index) * m.cols,
                      m.data.begin() + static_cast<size_t>(row_index + 1) * m.cols);
    }
};

// Normalized masked average pooling (one masked mean per shot, averaged over
// shots, L2-normalized once). Masks live at source image resolution; feature
// levels are bilinearly upsampled to the mask before pooling.
Proxy nmap(const std::vector<const FeaturePyramid*>& pyramids,
           const std::vector<const SoftMask*>& masks, int class_id);

Proxy nmap(const std::vector<FeaturePyramid>& pyramids,
           const std::vector<SoftMask>& masks, int class_id);

// Appends the proxy as a new class row; the class must not already exist.
ClassifierBank imprint(const ClassifierBank& bank, const Proxy& proxy);

// row <- alpha * proxy + (1 - alpha) * row, no renormalization; the class
// must already exist.
ClassifierBank adapt(const ClassifierBank& bank, const Proxy& proxy, Real alpha);

ClassifierBank adapt_or_imprint(const ClassifierBank& bank, const Proxy& proxy, Real alpha);

void save_bank(const ClassifierBank& bank, const std::string& path);
ClassifierBank load_bank(const std::string& path);

}  // namespace amp
