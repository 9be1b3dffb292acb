#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "amp/tensor.hpp"

namespace amp {

// Fixed random multi-resolution feature extractor. Three stride-2 conv+relu
// stages give feature levels at 1/2, 1/4 and 1/8 of the input resolution.
struct BackboneSpec {
    uint64_t seed = 0;
    std::array<int, 3> stage_channels = {16, 32, 64};
    int kernel_size = 3;
    int input_channels = 3;
};

struct Backbone {
    BackboneSpec spec;
    std::array<Kernel4, 3> stage_kernels;
};

struct FeaturePyramid {
    std::array<Tensor3, 3> levels;
    int source_height = 0;
    int source_width = 0;
};

// Kernels drawn uniformly from [-a, a], a = sqrt(6 / (fan_in + fan_out)),
// fully determined by spec.seed.
Backbone init_backbone(const BackboneSpec& spec);

// Input height/width must be divisible by 8 and >= 16.
FeaturePyramid extract(const Backbone& b, const Tensor3& image);

void save_backbone(const Backbone& b, const std::string& path);
Backbone load_backbone(const std::string& path);

}  // namespace amp
