#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amp/label_map.hpp"
#include "amp/protocol.hpp"
#include "amp/tensor.hpp"

namespace amp {

// Deterministic 20-class shapes benchmark. Every class has its own color band
// and a class-tied background style, so held-out classes come with background
// appearance unseen during pretraining.
struct GenSpec {
    uint64_t seed = 1;
    int image_size = 64;
    int items_per_class = 30;
    int num_classes = 20;
    int background_styles = 4;
    int max_distractors = 2;
};

struct VideoSpec {
    uint64_t seed = 1;
    int image_size = 64;
    int frames = 60;
    Real drift = 0.0;    // per-frame foreground/background color shift
    int motion_x = 0;    // per-frame translation in pixels (wraps at edges)
    int motion_y = 0;
};

// Writes img_<class>_<idx>.ppm / lbl_<class>_<idx>.pgm plus manifest.tsv into
// out_dir and returns the manifest's dataset.
Dataset gen_dataset(const GenSpec& spec, const std::string& out_dir);

struct VideoSequence {
    std::vector<Tensor3> frames;
    std::vector<LabelMap> ground_truth;
};

VideoSequence gen_video(const VideoSpec& spec, int class_id);

}  // namespace amp
