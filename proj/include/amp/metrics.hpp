#pragma once

#include <cstdint>
#include <vector>

#include "amp/label_map.hpp"
#include "amp/tensor.hpp"

namespace amp {

// Pixel counts for one episode; foreground is the episode's novel class,
// background is its complement. Ignore pixels are excluded from all counts.
struct EpisodeResult {
    int novel_class = 0;
    uint64_t fg_intersection = 0;
    uint64_t fg_union = 0;
    uint64_t bg_intersection = 0;
    uint64_t bg_union = 0;
};

// |pred=c && gt=c| / |pred=c || gt=c| over non-ignore pixels; 1.0 when both
// sets are empty.
Real iou(const LabelMap& pred, const LabelMap& gt, int class_id);

EpisodeResult count_episode(const LabelMap& pred, const LabelMap& gt, int novel_class);

// Count-sum aggregation: per class, IoU of summed counts; then the unweighted
// mean over classes. Classes with zero union are excluded (warning to stderr).
Real miou_foreground(const std::vector<EpisodeResult>& results,
                     const std::vector<int>& classes);

// Mean of the foreground aggregate and the pooled background IoU.
Real miou_fg_bg(const std::vector<EpisodeResult>& results,
                const std::vector<int>& classes);

}  // namespace amp
