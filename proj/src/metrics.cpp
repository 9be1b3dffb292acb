#include "amp/metrics.hpp"

#include <iostream>
#include <stdexcept>

namespace amp {

Real iou(const LabelMap& pred, const LabelMap& gt, int class_id) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw std::invalid_argument("iou: dimension mismatch");
    uint64_t inter = 0, uni = 0;
    for (size_t p = 0; p < gt.labels.size(); ++p) {
        if (gt.labels[p] == LabelMap::kIgnore) continue;
        const bool a = pred.labels[p] == class_id;
        const bool b = gt.labels[p] == class_id;
        inter += a && b;
        uni += a || b;
    }
    if (uni == 0) return 1.0;
    return static_cast<Real>(inter) / static_cast<Real>(uni);
}

EpisodeResult count_episode(const LabelMap& pred, const LabelMap& gt, int novel_class) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw std::invalid_argument("count_episode: dimension mismatch");
    EpisodeResult r;
    r.novel_class = novel_class;
    for (size_t p = 0; p < gt.labels.size(); ++p) {
        if (gt.labels[p] == LabelMap::kIgnore) continue;
        const bool a = pred.labels[p] == novel_class;
        const bool b = gt.labels[p] == novel_class;
        r.fg_intersection += a && b;
        r.fg_union += a || b;
        r.bg_intersection += !a && !b;
        r.bg_union += !a || !b;
    }
    return r;
}

Real miou_foreground(const std::vector<EpisodeResult>& results,
                     const std::vector<int>& classes) {
    if (results.empty()) throw std::invalid_argument("miou_foreground: no results");
    Real sum = 0.0;
    int used = 0;
    for (int c : classes) {
        uint64_t inter = 0, uni = 0;
        for (const auto& r : results) {
            if (r.novel_class != c) continue;
            inter += r.fg_intersection;
            uni += r.fg_union;
        }
        if (uni == 0) {
            std::cerr << "miou_foreground: class " << c << " has zero union, excluded\n";
            continue;
        }
        sum += static_cast<Real>(inter) / static_cast<Real>(uni);
        ++used;
    }
    if (used == 0) throw std::invalid_argument("miou_foreground: no class with nonzero union");
    return sum / used;
}

Real miou_fg_bg(const std::vector<EpisodeResult>& results,
                const std::vector<int>& classes) {
    uint64_t inter = 0, uni = 0;
    for (const auto& r : results) {
        inter += r.bg_intersection;
        uni += r.bg_union;
    }
    const Real bg = uni == 0 ? 1.0 : static_cast<Real>(inter) / static_cast<Real>(uni);
    return 0.5 * (miou_foreground(results, classes) + bg);
}

}  // namespace amp
