#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "amp/backbone.hpp"
#include "amp/label_map.hpp"
#include "amp/proxy.hpp"
#include "amp/tensor.hpp"

namespace amp {

constexpr int kNumClasses = 20;     // foreground class universe 1..20
constexpr int kBackgroundId = 0;

struct DatasetItem {
    std::string image_path;
    std::string label_path;
    std::vector<int> classes;  // foreground class ids present
};

struct Dataset {
    std::vector<DatasetItem> items;

    std::vector<int> items_with_class(int class_id) const {
        std::vector<int> out;
        for (size_t i = 0; i < items.size(); ++i)
            for (int c : items[i].classes)
                if (c == class_id) {
                    out.push_back(static_cast<int>(i));
                    break;
                }
        return out;
    }
};

// All images and labels decoded into memory.
struct LoadedDataset {
    std::vector<Tensor3> images;
    std::vector<LabelMap> labels;
};

Dataset read_manifest(const std::string& manifest_path);
void write_manifest(const Dataset& ds, const std::string& manifest_path);
LoadedDataset load_dataset(const Dataset& ds);

std::vector<FeaturePyramid> extract_all(const Backbone& b,
                                        const std::vector<Tensor3>& images);

struct FoldSpec {
    int fold_index = 0;
    std::vector<int> test_classes;   // 5 held-out classes
    std::vector<int> train_classes;  // remaining 15
};

// Episode by dataset index; images and masks are materialized by the runner.
struct Episode {
    int novel_class = 0;
    std::vector<int> support_items;
    int query_item = -1;
};

struct Task {
    std::array<int, 2> novel_classes;
    std::vector<int> batch_items;
};

struct TaskStream {
    uint64_t seed = 0;
    std::vector<int> base_classes;  // 10 ids
    std::vector<Task> tasks;        // 5 tasks x 2 novel classes
};

// Seed 0 yields the canonical ordered split {1..5}, {6..10}, {11..15},
// {16..20}; any other seed shuffles the class order first.
std::vector<FoldSpec> make_folds(uint64_t seed);

// Novel classes cycle round-robin through fold.test_classes; supports and the
// query are drawn without replacement within an episode.
std::vector<Episode> sample_episodes(const Dataset& ds, const FoldSpec& fold,
                                     int k, int count, uint64_t seed);

TaskStream build_task_stream(const Dataset& ds, uint64_t seed,
                             int max_items_per_task = 20);

// Classes visible at task index i: base classes plus tasks 0..i.
std::vector<int> visible_classes(const TaskStream& ts, int task_index);

// Relabels foreground pixels of classes outside `visible` as ignore.
LabelMap restrict_labels(const LabelMap& full, const std::vector<int>& visible);

// Binary foreground mask for one class (ignore pixels count as background).
SoftMask class_mask(const LabelMap& labels, int class_id);
SoftMask complement_mask(const SoftMask& m);

struct PretrainConfig {
    int epochs = 12;
    Real learning_rate = 0.05;
    uint64_t seed = 7;
};

// Gradient-trains a bank of background + train-class rows on the given items
// (labels of other classes become ignore); rows are re-projected to unit norm
// after every step, so the returned rows are L2-normalized.
ClassifierBank pretrain(const std::vector<FeaturePyramid>& pyramids,
                        const std::vector<LabelMap>& labels,
                        const std::vector<int>& item_indices,
                        const std::vector<int>& train_classes,
                        const PretrainConfig& cfg);

Real pixel_accuracy(const LabelMap& pred, const LabelMap& gt);

}  // namespace amp
