#include "amp/protocol.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "amp/image_io.hpp"
#include "amp/kernels.hpp"
#include "amp/rng.hpp"
#include "amp/segmenter.hpp"

namespace fs = std::filesystem;

namespace amp {

Dataset read_manifest(const std::string& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw std::runtime_error("read_manifest: cannot open " + manifest_path);
    const fs::path root = fs::path(manifest_path).parent_path();
    Dataset ds;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        DatasetItem item;
        std::string classes;
        if (!std::getline(ss, item.image_path, '\t') ||
            !std::getline(ss, item.label_path, '\t') ||
            !std::getline(ss, classes, '\t'))
            throw std::runtime_error("read_manifest: malformed line: " + line);
        item.image_path = (root / item.image_path).string();
        item.label_path = (root / item.label_path).string();
        std::istringstream cs(classes);
        std::string tok;
        while (std::getline(cs, tok, ',')) item.classes.push_back(std::stoi(tok));
        ds.items.push_back(std::move(item));
    }
    return ds;
}

void write_manifest(const Dataset& ds, const std::string& manifest_path) {
    std::ofstream f(manifest_path);
    if (!f) throw std::runtime_error("write_manifest: cannot open " + manifest_path);
    const fs::path root = fs::path(manifest_path).parent_path();
    for (const auto& item : ds.items) {
        f << fs::path(item.image_path).lexically_relative(root).generic_string() << '\t'
          << fs::path(item.label_path).lexically_relative(root).generic_string() << '\t';
        for (size_t i = 0; i < item.classes.size(); ++i)
            f << (i ? "," : "") << item.classes[i];
        f << '\n';
    }
}

LoadedDataset load_dataset(const Dataset& ds) {
    LoadedDataset out;
    out.images.reserve(ds.items.size());
    out.labels.reserve(ds.items.size());
    for (const auto& item : ds.items) {
        out.images.push_back(read_ppm(item.image_path));
        out.labels.push_back(read_pgm(item.label_path));
    }
    return out;
}

std::vector<FeaturePyramid> extract_all(const Backbone& b,
                                        const std::vector<Tensor3>& images) {
    std::vector<FeaturePyramid> out;
    out.reserve(images.size());
    for (const auto& img : images) out.push_back(extract(b, img));
    return out;
}

std::vector<FoldSpec> make_folds(uint64_t seed) {
    std::vector<int> classes(kNumClasses);
    std::iota(classes.begin(), classes.end(), 1);
    if (seed != 0) {
        Rng rng(seed);
        rng.shuffle(classes);
    }
    std::vector<FoldSpec> folds(4);
    for (int f = 0; f < 4; ++f) {
        folds[f].fold_index = f;
        for (int i = 0; i < kNumClasses; ++i) {
            if (i / 5 == f)
                folds[f].test_classes.push_back(classes[i]);
            else
                folds[f].train_classes.push_back(classes[i]);
        }
    }
    return folds;
}

std::vector<Episode> sample_episodes(const Dataset& ds, const FoldSpec& fold,
                                     int k, int count, uint64_t seed) {
    if (k < 1 || count < 1)
        throw std::invalid_argument("sample_episodes: k and count must be positive");
    Rng rng(seed);
    std::vector<Episode> episodes;
    episodes.reserve(count);
    for (int e = 0; e < count; ++e) {
        const int cls = fold.test_classes[e % fold.test_classes.size()];
        std::vector<int> pool = ds.items_with_class(cls);
        if (static_cast<int>(pool.size()) < k + 1)
            throw std::runtime_error("sample_episodes: class " + std::to_string(cls) +
                                     " has fewer than k+1 items");
        // partial Fisher-Yates: first k+1 entries are a without-replacement draw
        for (int i = 0; i <= k; ++i) {
            const int j = i + rng.uniform_int(0, static_cast<int>(pool.size()) - 1 - i);
            std::swap(pool[i], pool[j]);
        }
        Episode ep;
        ep.novel_class = cls;
        ep.support_items.assign(pool.begin(), pool.begin() + k);
        ep.query_item = pool[k];
        episodes.push_back(std::move(ep));
    }
    return episodes;
}

TaskStream build_task_stream(const Dataset& ds, uint64_t seed, int max_items_per_task) {
    std::vector<int> classes(kNumClasses);
    std::iota(classes.begin(), classes.end(), 1);
    Rng rng(seed);
    rng.shuffle(classes);

    TaskStream ts;
    ts.seed = seed;
    ts.base_classes.assign(classes.begin(), classes.begin() + 10);
    std::sort(ts.base_classes.begin(), ts.base_classes.end());
    for (int t = 0; t < 5; ++t) {
        Task task;
        task.novel_classes = {classes[10 + 2 * t], classes[11 + 2 * t]};
        for (size_t i = 0; i < ds.items.size(); ++i) {
            const auto& cs = ds.items[i].classes;
            const bool hit = std::find(cs.begin(), cs.end(), task.novel_classes[0]) != cs.end() ||
                             std::find(cs.begin(), cs.end(), task.novel_classes[1]) != cs.end();
            if (hit) task.batch_items.push_back(static_cast<int>(i));
            if (static_cast<int>(task.batch_items.size()) >= max_items_per_task) break;
        }
        ts.tasks.push_back(std::move(task));
    }
    return ts;
}

std::vector<int> visible_classes(const TaskStream& ts, int task_index) {
    std::vector<int> out = ts.base_classes;
    for (int t = 0; t <= task_index; ++t)
        for (int c : ts.tasks[t].novel_classes) out.push_back(c);
    std::sort(out.begin(), out.end());
    return out;
}

LabelMap restrict_labels(const LabelMap& full, const std::vector<int>& visible) {
    LabelMap out = full;
    for (auto& v : out.labels) {
        if (v == kBackgroundId || v == LabelMap::kIgnore) continue;
        if (std::find(visible.begin(), visible.end(), static_cast<int>(v)) == visible.end())
            v = LabelMap::kIgnore;
    }
    return out;
}

SoftMask class_mask(const LabelMap& labels, int class_id) {
    SoftMask m(labels.height, labels.width);
    for (size_t p = 0; p < labels.labels.size(); ++p)
        m.weights[p] = labels.labels[p] == class_id ? 1.0 : 0.0;
    return m;
}

SoftMask complement_mask(const SoftMask& m) {
    SoftMask out(m.height, m.width);
    for (size_t p = 0; p < m.weights.size(); ++p) out.weights[p] = 1.0 - m.weights[p];
    return out;
}

ClassifierBank pretrain(const std::vector<FeaturePyramid>& pyramids,
                        const std::vector<LabelMap>& labels,
                        const std::vector<int>& item_indices,
                        const std::vector<int>& train_classes,
                        const PretrainConfig& cfg) {
    if (pyramids.empty() || item_indices.empty())
        throw std::invalid_argument("pretrain: no training items");

    std::vector<int> class_ids{kBackgroundId};
    class_ids.insert(class_ids.end(), train_classes.begin(), train_classes.end());
    std::sort(class_ids.begin() + 1, class_ids.end());

    ClassifierBank bank;
    bank.class_ids = class_ids;
    Rng rng(cfg.seed);
    for (int r = 0; r < 3; ++r) {
        Matrix m(static_cast<int>(class_ids.size()), pyramids[0].levels[r].channels);
        for (auto& v : m.data) v = rng.uniform(-0.05, 0.05);
        bank.filters[r] = std::move(m);
    }

    // Training views: classes outside the bank become ignore, and background
    // pixels are subsampled to ignore so the mean pixel loss is not dominated
    // by the background majority (bias-free unit-norm heads collapse to
    // background-everywhere otherwise).
    constexpr Real kBackgroundKeep = 0.5;
    Rng bg_rng = Rng(cfg.seed).fork(2);
    std::vector<LabelMap> restricted;
    restricted.reserve(item_indices.size());
    std::vector<int> vis = class_ids;  // visible = background + train classes
    for (int i : item_indices) {
        LabelMap view = restrict_labels(labels[i], vis);
        for (auto& l : view.labels)
            if (l == kBackgroundId && bg_rng.uniform() >= kBackgroundKeep)
                l = LabelMap::kIgnore;
        restricted.push_back(std::move(view));
    }

    std::vector<TrainSample> samples;
    for (size_t j = 0; j < item_indices.size(); ++j)
        samples.push_back({&pyramids[item_indices[j]], &restricted[j]});

    // Rows are projected back to unit norm after every step so training is
    // calibrated for the same geometry imprinted unit proxies live in; a
    // single normalization at the end would rescale rows independently and
    // destroy the learned balance against them.
    auto normalize_rows = [](ClassifierBank& b) {
        for (int r = 0; r < 3; ++r) {
            Matrix& m = b.filters[r];
            for (int row = 0; row < m.rows; ++row) {
                Vector v(m.data.begin() + static_cast<size_t>(row) * m.cols,
                         m.data.begin() + static_cast<size_t>(row + 1) * m.cols);
                v = l2_normalize(v);
                std::copy(v.begin(), v.end(),
                          m.data.begin() + static_cast<size_t>(row) * m.cols);
            }
        }
    };

    normalize_rows(bank);
    OptimizerState opt = OptimizerState::for_bank(bank);
    Rng shuffle_rng = Rng(cfg.seed).fork(1);
    constexpr size_t kBatch = 32;
    std::vector<size_t> order(samples.size());
    for (size_t j = 0; j < order.size(); ++j) order[j] = j;
    for (int e = 0; e < cfg.epochs; ++e) {
        // one pass over the items in shuffled minibatches, one step per batch
        shuffle_rng.shuffle(order);
        for (size_t start = 0; start < order.size(); start += kBatch) {
            std::vector<TrainSample> batch;
            for (size_t j = start; j < std::min(order.size(), start + kBatch); ++j)
                batch.push_back(samples[order[j]]);
            auto [stepped, state] = finetune(std::move(bank), batch, cfg.learning_rate,
                                             1, std::move(opt), true);
            bank = std::move(stepped);
            opt = std::move(state);
            normalize_rows(bank);
        }
    }
    return bank;
}

Real pixel_accuracy(const LabelMap& pred, const LabelMap& gt) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw std::invalid_argument("pixel_accuracy: dimension mismatch");
    uint64_t hit = 0, total = 0;
    for (size_t p = 0; p < gt.labels.size(); ++p) {
        if (gt.labels[p] == LabelMap::kIgnore) continue;
        ++total;
        hit += pred.labels[p] == gt.labels[p];
    }
    return total == 0 ? 1.0 : static_cast<Real>(hit) / total;
}

}  // namespace amp
