#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "amp/protocol.hpp"
#include "amp/segmenter.hpp"
#include "amp/synthdata.hpp"
#include "doctest.h"

using namespace amp;

namespace {

// Small shared dataset on disk, generated once per test binary run.
const Dataset& test_dataset() {
    static Dataset ds = [] {
        GenSpec spec;
        spec.seed = 31;
        spec.items_per_class = 8;
        return gen_dataset(spec, "protocol_synth");
    }();
    return ds;
}

}  // namespace

TEST_CASE("make_folds canonical split and seeded variants") {
    const auto folds = make_folds(0);
    REQUIRE(folds.size() == 4);
    CHECK(folds[0].test_classes == std::vector<int>{1, 2, 3, 4, 5});
    CHECK(folds[3].test_classes == std::vector<int>{16, 17, 18, 19, 20});
    CHECK(folds[0].train_classes.size() == 15);

    std::set<int> all;
    for (const auto& f : folds)
        for (int c : f.test_classes) CHECK(all.insert(c).second);
    CHECK(all.size() == 20);

    const auto again = make_folds(0);
    for (int f = 0; f < 4; ++f) CHECK(again[f].test_classes == folds[f].test_classes);

    const auto seeded = make_folds(77);
    const auto seeded2 = make_folds(77);
    for (int f = 0; f < 4; ++f) CHECK(seeded[f].test_classes == seeded2[f].test_classes);

    // disjoint train/test within every fold
    for (const auto& f : seeded)
        for (int c : f.test_classes)
            CHECK(std::find(f.train_classes.begin(), f.train_classes.end(), c) ==
                  f.train_classes.end());
}

TEST_CASE("sample_episodes round-robin, exclusion, determinism") {
    const Dataset& ds = test_dataset();
    const auto folds = make_folds(0);

    const auto eps = sample_episodes(ds, folds[0], 2, 100, 12345);
    REQUIRE(eps.size() == 100);
    std::map<int, int> per_class;
    for (const auto& e : eps) {
        ++per_class[e.novel_class];
        CHECK(e.support_items.size() == 2);
        CHECK(std::find(e.support_items.begin(), e.support_items.end(), e.query_item) ==
              e.support_items.end());
        std::set<int> uniq(e.support_items.begin(), e.support_items.end());
        CHECK(uniq.size() == e.support_items.size());
        for (int i : e.support_items) {
            const auto& cs = ds.items[i].classes;
            CHECK(std::find(cs.begin(), cs.end(), e.novel_class) != cs.end());
        }
    }
    for (int c : folds[0].test_classes) CHECK(per_class[c] == 20);

    const auto eps2 = sample_episodes(ds, folds[0], 2, 100, 12345);
    for (size_t i = 0; i < eps.size(); ++i) {
        CHECK(eps[i].novel_class == eps2[i].novel_class);
        CHECK(eps[i].support_items == eps2[i].support_items);
        CHECK(eps[i].query_item == eps2[i].query_item);
    }

    CHECK_THROWS(sample_episodes(ds, folds[0], 50, 10, 1));
}

TEST_CASE("build_task_stream structure and label visibility") {
    const Dataset& ds = test_dataset();
    const TaskStream ts = build_task_stream(ds, 21);
    CHECK(ts.base_classes.size() == 10);
    REQUIRE(ts.tasks.size() == 5);

    std::set<int> seen(ts.base_classes.begin(), ts.base_classes.end());
    for (const auto& t : ts.tasks)
        for (int c : t.novel_classes) CHECK(seen.insert(c).second);
    CHECK(seen.size() == 20);

    // visible classes at task i are base + tasks 0..i
    const auto vis0 = visible_classes(ts, 0);
    CHECK(vis0.size() == 12);
    const auto vis4 = visible_classes(ts, 4);
    CHECK(vis4.size() == 20);

    for (const auto& t : ts.tasks) {
        CHECK(!t.batch_items.empty());
        CHECK(t.batch_items.size() <= 20);
        for (int i : t.batch_items) {
            const auto& cs = ds.items[i].classes;
            const bool has = std::find(cs.begin(), cs.end(), t.novel_classes[0]) != cs.end() ||
                             std::find(cs.begin(), cs.end(), t.novel_classes[1]) != cs.end();
            CHECK(has);
        }
    }

    // restrict_labels hides everything outside the visible set
    LabelMap lm(2, 4);
    lm.labels = {0, 3, 9, 255, 18, 1, 2, 20};
    const LabelMap r = restrict_labels(lm, {1, 2, 3});
    CHECK(r.labels[0] == 0);
    CHECK(r.labels[1] == 3);
    CHECK(r.labels[2] == LabelMap::kIgnore);
    CHECK(r.labels[3] == LabelMap::kIgnore);
    CHECK(r.labels[4] == LabelMap::kIgnore);
    CHECK(r.labels[5] == 1);
    CHECK(r.labels[7] == LabelMap::kIgnore);

    // five different seeds give five distinct class-to-task assignments
    std::set<std::vector<int>> streams;
    for (uint64_t s = 1; s <= 5; ++s) {
        const TaskStream t = build_task_stream(ds, s);
        std::vector<int> sig;
        for (const auto& task : t.tasks)
            sig.insert(sig.end(), task.novel_classes.begin(), task.novel_classes.end());
        streams.insert(sig);
    }
    CHECK(streams.size() == 5);
}

TEST_CASE("pretrain determinism, epochs=0, held-out accuracy") {
    const Dataset& ds = test_dataset();
    const LoadedDataset loaded = load_dataset(ds);
    BackboneSpec bspec;
    bspec.seed = 3;
    const Backbone backbone = init_backbone(bspec);
    const auto pyramids = extract_all(backbone, loaded.images);

    const auto folds = make_folds(0);
    // train on fold-0 train classes; hold out the last 2 items per class
    std::vector<int> train_items, heldout_items;
    for (int c : folds[0].train_classes) {
        const auto idx = ds.items_with_class(c);
        train_items.insert(train_items.end(), idx.begin(), idx.end() - 2);
        heldout_items.insert(heldout_items.end(), idx.end() - 2, idx.end());
    }

    PretrainConfig cfg;
    const ClassifierBank bank =
        pretrain(pyramids, loaded.labels, train_items, folds[0].train_classes, cfg);
    CHECK(bank.class_ids.size() == 16);
    CHECK(bank.class_ids[0] == 0);

    const ClassifierBank bank2 =
        pretrain(pyramids, loaded.labels, train_items, folds[0].train_classes, cfg);
    for (int r = 0; r < 3; ++r) CHECK(bank.filters[r].data == bank2.filters[r].data);

    // rows are unit norm after pretraining
    for (int r = 0; r < 3; ++r)
        for (int row = 0; row < bank.filters[r].rows; ++row) {
            double n = 0;
            for (int c = 0; c < bank.filters[r].cols; ++c)
                n += bank.filters[r].at(row, c) * bank.filters[r].at(row, c);
            CHECK(std::abs(std::sqrt(n) - 1.0) < 1e-9);
        }

    // epochs = 0 keeps the seeded init (normalized)
    PretrainConfig zero = cfg;
    zero.epochs = 0;
    const ClassifierBank initial =
        pretrain(pyramids, loaded.labels, train_items, folds[0].train_classes, zero);
    bool changed = false;
    for (int r = 0; r < 3; ++r) changed |= initial.filters[r].data != bank.filters[r].data;
    CHECK(changed);

    double acc_sum = 0;
    for (int i : heldout_items) {
        const LabelMap vis = restrict_labels(loaded.labels[i], bank.class_ids);
        const LabelMap pred = predict(bank, pyramids[i], true).first;
        acc_sum += pixel_accuracy(pred, vis);
    }
    CHECK(acc_sum / heldout_items.size() > 0.80);
}
