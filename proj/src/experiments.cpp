#include "amp/experiments.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <thread>

#include "amp/kernels.hpp"
#include "amp/metrics.hpp"
#include "amp/rng.hpp"

namespace amp {

Workspace load_workspace(const std::string& manifest_path,
                         const std::string& backbone_path) {
    return build_workspace(read_manifest(manifest_path), load_backbone(backbone_path));
}

Workspace build_workspace(Dataset ds, Backbone backbone) {
    Workspace ws;
    ws.dataset = std::move(ds);
    ws.backbone = std::move(backbone);
    ws.loaded = load_dataset(ws.dataset);
    ws.pyramids = extract_all(ws.backbone, ws.loaded.images);
    return ws;
}

EpisodeData materialize(const Workspace& ws, const Episode& ep) {
    EpisodeData data;
    data.novel_class = ep.novel_class;
    for (int i : ep.support_items) {
        data.support_pyramids.push_back(ws.pyramids[i]);
        data.support_fg.push_back(class_mask(ws.loaded.labels[i], ep.novel_class));
    }
    data.query_pyramid = ws.pyramids[ep.query_item];
    const LabelMap& gt = ws.loaded.labels[ep.query_item];
    data.query_gt = LabelMap(gt.height, gt.width);
    for (size_t p = 0; p < gt.labels.size(); ++p)
        data.query_gt.labels[p] =
            gt.labels[p] == ep.novel_class ? static_cast<uint8_t>(ep.novel_class) : 0;
    return data;
}

std::vector<EpisodeOutcome> run_episodes(const Workspace& ws,
                                         const ClassifierBank& base_bank,
                                         const std::vector<Episode>& episodes,
                                         const FewShotConfig& cfg, int workers) {
    std::vector<EpisodeOutcome> outcomes(episodes.size());
    auto run_range = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            FewShotConfig ecfg = cfg;
            ecfg.random_row_seed = cfg.random_row_seed + i;
            outcomes[i] = run_fewshot_episode(base_bank, materialize(ws, episodes[i]), ecfg);
        }
    };
    if (workers <= 1) {
        run_range(0, episodes.size());
        return outcomes;
    }
    std::vector<std::thread> pool;
    const size_t chunk = (episodes.size() + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const size_t b = std::min(episodes.size(), static_cast<size_t>(w) * chunk);
        const size_t e = std::min(episodes.size(), b + chunk);
        if (b < e) pool.emplace_back(run_range, b, e);
    }
    for (auto& t : pool) t.join();
    return outcomes;
}

FewShotSummary summarize_outcomes(const std::vector<EpisodeOutcome>& outcomes,
                                  const std::vector<int>& classes) {
    std::vector<EpisodeResult> results;
    results.reserve(outcomes.size());
    for (const auto& o : outcomes) results.push_back(o.counts);
    return {miou_foreground(results, classes), miou_fg_bg(results, classes)};
}

namespace {

Real eval_tasks_miou(const Workspace& ws, const ClassifierBank& bank,
                     const std::vector<int>& visible,
                     const std::map<int, std::vector<int>>& eval_items) {
    std::vector<EpisodeResult> results;
    std::vector<int> fg_classes;
    for (int c : visible) {
        if (c == kBackgroundId) continue;
        fg_classes.push_back(c);
        EpisodeResult counts;
        counts.novel_class = c;
        for (int item : eval_items.at(c)) {
            const LabelMap pred = predict(bank, ws.pyramids[item], true).first;
            const LabelMap gt = restrict_labels(ws.loaded.labels[item], visible);
            const EpisodeResult r = count_episode(pred, gt, c);
            counts.fg_intersection += r.fg_intersection;
            counts.fg_union += r.fg_union;
        }
        results.push_back(counts);
    }
    return miou_foreground(results, fg_classes);
}

// Proxy for one class pooled over the batch items that contain it; false when
// no batch pixel carries the class.
bool batch_proxy(const Workspace& ws, const std::vector<int>& items,
                 const std::vector<int>& visible, int class_id, Proxy& out) {
    std::vector<const FeaturePyramid*> pyrs;
    std::vector<SoftMask> masks;
    for (int i : items) {
        const LabelMap view = restrict_labels(ws.loaded.labels[i], visible);
        SoftMask m = class_mask(view, class_id);
        if (m.total() <= 0.0) continue;
        pyrs.push_back(&ws.pyramids[i]);
        masks.push_back(std::move(m));
    }
    if (pyrs.empty()) return false;
    std::vector<const SoftMask*> mp;
    mp.reserve(masks.size());
    for (const auto& m : masks) mp.push_back(&m);
    out = nmap(pyrs, mp, class_id);
    return true;
}

}  // namespace

ContinualCurves run_continual_seed(const Workspace& ws, uint64_t seed,
                                   const ContinualConfig& cfg) {
    // fixed eval holdout: the last items of each class never enter task
    // batches or the pretraining set
    std::map<int, std::vector<int>> eval_items;
    std::set<int> held;
    for (int c = 1; c <= kNumClasses; ++c) {
        const auto idx = ws.dataset.items_with_class(c);
        const int n = std::min<int>(cfg.holdout_per_class, static_cast<int>(idx.size()));
        for (size_t i = idx.size() - n; i < idx.size(); ++i) {
            eval_items[c].push_back(idx[i]);
            held.insert(idx[i]);
        }
    }
    Dataset train_ds;
    std::vector<int> orig_index;
    for (size_t i = 0; i < ws.dataset.items.size(); ++i)
        if (!held.count(static_cast<int>(i))) {
            train_ds.items.push_back(ws.dataset.items[i]);
            orig_index.push_back(static_cast<int>(i));
        }

    TaskStream ts = build_task_stream(train_ds, seed);
    for (auto& task : ts.tasks)
        for (auto& item : task.batch_items) item = orig_index[item];

    std::set<int> base(ts.base_classes.begin(), ts.base_classes.end());
    std::vector<int> pretrain_items;
    for (size_t i = 0; i < train_ds.items.size(); ++i)
        for (int c : train_ds.items[i].classes)
            if (base.count(c)) {
                pretrain_items.push_back(orig_index[i]);
                break;
            }

    PretrainConfig pcfg;
    pcfg.epochs = cfg.pretrain_epochs;
    pcfg.learning_rate = cfg.pretrain_lr;
    pcfg.seed = seed;
    const ClassifierBank pretrained =
        pretrain(ws.pyramids, ws.loaded.labels, pretrain_items, ts.base_classes, pcfg);

    ContinualCurves curves;
    ClassifierBank imprint_bank = pretrained;
    ClassifierBank naive_bank = pretrained;
    Rng row_rng = Rng(seed).fork(0xbeef);

    for (int t = 0; t < static_cast<int>(ts.tasks.size()); ++t) {
        const Task& task = ts.tasks[t];
        const std::vector<int> visible = visible_classes(ts, t);

        // imprint arm: NMAP-imprint the novel classes, adapt every other
        // class present in the batch, background included
        std::vector<int> to_update{kBackgroundId};
        for (int c : visible) to_update.push_back(c);
        for (int c : to_update) {
            Proxy proxy;
            if (!batch_proxy(ws, task.batch_items, visible, c, proxy)) continue;
            imprint_bank = adapt_or_imprint(imprint_bank, proxy, cfg.alpha);
        }
        curves.imprint.push_back(eval_tasks_miou(ws, imprint_bank, visible, eval_items));

        // naive arm: random rows for the novel classes, then head fine-tuning
        // on the task batch
        for (int c : task.novel_classes) {
            Proxy random_row;
            random_row.class_id = c;
            for (int r = 0; r < 3; ++r) {
                Vector v(naive_bank.filters[r].cols);
                for (auto& x : v) x = row_rng.uniform(-1.0, 1.0);
                random_row.vectors[r] = l2_normalize(v);
            }
            naive_bank = imprint(naive_bank, random_row);
        }
        std::vector<LabelMap> views;
        views.reserve(task.batch_items.size());
        for (int i : task.batch_items)
            views.push_back(restrict_labels(ws.loaded.labels[i], visible));
        std::vector<TrainSample> samples;
        samples.reserve(views.size());
        for (size_t i = 0; i < views.size(); ++i)
            samples.push_back({&ws.pyramids[task.batch_items[i]], &views[i]});
        OptimizerState opt = OptimizerState::for_bank(naive_bank);
        auto [trained, state] = finetune(std::move(naive_bank), samples, cfg.naive_lr,
                                         cfg.naive_iterations, std::move(opt));
        (void)state;
        naive_bank = std::move(trained);
        curves.naive.push_back(eval_tasks_miou(ws, naive_bank, visible, eval_items));
    }
    return curves;
}

VideoRun run_video(const VideoSpec& vspec, int class_id, uint64_t backbone_seed,
                   Real alpha) {
    BackboneSpec bspec;
    bspec.seed = backbone_seed;
    const Backbone backbone = init_backbone(bspec);
    const VideoSequence seq = gen_video(vspec, class_id);

    const FeaturePyramid p0 = extract(backbone, seq.frames[0]);
    const SoftMask fg0 = class_mask(seq.ground_truth[0], class_id);
    const SoftMask bg0 = complement_mask(fg0);
    ClassifierBank bank;
    bank = imprint(bank, nmap({&p0}, {&bg0}, kBackgroundId));
    bank = imprint(bank, nmap({&p0}, {&fg0}, class_id));

    const std::vector<Tensor3> rest(seq.frames.begin() + 1, seq.frames.end());
    VideoRun run;
    run.result = self_adapt(std::move(bank), backbone, rest, alpha, class_id);
    run.fg_iou.reserve(rest.size());
    for (size_t t = 0; t < rest.size(); ++t)
        run.fg_iou.push_back(iou(run.result.predictions[t], seq.ground_truth[t + 1], class_id));
    return run;
}

}  // namespace amp
