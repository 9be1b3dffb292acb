// amp: adaptive masked proxy segmentation on a synthetic shapes benchmark.
//
// Subcommands: gen-data, pretrain, fewshot, ablate, continual, video.
// Every run writes metrics.jsonl (deterministic given config + seed) and
// run_meta.json (resolved config + timestamp) into the output directory.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"

#include "amp/experiments.hpp"
#include "amp/image_io.hpp"
#include "amp/metrics.hpp"
#include "amp/protocol.hpp"
#include "amp/segmenter.hpp"
#include "amp/synthdata.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace amp;

namespace {

uint64_t env_seed_or(uint64_t seed) {
    if (const char* s = std::getenv("AMP_SEED")) return std::strtoull(s, nullptr, 10);
    return seed;
}

void write_run_meta(const std::string& out_dir, const json& config) {
    json meta;
    meta["config"] = config;
    meta["timestamp"] = std::chrono::duration_cast<std::chrono::seconds>(
                            std::chrono::system_clock::now().time_since_epoch())
                            .count();
    std::ofstream f(fs::path(out_dir) / "run_meta.json");
    f << meta.dump(2) << "\n";
}

std::ofstream open_metrics(const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream f(fs::path(out_dir) / "metrics.jsonl", std::ios::binary);
    if (!f) throw std::runtime_error("cannot open metrics.jsonl in " + out_dir);
    return f;
}

// ---------------------------------------------------------------- gen-data

int cmd_gen_data(const GenSpec& spec, const std::string& out_dir) {
    const Dataset ds = gen_dataset(spec, out_dir);
    std::cout << (fs::path(out_dir) / "manifest.tsv").string() << "\n";
    std::cout << "items: " << ds.items.size() << "\n";
    return 0;
}

// ---------------------------------------------------------------- pretrain

int cmd_pretrain(const std::string& manifest, const std::string& mode, int fold_index,
                 uint64_t seed, int epochs, Real lr, const std::string& backbone_out,
                 const std::string& bank_out) {
    const Dataset ds = read_manifest(manifest);
    const LoadedDataset loaded = load_dataset(ds);

    BackboneSpec bspec;
    bspec.seed = seed;
    const Backbone backbone = init_backbone(bspec);
    const auto pyramids = extract_all(backbone, loaded.images);

    std::vector<int> train_classes;
    if (mode == "fewshot") {
        train_classes = make_folds(0)[fold_index].train_classes;
    } else if (mode == "continual") {
        train_classes = build_task_stream(ds, seed).base_classes;
    } else {
        throw std::runtime_error("pretrain: mode must be fewshot or continual");
    }

    std::set<int> wanted(train_classes.begin(), train_classes.end());
    std::vector<int> items;
    for (size_t i = 0; i < ds.items.size(); ++i)
        for (int c : ds.items[i].classes)
            if (wanted.count(c)) {
                items.push_back(static_cast<int>(i));
                break;
            }

    PretrainConfig cfg;
    cfg.epochs = epochs;
    cfg.learning_rate = lr;
    cfg.seed = seed;
    const ClassifierBank bank = pretrain(pyramids, loaded.labels, items, train_classes, cfg);

    save_backbone(backbone, backbone_out);
    save_bank(bank, bank_out);
    std::cout << "backbone: " << backbone_out << "\nbank: " << bank_out << "\nclasses:";
    for (int c : bank.class_ids) std::cout << " " << c;
    std::cout << "\n";
    return 0;
}

// ----------------------------------------------------------------- fewshot

json episode_record(size_t index, const EpisodeOutcome& o) {
    json rec;
    rec["episode"] = index;
    rec["class"] = o.counts.novel_class;
    rec["fg_iou"] = o.fg_iou;
    rec["fg_intersection"] = o.counts.fg_intersection;
    rec["fg_union"] = o.counts.fg_union;
    rec["bg_intersection"] = o.counts.bg_intersection;
    rec["bg_union"] = o.counts.bg_union;
    return rec;
}

int cmd_fewshot(const std::string& manifest, const std::string& backbone_path,
                const std::string& bank_path, int fold_index, int k, int episodes,
                uint64_t seed, const FewShotConfig& fscfg, int workers,
                const std::string& out_dir, bool dump_predictions, const json& config) {
    const Workspace ws = load_workspace(manifest, backbone_path);
    const ClassifierBank bank = load_bank(bank_path);
    const FoldSpec fold = make_folds(0)[fold_index];

    for (int c : fold.test_classes)
        if (bank.has(c))
            throw std::runtime_error("fewshot: bank already contains test class " +
                                     std::to_string(c) + " (bank/fold mismatch)");
    for (int r = 0; r < 3; ++r)
        if (bank.filters[r].cols != ws.pyramids[0].levels[r].channels)
            throw std::runtime_error("fewshot: bank/backbone channel mismatch");

    const auto eps = sample_episodes(ws.dataset, fold, k, episodes, seed);
    const auto outcomes = run_episodes(ws, bank, eps, fscfg, workers);

    auto metrics = open_metrics(out_dir);
    for (size_t i = 0; i < outcomes.size(); ++i)
        metrics << episode_record(i, outcomes[i]).dump() << "\n";

    const FewShotSummary sum = summarize_outcomes(outcomes, fold.test_classes);
    json summary;
    summary["summary"] = true;
    summary["episodes"] = outcomes.size();
    summary["k"] = k;
    summary["miou_foreground"] = sum.miou_foreground;
    summary["miou_fg_bg"] = sum.miou_fg_bg;
    summary["aggregation"] = "count_sum_per_class";
    metrics << summary.dump() << "\n";

    if (dump_predictions) {
        const fs::path pred_dir = fs::path(out_dir) / "predictions";
        fs::create_directories(pred_dir);
        for (size_t i = 0; i < outcomes.size(); ++i)
            write_pgm((pred_dir / ("pred_" + std::to_string(i) + ".pgm")).string(),
                      outcomes[i].prediction);
    }

    write_run_meta(out_dir, config);
    std::cout << "miou_foreground: " << sum.miou_foreground
              << "\nmiou_fg_bg: " << sum.miou_fg_bg << "\n";
    return 0;
}

// ------------------------------------------------------------------ ablate

int cmd_ablate(const std::string& manifest, const std::string& backbone_path,
               const std::string& bank_path, int fold_index, int episodes, uint64_t seed,
               int workers, const std::string& out_dir, const json& config) {
    const Workspace ws = load_workspace(manifest, backbone_path);
    const ClassifierBank bank = load_bank(bank_path);
    const FoldSpec fold = make_folds(0)[fold_index];

    struct Cell {
        const char* name;
        int k;
        FewShotConfig cfg;
    };
    const FewShotConfig full;
    FewShotConfig noadapt = full;
    noadapt.adaptation = false;
    FewShotConfig nomulti = full;
    nomulti.multi_res = false;
    FewShotConfig ft = full;
    ft.ft_iterations = 2;
    FewShotConfig ftonly = full;
    ftonly.imprint_novel = false;
    ftonly.adaptation = false;
    ftonly.ft_iterations = 2;
    const std::vector<Cell> cells = {
        {"imprint_adapt_multires_1shot", 1, full}, {"imprint_noadapt_1shot", 1, noadapt},
        {"imprint_nomultires_1shot", 1, nomulti},  {"imprint_5shot", 5, full},
        {"imprint_ft2_5shot", 5, ft},              {"ftonly_5shot", 5, ftonly},
    };

    auto metrics = open_metrics(out_dir);
    for (const auto& cell : cells) {
        const auto eps = sample_episodes(ws.dataset, fold, cell.k, episodes, seed);
        const auto outcomes = run_episodes(ws, bank, eps, cell.cfg, workers);
        const FewShotSummary sum = summarize_outcomes(outcomes, fold.test_classes);
        json rec;
        rec["cell"] = cell.name;
        rec["k"] = cell.k;
        rec["episodes"] = episodes;
        rec["miou_foreground"] = sum.miou_foreground;
        rec["miou_fg_bg"] = sum.miou_fg_bg;
        metrics << rec.dump() << "\n";
        std::cout << cell.name << ": " << sum.miou_foreground << "\n";
    }
    write_run_meta(out_dir, config);
    return 0;
}

// --------------------------------------------------------------- continual

int cmd_continual(const std::string& manifest, const std::string& backbone_path,
                  int num_seeds, uint64_t seed_base, const ContinualConfig& ccfg,
                  const std::string& out_dir, const json& config) {
    const Workspace ws = load_workspace(manifest, backbone_path);

    std::vector<ContinualCurves> all;
    auto metrics = open_metrics(out_dir);
    for (int s = 0; s < num_seeds; ++s) {
        const uint64_t seed = seed_base + s;
        const ContinualCurves curves = run_continual_seed(ws, seed, ccfg);
        for (size_t t = 0; t < curves.imprint.size(); ++t) {
            json rec;
            rec["seed"] = seed;
            rec["task"] = t;
            rec["imprint_miou"] = curves.imprint[t];
            rec["naive_miou"] = curves.naive[t];
            metrics << rec.dump() << "\n";
        }
        all.push_back(curves);
    }

    json summary;
    summary["summary"] = true;
    summary["seeds"] = num_seeds;
    json imp = json::array(), nai = json::array();
    for (size_t t = 0; t < all[0].imprint.size(); ++t) {
        Real si = 0, sn = 0;
        for (const auto& c : all) {
            si += c.imprint[t];
            sn += c.naive[t];
        }
        imp.push_back(si / num_seeds);
        nai.push_back(sn / num_seeds);
    }
    summary["imprint_miou_per_task"] = imp;
    summary["naive_miou_per_task"] = nai;
    metrics << summary.dump() << "\n";
    write_run_meta(out_dir, config);
    std::cout << summary.dump(2) << "\n";
    return 0;
}

// ------------------------------------------------------------------- video

int cmd_video(const VideoSpec& vspec, int class_id, uint64_t backbone_seed, Real alpha,
              const std::string& out_dir, const json& config) {
    const VideoRun adapted = run_video(vspec, class_id, backbone_seed, alpha);
    const VideoRun frozen = run_video(vspec, class_id, backbone_seed, 0.0);

    auto metrics = open_metrics(out_dir);
    Real adapted_sum = 0, frozen_sum = 0;
    for (size_t t = 0; t < adapted.fg_iou.size(); ++t) {
        adapted_sum += adapted.fg_iou[t];
        frozen_sum += frozen.fg_iou[t];
        json rec;
        rec["frame"] = t + 1;
        rec["adapted_fg_iou"] = adapted.fg_iou[t];
        rec["frozen_fg_iou"] = frozen.fg_iou[t];
        metrics << rec.dump() << "\n";
    }
    json summary;
    summary["summary"] = true;
    summary["frames"] = adapted.fg_iou.size();
    summary["alpha"] = alpha;
    summary["adapted_mean_fg_iou"] = adapted_sum / adapted.fg_iou.size();
    summary["frozen_mean_fg_iou"] = frozen_sum / frozen.fg_iou.size();
    summary["skipped_frames"] = adapted.result.skipped_frames;
    metrics << summary.dump() << "\n";
    write_run_meta(out_dir, config);
    std::cout << summary.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive masked proxy few-shot segmentation"};
    app.set_config("--config");
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate the synthetic shapes benchmark");
    GenSpec gspec;
    std::string gen_out = "data";
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--seed", gspec.seed, "generator seed");
    gen->add_option("--size", gspec.image_size, "image size (divisible by 8)");
    gen->add_option("--items-per-class", gspec.items_per_class, "items per class");

    // pretrain
    auto* pre = app.add_subcommand("pretrain", "train base-class heads on frozen features");
    std::string pre_manifest, pre_mode = "fewshot";
    std::string pre_backbone = "backbone.bin", pre_bank = "bank.bin";
    int pre_fold = 0, pre_epochs = 12;
    uint64_t pre_seed = 1;
    Real pre_lr = 0.05;
    pre->add_option("--data", pre_manifest, "dataset manifest")->required();
    pre->add_option("--mode", pre_mode, "fewshot (15 fold-train classes) or continual (10 base)");
    pre->add_option("--fold", pre_fold, "fold index 0..3")->check(CLI::Range(0, 3));
    pre->add_option("--seed", pre_seed, "backbone/init/task-split seed");
    pre->add_option("--epochs", pre_epochs, "training iterations over the joint batch");
    pre->add_option("--lr", pre_lr, "RMSProp learning rate");
    pre->add_option("--backbone-out", pre_backbone, "backbone output file");
    pre->add_option("--bank-out", pre_bank, "classifier bank output file");

    // fewshot
    auto* few = app.add_subcommand("fewshot", "few-shot episode evaluation");
    std::string few_manifest, few_backbone, few_bank, few_out = "fewshot_out";
    int few_fold = 0, few_k = 1, few_episodes = 1000, few_ft = 0, few_workers = 1;
    uint64_t few_seed = 1;
    Real few_alpha = 0.26, few_ft_lr = 7.6e-5;
    bool no_adapt = false, no_multires = false, no_imprint = false, dump_pred = false;
    few->add_option("--data", few_manifest, "dataset manifest")->required();
    few->add_option("--backbone", few_backbone, "backbone file")->required();
    few->add_option("--bank", few_bank, "pretrained bank file")->required();
    few->add_option("--fold", few_fold, "fold index 0..3")->check(CLI::Range(0, 3));
    few->add_option("--k", few_k, "shots per episode");
    few->add_option("--episodes", few_episodes, "episode count");
    few->add_option("--seed", few_seed, "sampling seed");
    few->add_option("--alpha", few_alpha, "background adaptation rate")->check(CLI::Range(0.0, 1.0));
    few->add_option("--ft", few_ft, "fine-tuning iterations");
    few->add_option("--ft-lr", few_ft_lr, "fine-tuning learning rate");
    few->add_option("--workers", few_workers, "episode-parallel workers");
    few->add_flag("--no-adapt", no_adapt, "disable background adaptation");
    few->add_flag("--no-multires", no_multires, "coarsest head only");
    few->add_flag("--no-imprint", no_imprint, "random novel row instead of the proxy");
    few->add_flag("--dump-predictions", dump_pred, "write per-query prediction graymaps");
    few->add_option("--out", few_out, "output directory");

    // ablate
    auto* abl = app.add_subcommand("ablate", "run the imprint/adapt/multi-res ablation grid");
    std::string abl_manifest, abl_backbone, abl_bank, abl_out = "ablate_out";
    int abl_fold = 0, abl_episodes = 200, abl_workers = 1;
    uint64_t abl_seed = 1;
    abl->add_option("--data", abl_manifest, "dataset manifest")->required();
    abl->add_option("--backbone", abl_backbone, "backbone file")->required();
    abl->add_option("--bank", abl_bank, "pretrained bank file")->required();
    abl->add_option("--fold", abl_fold, "fold index 0..3")->check(CLI::Range(0, 3));
    abl->add_option("--episodes", abl_episodes, "episodes per grid cell");
    abl->add_option("--seed", abl_seed, "sampling seed");
    abl->add_option("--workers", abl_workers, "episode-parallel workers");
    abl->add_option("--out", abl_out, "output directory");

    // continual
    auto* con = app.add_subcommand("continual", "incremental task stream vs naive fine-tuning");
    std::string con_manifest, con_backbone, con_out = "continual_out";
    ContinualConfig ccfg;
    int con_seeds = 5;
    uint64_t con_seed_base = 1;
    con->add_option("--data", con_manifest, "dataset manifest")->required();
    con->add_option("--backbone", con_backbone, "backbone file")->required();
    con->add_option("--seeds", con_seeds, "number of task-split seeds");
    con->add_option("--seed", con_seed_base, "first seed");
    con->add_option("--epochs", ccfg.pretrain_epochs, "pretraining iterations");
    con->add_option("--lr", ccfg.pretrain_lr, "pretraining learning rate");
    con->add_option("--alpha", ccfg.alpha, "proxy adaptation rate")->check(CLI::Range(0.0, 1.0));
    con->add_option("--naive-iters", ccfg.naive_iterations, "fine-tuning iterations per task");
    con->add_option("--naive-lr", ccfg.naive_lr, "naive baseline learning rate");
    con->add_option("--out", con_out, "output directory");

    // video
    auto* vid = app.add_subcommand("video", "self-adaptation on a drifting video");
    VideoSpec vspec;
    vspec.drift = 0.010;
    vspec.motion_x = 1;
    int vid_class = 7;
    uint64_t vid_backbone_seed = 1;
    Real vid_alpha = 0.001;
    std::string vid_out = "video_out";
    vid->add_option("--class", vid_class, "target class id")->check(CLI::Range(1, 20));
    vid->add_option("--frames", vspec.frames, "frame count");
    vid->add_option("--drift", vspec.drift, "per-frame appearance drift");
    vid->add_option("--motion-x", vspec.motion_x, "per-frame x translation (pixels)");
    vid->add_option("--motion-y", vspec.motion_y, "per-frame y translation (pixels)");
    vid->add_option("--video-seed", vspec.seed, "video generator seed");
    vid->add_option("--backbone-seed", vid_backbone_seed, "backbone seed");
    vid->add_option("--alpha", vid_alpha, "self-adaptation rate")->check(CLI::Range(0.0, 1.0));
    vid->add_option("--out", vid_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            gspec.seed = env_seed_or(gspec.seed);
            return cmd_gen_data(gspec, gen_out);
        }
        if (*pre) {
            pre_seed = env_seed_or(pre_seed);
            return cmd_pretrain(pre_manifest, pre_mode, pre_fold, pre_seed, pre_epochs,
                                pre_lr, pre_backbone, pre_bank);
        }
        if (*few) {
            few_seed = env_seed_or(few_seed);
            FewShotConfig cfg;
            cfg.alpha_bg = few_alpha;
            cfg.ft_iterations = few_ft;
            cfg.ft_learning_rate = few_ft_lr;
            cfg.multi_res = !no_multires;
            cfg.adaptation = !no_adapt;
            cfg.imprint_novel = !no_imprint;
            cfg.random_row_seed = few_seed;
            json config{{"command", "fewshot"},   {"fold", few_fold},
                        {"k", few_k},             {"episodes", few_episodes},
                        {"seed", few_seed},       {"alpha", few_alpha},
                        {"ft", few_ft},           {"ft_lr", few_ft_lr},
                        {"multi_res", cfg.multi_res}, {"adaptation", cfg.adaptation},
                        {"imprint", cfg.imprint_novel}, {"workers", few_workers}};
            return cmd_fewshot(few_manifest, few_backbone, few_bank, few_fold, few_k,
                               few_episodes, few_seed, cfg, few_workers, few_out,
                               dump_pred, config);
        }
        if (*abl) {
            abl_seed = env_seed_or(abl_seed);
            json config{{"command", "ablate"},
                        {"fold", abl_fold},
                        {"episodes", abl_episodes},
                        {"seed", abl_seed}};
            return cmd_ablate(abl_manifest, abl_backbone, abl_bank, abl_fold, abl_episodes,
                              abl_seed, abl_workers, abl_out, config);
        }
        if (*con) {
            con_seed_base = env_seed_or(con_seed_base);
            json config{{"command", "continual"},
                        {"seeds", con_seeds},
                        {"seed", con_seed_base},
                        {"epochs", ccfg.pretrain_epochs},
                        {"lr", ccfg.pretrain_lr},
                        {"alpha", ccfg.alpha},
                        {"naive_iters", ccfg.naive_iterations},
                        {"naive_lr", ccfg.naive_lr}};
            return cmd_continual(con_manifest, con_backbone, con_seeds, con_seed_base,
                                 ccfg, con_out, config);
        }
        if (*vid) {
            vspec.seed = env_seed_or(vspec.seed);
            json config{{"command", "video"},       {"class", vid_class},
                        {"frames", vspec.frames},   {"drift", vspec.drift},
                        {"motion_x", vspec.motion_x}, {"motion_y", vspec.motion_y},
                        {"video_seed", vspec.seed}, {"backbone_seed", vid_backbone_seed},
                        {"alpha", vid_alpha}};
            return cmd_video(vspec, vid_class, vid_backbone_seed, vid_alpha, vid_out, config);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
