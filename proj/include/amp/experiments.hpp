#pragma once

#include <string>
#include <vector>

#include "amp/protocol.hpp"
#include "amp/segmenter.hpp"
#include "amp/synthdata.hpp"

namespace amp {

// A dataset with its features precomputed once; episodes and task streams
// index into `pyramids` by dataset item index.
struct Workspace {
    Dataset dataset;
    LoadedDataset loaded;
    Backbone backbone;
    std::vector<FeaturePyramid> pyramids;
};

Workspace load_workspace(const std::string& manifest_path,
                         const std::string& backbone_path);
Workspace build_workspace(Dataset ds, Backbone backbone);

EpisodeData materialize(const Workspace& ws, const Episode& ep);

// Episode i runs with random_row_seed = cfg.random_row_seed + i; output order
// is episode order regardless of worker count.
std::vector<EpisodeOutcome> run_episodes(const Workspace& ws,
                                         const ClassifierBank& base_bank,
                                         const std::vector<Episode>& episodes,
                                         const FewShotConfig& cfg, int workers);

struct FewShotSummary {
    Real miou_foreground = 0.0;
    Real miou_fg_bg = 0.0;
};

FewShotSummary summarize_outcomes(const std::vector<EpisodeOutcome>& outcomes,
                                  const std::vector<int>& classes);

struct ContinualConfig {
    int pretrain_epochs = 12;
    Real pretrain_lr = 0.05;
    Real alpha = 0.26;
    int naive_iterations = 5;
    Real naive_lr = 9.06e-5;
    int holdout_per_class = 6;  // eval split, kept out of batches and pretraining
};

struct ContinualCurves {
    std::vector<Real> imprint;  // per-task mIoU over classes seen so far
    std::vector<Real> naive;
};

ContinualCurves run_continual_seed(const Workspace& ws, uint64_t seed,
                                   const ContinualConfig& cfg);

struct VideoRun {
    SelfAdaptResult result;      // over frames 1..N-1; frame 0 seeds the bank
    std::vector<Real> fg_iou;    // per predicted frame
};

VideoRun run_video(const VideoSpec& vspec, int class_id, uint64_t backbone_seed,
                   Real alpha);

}  // namespace amp
