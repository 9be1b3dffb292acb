#pragma once

#include <utility>
#include <vector>

#include "amp/backbone.hpp"
#include "amp/label_map.hpp"
#include "amp/metrics.hpp"
#include "amp/proxy.hpp"

namespace amp {

struct FewShotConfig {
    Real alpha_bg = 0.26;
    int ft_iterations = 0;
    Real ft_learning_rate = 7.6e-5;
    bool multi_res = true;
    bool adaptation = true;
    // Off = the fine-tuning-only baseline: the novel row starts from seeded
    // random values instead of the NMAP proxy.
    bool imprint_novel = true;
    uint64_t random_row_seed = 0;
};

struct OptimizerState {
    std::array<Matrix, 3> acc;  // squared-gradient accumulators, bank-shaped
    Real decay = 0.9;
    Real epsilon = 1e-8;

    static OptimizerState for_bank(const ClassifierBank& bank) {
        OptimizerState s;
        for (int r = 0; r < 3; ++r)
            s.acc[r] = Matrix(bank.filters[r].rows, bank.filters[r].cols);
        return s;
    }
};

struct TrainSample {
    const FeaturePyramid* pyramid;
    const LabelMap* labels;
};

// Per level: conv1x1 then bilinear upsample to source resolution; fused
// logits are the sum over levels, or the coarsest level alone when multi_res
// is off.
Tensor3 score(const ClassifierBank& bank, const FeaturePyramid& pyr, bool multi_res);

// Labels carry bank class ids (argmax row mapped through bank.class_ids).
std::pair<LabelMap, Tensor3> predict(const ClassifierBank& bank,
                                     const FeaturePyramid& pyr, bool multi_res);

// Mean pixel-wise cross-entropy over non-ignore pixels of the joint batch,
// one RMSProp step per iteration; only bank rows receive gradients.
std::pair<ClassifierBank, OptimizerState> finetune(
    ClassifierBank bank, const std::vector<TrainSample>& batches, Real lr,
    int iterations, OptimizerState opt, bool multi_res = true);

// Analytic gradient of the finetune loss, exposed for verification.
std::array<Matrix, 3> finetune_gradient(const ClassifierBank& bank,
                                        const std::vector<TrainSample>& batches,
                                        bool multi_res = true);
Real finetune_loss(const ClassifierBank& bank,
                   const std::vector<TrainSample>& batches, bool multi_res = true);

struct EpisodeData {
    int novel_class = 0;
    std::vector<FeaturePyramid> support_pyramids;
    std::vector<SoftMask> support_fg;  // binary, at source resolution
    FeaturePyramid query_pyramid;
    LabelMap query_gt;  // novel class id vs background 0
};

struct EpisodeOutcome {
    LabelMap prediction;
    Real fg_iou = 0.0;
    EpisodeResult counts;
};

EpisodeOutcome run_fewshot_episode(const ClassifierBank& base_bank,
                                   const EpisodeData& ep, const FewShotConfig& cfg);

struct SelfAdaptResult {
    std::vector<LabelMap> predictions;
    ClassifierBank bank;
    int skipped_frames = 0;
};

// Per frame: predict, then adapt the target row (and background row with the
// complementary soft mask) from the model's own probability map. Frames whose
// soft-mask area is at most tau_area skip adaptation.
SelfAdaptResult self_adapt(ClassifierBank bank, const Backbone& backbone,
                           const std::vector<Tensor3>& frames, Real alpha,
                           int target_class, Real tau_area = 1.0);

}  // namespace amp
