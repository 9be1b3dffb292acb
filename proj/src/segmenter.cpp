#include "amp/segmenter.hpp"

#include <cmath>

#include "amp/kernels.hpp"
#include "amp/protocol.hpp"
#include "amp/rng.hpp"

namespace amp {

namespace {

void check_dims(const ClassifierBank& bank, const FeaturePyramid& pyr) {
    for (int r = 0; r < 3; ++r)
        if (bank.filters[r].cols != pyr.levels[r].channels)
            throw std::invalid_argument("score: bank/pyramid channel mismatch");
}

}  // namespace

Tensor3 score(const ClassifierBank& bank, const FeaturePyramid& pyr, bool multi_res) {
    check_dims(bank, pyr);
    const int h = pyr.source_height, w = pyr.source_width;
    if (!multi_res)
        return bilinear_resize(conv1x1(pyr.levels[2], bank.filters[2]), h, w);
    Tensor3 fused(bank.num_classes(), h, w);
    for (int r = 0; r < 3; ++r) {
        const Tensor3 up = bilinear_resize(conv1x1(pyr.levels[r], bank.filters[r]), h, w);
        for (size_t i = 0; i < fused.data.size(); ++i) fused.data[i] += up.data[i];
    }
    return fused;
}

std::pair<LabelMap, Tensor3> predict(const ClassifierBank& bank,
                                     const FeaturePyramid& pyr, bool multi_res) {
    const Tensor3 logits = score(bank, pyr, multi_res);
    LabelMap rows = argmax_channels(logits);
    for (auto& v : rows.labels) v = static_cast<uint8_t>(bank.class_ids[v]);
    return {std::move(rows), softmax_channels(logits)};
}

namespace {

// Cross-entropy loss and, when grads is non-null, its gradient w.r.t. the
// bank rows. Shared by finetune, finetune_gradient and finetune_loss.
Real loss_and_grad(const ClassifierBank& bank, const std::vector<TrainSample>& batches,
                   bool multi_res, std::array<Matrix, 3>* grads) {
    if (grads)
        for (int r = 0; r < 3; ++r)
            (*grads)[r] = Matrix(bank.filters[r].rows, bank.filters[r].cols);

    // First pass: count contributing pixels so per-pixel gradients can be
    // scaled by 1/M as they are produced.
    uint64_t total = 0;
    for (const auto& s : batches)
        for (uint8_t v : s.labels->labels)
            if (v != LabelMap::kIgnore) ++total;
    if (total == 0) throw std::invalid_argument("finetune: no labeled pixels");

    Real loss = 0.0;
    for (const auto& s : batches) {
        const FeaturePyramid& pyr = *s.pyramid;
        const LabelMap& lm = *s.labels;
        if (lm.height != pyr.source_height || lm.width != pyr.source_width)
            throw std::invalid_argument("finetune: label/pyramid size mismatch");
        const Tensor3 probs = softmax_channels(score(bank, pyr, multi_res));
        const int plane = lm.height * lm.width;

        Tensor3 glogits(probs.channels, lm.height, lm.width);
        for (int p = 0; p < plane; ++p) {
            const uint8_t y = lm.labels[p];
            if (y == LabelMap::kIgnore) continue;
            const int row = bank.row_of(y);
            if (row < 0)
                throw std::invalid_argument("finetune: label outside bank classes");
            const Real py = probs.data[static_cast<size_t>(row) * plane + p];
            loss += -std::log(std::max(py, 1e-300));
            if (grads) {
                for (int c = 0; c < probs.channels; ++c) {
                    Real g = probs.data[static_cast<size_t>(c) * plane + p];
                    if (c == row) g -= 1.0;
                    glogits.data[static_cast<size_t>(c) * plane + p] = g / total;
                }
            }
        }
        if (!grads) continue;

        // Backprop the fused-logit gradient through upsampling into each
        // level, then into that level's filter rows.
        const int first = multi_res ? 0 : 2;
        for (int r = first; r < 3; ++r) {
            const Tensor3& feat = pyr.levels[r];
            const Tensor3 glevel = bilinear_resize_adjoint(glogits, feat.height, feat.width);
            const int lplane = feat.height * feat.width;
            Matrix& gw = (*grads)[r];
            for (int o = 0; o < gw.rows; ++o) {
                const Real* go = &glevel.data[static_cast<size_t>(o) * lplane];
                for (int c = 0; c < gw.cols; ++c) {
                    const Real* fc = &feat.data[static_cast<size_t>(c) * lplane];
                    Real acc = 0.0;
                    for (int p = 0; p < lplane; ++p) acc += go[p] * fc[p];
                    gw.at(o, c) += acc;
                }
            }
        }
    }
    return loss / total;
}

}  // namespace

Real finetune_loss(const ClassifierBank& bank, const std::vector<TrainSample>& batches,
                   bool multi_res) {
    return loss_and_grad(bank, batches, multi_res, nullptr);
}

std::array<Matrix, 3> finetune_gradient(const ClassifierBank& bank,
                                        const std::vector<TrainSample>& batches,
                                        bool multi_res) {
    std::array<Matrix, 3> grads;
    loss_and_grad(bank, batches, multi_res, &grads);
    return grads;
}

std::pair<ClassifierBank, OptimizerState> finetune(
    ClassifierBank bank, const std::vector<TrainSample>& batches, Real lr,
    int iterations, OptimizerState opt, bool multi_res) {
    for (int it = 0; it < iterations; ++it) {
        std::array<Matrix, 3> grads;
        loss_and_grad(bank, batches, multi_res, &grads);
        for (int r = 0; r < 3; ++r) {
            Matrix& w = bank.filters[r];
            Matrix& a = opt.acc[r];
            const Matrix& g = grads[r];
            for (size_t i = 0; i < w.data.size(); ++i) {
                a.data[i] = opt.decay * a.data[i] + (1.0 - opt.decay) * g.data[i] * g.data[i];
                w.data[i] -= lr * g.data[i] / (std::sqrt(a.data[i]) + opt.epsilon);
            }
        }
    }
    return {std::move(bank), std::move(opt)};
}

EpisodeOutcome run_fewshot_episode(const ClassifierBank& base_bank,
                                   const EpisodeData& ep, const FewShotConfig& cfg) {
    if (base_bank.has(ep.novel_class))
        throw std::invalid_argument("run_fewshot_episode: novel class already in bank");

    std::vector<const FeaturePyramid*> pyrs;
    std::vector<const SoftMask*> fg;
    std::vector<SoftMask> bg;
    for (size_t i = 0; i < ep.support_pyramids.size(); ++i) {
        pyrs.push_back(&ep.support_pyramids[i]);
        fg.push_back(&ep.support_fg[i]);
        bg.push_back(complement_mask(ep.support_fg[i]));
    }
    std::vector<const SoftMask*> bgp;
    for (const auto& m : bg) bgp.push_back(&m);

    ClassifierBank bank = base_bank;
    if (cfg.imprint_novel) {
        bank = imprint(bank, nmap(pyrs, fg, ep.novel_class));
    } else {
        Proxy random_row;
        random_row.class_id = ep.novel_class;
        Rng rng(cfg.random_row_seed);
        for (int r = 0; r < 3; ++r) {
            Vector v(base_bank.filters[r].cols);
            for (auto& x : v) x = rng.uniform(-1.0, 1.0);
            random_row.vectors[r] = l2_normalize(v);
        }
        bank = imprint(bank, random_row);
    }

    if (cfg.adaptation)
        bank = adapt(bank, nmap(pyrs, bgp, kBackgroundId), cfg.alpha_bg);

    if (cfg.ft_iterations > 0) {
        std::vector<LabelMap> support_labels;
        support_labels.reserve(ep.support_fg.size());
        for (const auto& m : ep.support_fg) {
            LabelMap lm(m.height, m.width);
            for (size_t p = 0; p < m.weights.size(); ++p)
                lm.labels[p] = m.weights[p] > 0.5
                                   ? static_cast<uint8_t>(ep.novel_class)
                                   : static_cast<uint8_t>(kBackgroundId);
            support_labels.push_back(std::move(lm));
        }
        std::vector<TrainSample> samples;
        for (size_t i = 0; i < ep.support_pyramids.size(); ++i)
            samples.push_back({&ep.support_pyramids[i], &support_labels[i]});
        OptimizerState opt = OptimizerState::for_bank(bank);
        auto [ft_bank, _] = finetune(std::move(bank), samples, cfg.ft_learning_rate,
                                     cfg.ft_iterations, std::move(opt), cfg.multi_res);
        bank = std::move(ft_bank);
    }

    EpisodeOutcome out;
    out.prediction = predict(bank, ep.query_pyramid, cfg.multi_res).first;
    out.counts = count_episode(out.prediction, ep.query_gt, ep.novel_class);
    out.fg_iou = iou(out.prediction, ep.query_gt, ep.novel_class);
    return out;
}

SelfAdaptResult self_adapt(ClassifierBank bank, const Backbone& backbone,
                           const std::vector<Tensor3>& frames, Real alpha,
                           int target_class, Real tau_area) {
    if (alpha < 0.0 || alpha > 1.0)
        throw std::invalid_argument("self_adapt: alpha must be in [0, 1]");
    const int target_row = bank.row_of(target_class);
    if (target_row < 0)
        throw std::invalid_argument("self_adapt: target class not in bank");

    SelfAdaptResult res;
    for (const auto& frame : frames) {
        const FeaturePyramid pyr = extract(backbone, frame);
        auto [labels, probs] = predict(bank, pyr, true);
        res.predictions.push_back(std::move(labels));
        if (alpha == 0.0) continue;

        const int plane = probs.height * probs.width;
        SoftMask fg(probs.height, probs.width);
        for (int p = 0; p < plane; ++p)
            fg.weights[p] = probs.data[static_cast<size_t>(target_row) * plane + p];

        if (fg.total() <= tau_area) {
            ++res.skipped_frames;
            continue;
        }
        std::vector<const FeaturePyramid*> ps{&pyr};
        std::vector<const SoftMask*> ms{&fg};
        bank = adapt(bank, nmap(ps, ms, target_class), alpha);

        SoftMask bg(probs.height, probs.width);
        for (int p = 0; p < plane; ++p) bg.weights[p] = 1.0 - fg.weights[p];
        if (bg.total() > tau_area) {
            std::vector<const SoftMask*> bs{&bg};
            bank = adapt(bank, nmap(ps, bs, kBackgroundId), alpha);
        }
    }
    res.bank = std::move(bank);
    return res;
}

}  // namespace amp
