#pragma once

#include <functional>
#include <vector>

#include "obda/config.hpp"
#include "obda/geoproto.hpp"
#include "obda/metrics.hpp"
#include "obda/model.hpp"

namespace obda {

struct TrainStep {
    int step = 0;
    double learning_rate = 0;
    double loss = 0;
    double objectness = 0;
    double classification = 0;
    double box = 0;
    double grad_norm = 0;  // before clipping
};

struct TrainHooks {
    std::function<void(const TrainStep&)> on_step;
    const std::vector<ScenePair>* validation = nullptr;  // evaluated every cfg.val_every steps
    std::function<void(int step, const EvalReport&)> on_validation;
};

// Train-time shift range at a step (see ExperimentConfig::shift_warmup_fraction).
int shift_range_at(const ExperimentConfig& cfg, int step);

// Linear warmup to learning_rate, then cosine decay to final_lr_fraction of it.
double learning_rate_at(const OptimizerConfig& opt, int step);

// One training sample after augmentation: images and boxes in a shared local frame.
struct TrainingSample {
    Image pre;
    Image post;
    std::vector<BoxAnnotation> boxes;
};

TrainingSample flip_sample(TrainingSample s, bool horizontal, bool vertical);

// End-to-end training of every component, deterministic for a given config.
// Scenes must be full-frame pairs; non-finite losses or gradients abort with
// a numeric error naming the step.
std::vector<TrainStep> train_model(DamageModel<float>& model, const std::vector<ScenePair>& scenes,
                                   const ExperimentConfig& cfg, const TrainHooks& hooks = {});

}  // namespace obda
