#include "obda/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "obda/inference.hpp"

namespace obda {

int shift_range_at(const ExperimentConfig& cfg, int step)
{
    const double ramp = cfg.shift_warmup_fraction * cfg.optimizer.steps;
    if (ramp <= 0 || step >= ramp) {
        return cfg.max_train_shift;
    }
    return static_cast<int>(std::lround(cfg.max_train_shift * (step / ramp)));
}

double learning_rate_at(const OptimizerConfig& opt, int step)
{
    if (step < opt.warmup_steps) {
        return opt.learning_rate * (step + 1) / opt.warmup_steps;
    }
    const double span = std::max(1, opt.steps - opt.warmup_steps - 1);
    const double t = std::min(1.0, (step - opt.warmup_steps) / span);
    const double floor = opt.final_lr_fraction;
    return opt.learning_rate * (floor + (1 - floor) * 0.5 * (1 + std::cos(std::numbers::pi * t)));
}

namespace {

Image flip_image(const Image& in, bool horizontal, bool vertical)
{
    Image out(in.channels, in.height, in.width);
    for (int c = 0; c < in.channels; ++c) {
        for (int y = 0; y < in.height; ++y) {
            const int sy = vertical ? in.height - 1 - y : y;
            for (int x = 0; x < in.width; ++x) {
                out.at(c, y, x) = in.at(c, sy, horizontal ? in.width - 1 - x : x);
            }
        }
    }
    return out;
}

}  // namespace

TrainingSample flip_sample(TrainingSample s, bool horizontal, bool vertical)
{
    if (!horizontal && !vertical) {
        return s;
    }
    const double w = s.pre.width, h = s.pre.height;
    s.pre = flip_image(s.pre, horizontal, vertical);
    s.post = flip_image(s.post, horizontal, vertical);
    for (auto& b : s.boxes) {
        if (horizontal) {
            b.box = {w - b.box.x_max, b.box.y_min, w - b.box.x_min, b.box.y_max};
        }
        if (vertical) {
            b.box = {b.box.x_min, h - b.box.y_max, b.box.x_max, h - b.box.y_min};
        }
    }
    return s;
}

std::vector<TrainStep> train_model(DamageModel<float>& model, const std::vector<ScenePair>& scenes,
                                   const ExperimentConfig& cfg, const TrainHooks& hooks)
{
    cfg.validate();
    require(!scenes.empty(), ErrorKind::input, "no training scenes");
    for (const auto& s : scenes) {
        require(s.full_frame(), ErrorKind::protocol, "training scenes must be unshifted full-frame pairs");
    }
    const auto& opt = cfg.optimizer;
    Rng rng(cfg.seed ^ 0x7f4a7c15d1b54a32ULL);
    std::bernoulli_distribution coin(0.5);
    std::uniform_real_distribution<double> shift_coin(0.0, 1.0);
    std::vector<std::size_t> order(scenes.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();

    auto& params = model.params().params();
    std::vector<std::vector<float>> velocity(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i].assign(params[i].tensor.numel(), 0.0f);
    }
    const LatentPrecision precision = model.training_precision();

    std::vector<TrainStep> log;
    log.reserve(opt.steps);
    for (int step = 0; step < opt.steps; ++step) {
        model.params().zero_grad();
        TrainStep rec;
        rec.step = step;
        rec.learning_rate = learning_rate_at(opt, step);
        for (int b = 0; b < opt.batch_size; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            const ScenePair& scene = scenes[order[cursor++]];
            const bool shifted = cfg.variant.shift_augmentation &&
                                 (cfg.shift_probability >= 1.0 || shift_coin(rng) < cfg.shift_probability);
            ScenePair view = shifted ? shift_augment(scene, rng, shift_range_at(cfg, step)) : scene;
            TrainingSample sample{std::move(view.pre), std::move(view.post), view.local_annotations()};
            if (cfg.flip_augmentation) {
                const bool h = coin(rng), v = coin(rng);
                sample = flip_sample(std::move(sample), h, v);
            }
            const auto pre = to_network_input<float>(sample.pre);
            const auto post = to_network_input<float>(sample.post);
            LossBreakdown parts;
            const auto head = model.forward(pre, post, precision);
            const auto loss = detection_loss(head, sample.boxes, pre.dim(2), pre.dim(1), &parts);
            require(std::isfinite(loss.item()), ErrorKind::numeric,
                    "non-finite loss at step " + std::to_string(step));
            scale(loss, 1.0f / static_cast<float>(opt.batch_size)).backward();
            rec.loss += loss.item() / opt.batch_size;
            rec.objectness += parts.objectness / opt.batch_size;
            rec.classification += parts.classification / opt.batch_size;
            rec.box += parts.box / opt.batch_size;
        }

        double sq = 0;
        for (const auto& p : params) {
            if (p.tensor.has_grad()) {
                for (float g : p.tensor.grad()) {
                    sq += static_cast<double>(g) * g;
                }
            }
        }
        rec.grad_norm = std::sqrt(sq);
        require(std::isfinite(rec.grad_norm), ErrorKind::numeric,
                "non-finite gradient at step " + std::to_string(step));
        const double clip = rec.grad_norm > opt.grad_clip ? opt.grad_clip / rec.grad_norm : 1.0;
        const float lr = static_cast<float>(rec.learning_rate);
        const float mu = static_cast<float>(opt.momentum);
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& t = params[i].tensor;
            auto values = t.values_mut();
            const bool decay = t.shape().size() == 4;
            const float wd = decay ? static_cast<float>(opt.weight_decay) : 0.0f;
            const bool has = t.has_grad();
            const auto grad = has ? t.grad() : std::span<const float>();
            auto& vel = velocity[i];
            for (std::size_t k = 0; k < values.size(); ++k) {
                const float g = (has ? static_cast<float>(grad[k] * clip) : 0.0f) + wd * values[k];
                vel[k] = mu * vel[k] + g;
                values[k] -= lr * vel[k];
            }
        }
        log.push_back(rec);
        if (hooks.on_step) {
            hooks.on_step(rec);
        }
        if (hooks.validation && cfg.val_every > 0 && (step + 1) % cfg.val_every == 0) {
            const EvalReport report = evaluate_model(model, *hooks.validation, cfg.score_threshold);
            if (hooks.on_validation) {
                hooks.on_validation(step + 1, report);
            }
        }
    }
    model.params().zero_grad();
    return log;
}

}  // namespace obda
