#include "obda/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace obda {

namespace {

constexpr double kObjectnessPriorBias = -4.6;  // sigmoid(-4.6) ~ 0.01

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(1 + exp(x)) without overflow.
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double clamp_log_size(double v) { return std::clamp(v, -kMaxLogSize, kMaxLogSize); }

struct PredictedBox {
    double x1, y1, x2, y2;
};

PredictedBox cell_box(double dx, double dy, double lw, double lh, int row, int col, int stride)
{
    const double cx = (col + 0.5 + dx) * stride;
    const double cy = (row + 0.5 + dy) * stride;
    const double w = stride * std::exp(clamp_log_size(lw));
    const double h = stride * std::exp(clamp_log_size(lh));
    return {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
}

template <typename T>
std::vector<Detection> decode_impl(const HeadOutput<T>& head, double conf_threshold, double nms_iou)
{
    require(conf_threshold > 0 && conf_threshold < 1 && nms_iou > 0 && nms_iou < 1, ErrorKind::config,
            "decode thresholds must lie in (0,1)");
    std::vector<Detection> out;
    for (const auto& lh : head.levels) {
        const int h = lh.height(), w = lh.width(), plane = h * w, s = lh.stride();
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                const int cell = i * w + j;
                const double obj = sigmoid(lh.objectness[cell]);
                if (obj < conf_threshold) {
                    continue;
                }
                std::array<double, kNumClasses> scores{};
                double max_logit = -1e300;
                for (int c = 0; c < kNumClasses; ++c) {
                    max_logit = std::max(max_logit, static_cast<double>(lh.class_logits[c * plane + cell]));
                }
                double total = 0;
                for (int c = 0; c < kNumClasses; ++c) {
                    scores[c] = std::exp(lh.class_logits[c * plane + cell] - max_logit);
                    total += scores[c];
                }
                int best = 0;
                for (int c = 0; c < kNumClasses; ++c) {
                    scores[c] /= total;
                    if (scores[c] > scores[best]) {
                        best = c;
                    }
                }
                const double confidence = obj * scores[best];
                if (confidence < conf_threshold) {
                    continue;
                }
                const auto b = cell_box(lh.box[cell], lh.box[plane + cell], lh.box[2 * plane + cell],
                                        lh.box[3 * plane + cell], i, j, s);
                out.push_back({{b.x1, b.y1, b.x2, b.y2}, static_cast<DamageClass>(best), obj, scores, confidence});
            }
        }
    }
    return nms(std::move(out), nms_iou);
}

}  // namespace

template <typename T>
Fpn<T>::Fpn(const std::array<int, 3>& in_channels, int width, ParamStore<T>& store, Rng& rng,
            const std::string& prefix)
    : in_channels_(in_channels)
{
    require(width > 0, ErrorKind::config, "FPN width must be positive");
    for (Level level : kAllLevels) {
        const int idx = level_index(level);
        if (in_channels[idx] == 0) {
            continue;
        }
        lateral_[idx] = Conv<T>::create(store, prefix + ".lateral_" + to_string(level), in_channels[idx], width, 1,
                                        1, rng);
        smooth_[idx] = Conv<T>::create(store, prefix + ".smooth_" + to_string(level), width, width, 3, 1, rng,
                                       Init::fan_in_uniform, 1.6);
    }
}

template <typename T>
Pyramid<T> Fpn<T>::aggregate(const Pyramid<T>& fused) const
{
    require(fused.size() >= 1, ErrorKind::config, "fpn_aggregate: empty pyramid");
    for (const auto& m : fused.levels) {
        require(in_channels_[level_index(m.level)] == m.channels(), ErrorKind::config,
                "fpn_aggregate: level " + to_string(m.level) + " has unexpected channel count");
    }
    // Coarse to fine: each lateral receives the upsampled coarser sum.
    std::vector<Tensor<T>> merged(fused.size());
    for (std::size_t k = fused.size(); k-- > 0;) {
        const auto& m = fused.levels[k];
        Tensor<T> lateral = lateral_[level_index(m.level)](m.data);
        if (k + 1 < fused.size()) {
            require(static_cast<int>(fused.levels[k + 1].level) == static_cast<int>(m.level) + 1, ErrorKind::config,
                    "fpn_aggregate: levels must be contiguous");
            lateral = add(lateral, upsample_nearest2x(merged[k + 1]));
        }
        merged[k] = lateral;
    }
    Pyramid<T> out;
    for (std::size_t k = 0; k < fused.size(); ++k) {
        const Level level = fused.levels[k].level;
        out.levels.push_back({level, silu(smooth_[level_index(level)](merged[k]))});
    }
    return out;
}

template <typename T>
DetectionHead<T>::DetectionHead(int width, ParamStore<T>& store, Rng& rng, const std::string& prefix)
{
    stem_ = Conv<T>::create(store, prefix + ".stem", width, width, 1, 1, rng, Init::fan_in_uniform, 1.6);
    cls_conv_ = Conv<T>::create(store, prefix + ".cls_conv", width, width, 1, 1, rng, Init::fan_in_uniform, 1.6);
    cls_pred_ = Conv<T>::create(store, prefix + ".cls_pred", width, kNumClasses, 1, 1, rng, Init::fan_in_uniform, 0.1);
    reg_conv_ = Conv<T>::create(store, prefix + ".reg_conv", width, width, 1, 1, rng, Init::fan_in_uniform, 1.6);
    box_pred_ = Conv<T>::create(store, prefix + ".box_pred", width, 4, 1, 1, rng, Init::fan_in_uniform, 0.1);
    obj_pred_ = Conv<T>::create(store, prefix + ".obj_pred", width, 1, 1, 1, rng, Init::fan_in_uniform, 0.1);
    obj_pred_.bias.values_mut()[0] = static_cast<T>(kObjectnessPriorBias);
}

template <typename T>
HeadOutput<T> DetectionHead<T>::predict(const Pyramid<T>& features) const
{
    HeadOutput<T> out;
    for (const auto& m : features.levels) {
        Tensor<T> x = silu(stem_(m.data));
        Tensor<T> cls = silu(cls_conv_(x));
        Tensor<T> reg = silu(reg_conv_(x));
        out.levels.push_back({m.level, obj_pred_(reg), cls_pred_(cls), box_pred_(reg)});
    }
    return out;
}

std::vector<Detection> decode_head(const HeadOutput<float>& head, double conf_threshold, double nms_iou)
{
    return decode_impl(head, conf_threshold, nms_iou);
}

std::vector<Detection> decode_head(const HeadOutput<double>& head, double conf_threshold, double nms_iou)
{
    return decode_impl(head, conf_threshold, nms_iou);
}

std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold)
{
    std::stable_sort(detections.begin(), detections.end(),
                     [](const Detection& a, const Detection& b) { return a.confidence > b.confidence; });
    std::vector<Detection> kept;
    for (const auto& d : detections) {
        bool suppressed = false;
        for (const auto& k : kept) {
            if (k.damage == d.damage && iou(k.box, d.box) > iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) {
            kept.push_back(d);
        }
    }
    return kept;
}

std::vector<CellTarget> assign_targets(const std::vector<LevelGrid>& grids, const std::vector<BoxAnnotation>& gts)
{
    require(!grids.empty(), ErrorKind::config, "assign_targets: no levels");
    std::vector<CellTarget> targets;
    std::vector<std::vector<char>> claimed;
    for (const auto& g : grids) {
        claimed.emplace_back(static_cast<std::size_t>(g.height) * g.width, 0);
    }
    for (std::size_t n = 0; n < gts.size(); ++n) {
        const Box& b = gts[n].box;
        const double target_stride = std::sqrt(b.area()) / 4.0;
        std::size_t best = 0;
        for (std::size_t k = 1; k < grids.size(); ++k) {
            if (std::abs(stride_of(grids[k].level) - target_stride) <
                std::abs(stride_of(grids[best].level) - target_stride)) {
                best = k;
            }
        }
        const auto& g = grids[best];
        const int s = stride_of(g.level);
        const double cx = 0.5 * (b.x_min + b.x_max), cy = 0.5 * (b.y_min + b.y_max);
        const int col = std::clamp(static_cast<int>(std::floor(cx / s)), 0, g.width - 1);
        const int row = std::clamp(static_cast<int>(std::floor(cy / s)), 0, g.height - 1);
        char& slot = claimed[best][static_cast<std::size_t>(row) * g.width + col];
        if (slot) {
            continue;
        }
        slot = 1;
        targets.push_back({best, row, col, n});
    }
    return targets;
}

template <typename T>
Tensor<T> detection_loss(const HeadOutput<T>& head, const std::vector<BoxAnnotation>& gts, int image_width,
                         int image_height, LossBreakdown* breakdown)
{
    require(!head.levels.empty(), ErrorKind::config, "detection_loss: empty head output");
    const Box support{0, 0, static_cast<double>(image_width), static_cast<double>(image_height)};
    for (const auto& gt : gts) {
        require(gt.box.valid() && support.contains(gt.box), ErrorKind::protocol,
                "detection_loss: ground-truth box outside the image support");
    }
    std::vector<LevelGrid> grids;
    std::size_t total_cells = 0;
    std::vector<Tensor<T>> inputs;
    for (const auto& lh : head.levels) {
        grids.push_back({lh.level, lh.height(), lh.width()});
        total_cells += static_cast<std::size_t>(lh.height()) * lh.width();
        inputs.push_back(lh.objectness);
        inputs.push_back(lh.class_logits);
        inputs.push_back(lh.box);
    }
    const auto targets = assign_targets(grids, gts);
    const double inv_pos = targets.empty() ? 0.0 : 1.0 / static_cast<double>(targets.size());
    const std::size_t negatives = total_cells - targets.size();
    const double inv_neg = negatives == 0 ? 0.0 : 1.0 / static_cast<double>(negatives);

    // Gradients are computed alongside the forward pass and replayed in backward.
    std::vector<std::vector<double>> grads;
    for (const auto& t : inputs) {
        grads.emplace_back(t.numel(), 0.0);
    }

    std::vector<std::vector<char>> positive;
    for (const auto& g : grids) {
        positive.emplace_back(static_cast<std::size_t>(g.height) * g.width, 0);
    }
    for (const auto& t : targets) {
        positive[t.level_slot][static_cast<std::size_t>(t.row) * grids[t.level_slot].width + t.col] = 1;
    }
    // Objectness: mean BCE over negative cells plus mean BCE over positive cells.
    double obj_neg = 0, obj_pos = 0;
    for (std::size_t k = 0; k < head.levels.size(); ++k) {
        const auto& obj = head.levels[k].objectness;
        for (std::size_t c = 0; c < obj.numel(); ++c) {
            const double z = obj[c];
            if (positive[k][c]) {
                obj_pos += softplus(z) - z;
                grads[3 * k][c] = (sigmoid(z) - 1.0) * inv_pos;
            } else {
                obj_neg += softplus(z);
                grads[3 * k][c] = sigmoid(z) * inv_neg;
            }
        }
    }
    const double obj_loss = obj_neg * inv_neg + obj_pos * inv_pos;

    double cls_loss = 0, box_loss = 0;
    for (const auto& t : targets) {
        const auto& lh = head.levels[t.level_slot];
        const int plane = lh.height() * lh.width();
        const int cell = t.row * lh.width() + t.col;
        const BoxAnnotation& gt = gts[t.gt_index];

        std::array<double, kNumClasses> logits{};
        double max_logit = -1e300;
        for (int c = 0; c < kNumClasses; ++c) {
            logits[c] = lh.class_logits[c * plane + cell];
            max_logit = std::max(max_logit, logits[c]);
        }
        double total = 0;
        for (double l : logits) {
            total += std::exp(l - max_logit);
        }
        const double log_z = max_logit + std::log(total);
        const int target_class = class_index(gt.damage);
        cls_loss += log_z - logits[target_class];
        auto& gcls = grads[3 * t.level_slot + 1];
        for (int c = 0; c < kNumClasses; ++c) {
            gcls[c * plane + cell] += (std::exp(logits[c] - log_z) - (c == target_class ? 1.0 : 0.0)) * inv_pos;
        }

        const int s = lh.stride();
        const double dx = lh.box[cell], dy = lh.box[plane + cell];
        const double lw_raw = lh.box[2 * plane + cell], lh_raw = lh.box[3 * plane + cell];
        const auto p = cell_box(dx, dy, lw_raw, lh_raw, t.row, t.col, s);
        const Box& g = gt.box;
        const double iw = std::min(p.x2, g.x_max) - std::max(p.x1, g.x_min);
        const double ih = std::min(p.y2, g.y_max) - std::max(p.y1, g.y_min);
        const double pw = p.x2 - p.x1, ph = p.y2 - p.y1;
        const double area_p = pw * ph;
        double iou_value = 0;
        double d_x1 = 0, d_x2 = 0, d_y1 = 0, d_y2 = 0, d_w_area = 0, d_h_area = 0;
        if (iw > 0 && ih > 0) {
            const double inter = iw * ih;
            const double uni = area_p + g.area() - inter;
            iou_value = inter / uni;
            const double d_inter = (uni + inter) / (uni * uni);
            const double d_area = -inter / (uni * uni);
            // d(inter)/d(edge): an edge only matters while it bounds the intersection.
            d_x1 = (p.x1 > g.x_min) ? -ih * d_inter : 0.0;
            d_x2 = (p.x2 < g.x_max) ? ih * d_inter : 0.0;
            d_y1 = (p.y1 > g.y_min) ? -iw * d_inter : 0.0;
            d_y2 = (p.y2 < g.y_max) ? iw * d_inter : 0.0;
            d_w_area = d_area * ph;
            d_h_area = d_area * pw;
        }
        box_loss += 1.0 - iou_value;
        // Chain rule through x1 = cx - w/2, x2 = cx + w/2, cx = (col+0.5+dx)s, w = s*exp(lw).
        const double d_cx = d_x1 + d_x2;
        const double d_cy = d_y1 + d_y2;
        const double d_w = 0.5 * (d_x2 - d_x1) + d_w_area;
        const double d_h = 0.5 * (d_y2 - d_y1) + d_h_area;
        const bool lw_live = std::abs(lw_raw) < kMaxLogSize;
        const bool lh_live = std::abs(lh_raw) < kMaxLogSize;
        auto& gbox = grads[3 * t.level_slot + 2];
        gbox[cell] -= d_cx * s * inv_pos;
        gbox[plane + cell] -= d_cy * s * inv_pos;
        gbox[2 * plane + cell] -= lw_live ? d_w * pw * inv_pos : 0.0;
        gbox[3 * plane + cell] -= lh_live ? d_h * ph * inv_pos : 0.0;
    }
    cls_loss *= inv_pos;
    box_loss *= inv_pos;

    if (breakdown) {
        *breakdown = {obj_loss, cls_loss, box_loss, static_cast<int>(targets.size())};
    }
    const double total_loss = obj_loss + cls_loss + box_loss;
    return Tensor<T>::from_op({1}, {static_cast<T>(total_loss)}, inputs,
                              [grads = std::move(grads)](detail::Node<T>& self) {
                                  const double upstream = self.grad[0];
                                  for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                                      if (!self.inputs[k]->requires_grad) {
                                          continue;
                                      }
                                      auto& g = self.inputs[k]->grad_buffer();
                                      for (std::size_t i = 0; i < g.size(); ++i) {
                                          g[i] += static_cast<T>(upstream * grads[k][i]);
                                      }
                                  }
                              },
                              "detection_loss");
}

template class Fpn<float>;
template class Fpn<double>;
template class DetectionHead<float>;
template class DetectionHead<double>;
template Tensor<float> detection_loss(const HeadOutput<float>&, const std::vector<BoxAnnotation>&, int, int,
                                      LossBreakdown*);
template Tensor<double> detection_loss(const HeadOutput<double>&, const std::vector<BoxAnnotation>&, int, int,
                                       LossBreakdown*);

}  // namespace obda
