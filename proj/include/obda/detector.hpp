#pragma once

#include <array>
#include <string>
#include <vector>

#include "obda/boxes.hpp"
#include "obda/layers.hpp"
#include "obda/pyramid.hpp"

namespace obda {

// Raw head predictions for one level. Box channels are (dx, dy, log_w, log_h):
// center = ((col + 0.5 + dx) * stride, (row + 0.5 + dy) * stride) and
// size = stride * exp(log_wh).
template <typename T>
struct LevelHead {
    Level level = Level::D3;
    Tensor<T> objectness;    // (1,H,W) logits
    Tensor<T> class_logits;  // (4,H,W)
    Tensor<T> box;           // (4,H,W)

    int stride() const { return stride_of(level); }
    int height() const { return objectness.dim(1); }
    int width() const { return objectness.dim(2); }
};

template <typename T>
struct HeadOutput {
    std::vector<LevelHead<T>> levels;
};

// Top-down feature pyramid: 1x1 laterals to a fixed width, nearest 2x
// upsampling of the coarser level added to the finer lateral, then a 3x3
// smoothing conv per level.
template <typename T>
class Fpn {
public:
    // in_channels[level_index] == 0 marks an absent level.
    Fpn(const std::array<int, 3>& in_channels, int width, ParamStore<T>& store, Rng& rng,
        const std::string& prefix = "fpn");

    Pyramid<T> aggregate(const Pyramid<T>& fused) const;

private:
    std::array<int, 3> in_channels_;
    std::array<Conv<T>, 3> lateral_;
    std::array<Conv<T>, 3> smooth_;
};

// Decoupled anchor-free head shared across levels.
template <typename T>
class DetectionHead {
public:
    DetectionHead(int width, ParamStore<T>& store, Rng& rng, const std::string& prefix = "head");

    HeadOutput<T> predict(const Pyramid<T>& features) const;

private:
    Conv<T> stem_, cls_conv_, cls_pred_, reg_conv_, box_pred_, obj_pred_;
};

inline constexpr double kDefaultNmsIou = 0.65;
inline constexpr double kMaxLogSize = 8.0;

std::vector<Detection> decode_head(const HeadOutput<float>& head, double conf_threshold, double nms_iou = kDefaultNmsIou);
std::vector<Detection> decode_head(const HeadOutput<double>& head, double conf_threshold, double nms_iou = kDefaultNmsIou);

// Class-wise greedy NMS; the result is sorted by confidence, descending.
std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold);

struct CellTarget {
    std::size_t level_slot = 0;  // index into HeadOutput::levels
    int row = 0;
    int col = 0;
    std::size_t gt_index = 0;
};

struct LevelGrid {
    Level level;
    int height;
    int width;
};

// Center-cell assignment: each GT goes to the level whose stride is closest to
// sqrt(area)/4 (finer level on ties), at the cell holding its center. A cell
// already claimed keeps its first GT.
std::vector<CellTarget> assign_targets(const std::vector<LevelGrid>& grids, const std::vector<BoxAnnotation>& gts);

struct LossBreakdown {
    double objectness = 0;
    double classification = 0;
    double box = 0;
    int positives = 0;
};

// Objectness BCE averaged separately over negative and positive cells (the two
// means are added) + mean class cross-entropy over positives + mean (1 - IoU)
// over positives. GT boxes must lie inside [0,W]x[0,H].
template <typename T>
Tensor<T> detection_loss(const HeadOutput<T>& head, const std::vector<BoxAnnotation>& gts, int image_width,
                         int image_height, LossBreakdown* breakdown = nullptr);

extern template class Fpn<float>;
extern template class Fpn<double>;
extern template class DetectionHead<float>;
extern template class DetectionHead<double>;

}  // namespace obda
