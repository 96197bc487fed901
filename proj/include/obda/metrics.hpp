#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "obda/boxes.hpp"

namespace obda {

inline constexpr double kMatchIou = 0.5;

struct MatchPair {
    std::size_t det = 0;  // index into the caller's detection list
    std::size_t gt = 0;
    double iou = 0;
};

struct MatchResult {
    std::vector<MatchPair> pairs;  // in matching order (confidence descending)
    std::vector<std::size_t> unmatched_dets;
    std::vector<std::size_t> unmatched_gts;
};

// Detections are visited by confidence, descending (stable on ties); each
// takes the unmatched GT of highest IoU >= threshold, lowest GT index on ties.
MatchResult greedy_match(const std::vector<Detection>& dets, const std::vector<BoxAnnotation>& gts,
                         double iou_threshold = kMatchIou, bool class_aware = true);

// One evaluated image (or tile).
struct ImageEval {
    std::vector<Detection> dets;
    std::vector<BoxAnnotation> gts;
};

// All-point interpolated AP for one class, pooled over images; absent when the
// class has no ground truth.
std::optional<double> average_precision(const std::vector<ImageEval>& images, DamageClass cls,
                                        double iou_threshold = kMatchIou);
std::optional<double> average_precision(const std::vector<Detection>& dets, const std::vector<BoxAnnotation>& gts,
                                        DamageClass cls, double iou_threshold = kMatchIou);

// Unweighted mean AP over classes that have ground truth (0 if none do).
double mean_average_precision(const std::vector<ImageEval>& images, double iou_threshold = kMatchIou);

struct SweepResult {
    double f1 = 0;
    double threshold = 1;  // confidence cut achieving f1 (1 when there are no detections)
    double precision = 0;
    double recall = 0;
};

// Class-agnostic F1 maximized over every distinct confidence threshold.
SweepResult localization_f1(const std::vector<ImageEval>& images, double iou_threshold = kMatchIou);
SweepResult localization_f1(const std::vector<Detection>& dets, const std::vector<BoxAnnotation>& gts,
                            double iou_threshold = kMatchIou);

// Fraction of matched pairs whose predicted class is right; absent on an
// empty match set.
std::optional<double> classification_accuracy(const MatchResult& match, const std::vector<Detection>& dets,
                                              const std::vector<BoxAnnotation>& gts);

struct PrfScore {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    int tp = 0, fp = 0, fn = 0;
    bool precision_defined = true;  // false when nothing was predicted
};

PrfScore prf_from_counts(int tp, int fp, int fn);

struct EvalReport {
    std::array<std::optional<double>, kNumClasses> ap{};
    double map50 = 0;

    // Class-aware P/R/F1 at the confidence cut maximizing micro F1.
    double operating_threshold = 1;
    std::array<PrfScore, kNumClasses> per_class{};
    PrfScore micro;
    double macro_precision = 0, macro_recall = 0, macro_f1 = 0;

    double localization_f1 = 0;
    double localization_threshold = 1;
    // On class-agnostic matches at the localization operating point.
    std::optional<double> classification_accuracy;
    int matched = 0;

    int images = 0;
    int gt_count = 0;
    int det_count = 0;
    std::optional<int> shift_magnitude;
    std::optional<std::string> shift_direction;
};

EvalReport evaluate(const std::vector<ImageEval>& images, double iou_threshold = kMatchIou);

nlohmann::json to_json(const EvalReport& report);

}  // namespace obda
