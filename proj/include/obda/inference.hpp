#pragma once

#include <string>
#include <vector>

#include "obda/geoproto.hpp"
#include "obda/metrics.hpp"
#include "obda/model.hpp"

namespace obda {

// Detections in the pair's local (support) frame, clipped to the image.
std::vector<Detection> detect(const DamageModel<float>& model, const ScenePair& pair, double score_threshold,
                              LatentPrecision precision);
// Same from the two halves of the ground/on-board split.
std::vector<Detection> detect_onboard(const DamageModel<float>& model, const Pyramid<float>& latent,
                                      const Image& post, double score_threshold);
// Ground half on an image (network input preparation included).
Pyramid<float> encode_pre_image(const DamageModel<float>& model, const Image& pre);

// Clips boxes to a width x height image and drops those left empty.
std::vector<Detection> clip_detections(std::vector<Detection> dets, int width, int height);

EvalReport evaluate_model(const DamageModel<float>& model, const std::vector<ScenePair>& pairs,
                          double score_threshold);

struct SweepCell {
    int magnitude = 0;
    ShiftDirection direction;
    EvalReport report;
};

// Per magnitude, the plain mean over directions; classification accuracy
// averages the directions where it is defined.
struct SweepRow {
    int magnitude = 0;
    double map50 = 0;
    double localization_f1 = 0;
    std::optional<double> classification_accuracy;
};

struct ShiftSweep {
    Rect support;
    int gt_count = 0;  // identical for every cell
    std::vector<SweepCell> cells;
    std::vector<SweepRow> rows;
};

ShiftSweep run_shift_sweep(const DamageModel<float>& model, const FixedSupportSet& set, double score_threshold);

// "shift_magnitude,direction,map50,loc_f1,cls_acc": one line per cell, then
// one "mean" line per magnitude. Undefined accuracy is left empty.
std::string sweep_csv(const ShiftSweep& sweep);
nlohmann::json to_json(const ShiftSweep& sweep);

// One JSON object per line: tile, hash, box, class, scores.
std::string detection_product(const std::vector<Detection>& dets, const std::string& tile_id,
                              const ConfigHash& hash, int x_origin, int y_origin);
// Post-image chips around each detection, padded by `pad` pixels.
void export_patches(const std::vector<Detection>& dets, const Image& post, const std::string& directory,
                    const std::string& tile_id, int pad = 8);

}  // namespace obda
