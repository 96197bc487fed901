#include "obda/inference.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

namespace obda {

std::vector<Detection> clip_detections(std::vector<Detection> dets, int width, int height)
{
    std::vector<Detection> out;
    out.reserve(dets.size());
    for (auto& d : dets) {
        d.box.x_min = std::clamp(d.box.x_min, 0.0, static_cast<double>(width));
        d.box.x_max = std::clamp(d.box.x_max, 0.0, static_cast<double>(width));
        d.box.y_min = std::clamp(d.box.y_min, 0.0, static_cast<double>(height));
        d.box.y_max = std::clamp(d.box.y_max, 0.0, static_cast<double>(height));
        if (d.box.valid()) {
            out.push_back(d);
        }
    }
    return out;
}

std::vector<Detection> detect(const DamageModel<float>& model, const ScenePair& pair, double score_threshold,
                              LatentPrecision precision)
{
    NoGradGuard no_grad;
    const auto pre = to_network_input<float>(pair.pre);
    const auto post = to_network_input<float>(pair.post);
    const auto head = model.forward(pre, post, precision);
    return clip_detections(decode_head(head, score_threshold), pair.pre.width, pair.pre.height);
}

Pyramid<float> encode_pre_image(const DamageModel<float>& model, const Image& pre)
{
    NoGradGuard no_grad;
    return model.encode_ground(to_network_input<float>(pre));
}

std::vector<Detection> detect_onboard(const DamageModel<float>& model, const Pyramid<float>& latent,
                                      const Image& post, double score_threshold)
{
    NoGradGuard no_grad;
    const auto head = model.forward_onboard(latent, to_network_input<float>(post));
    return clip_detections(decode_head(head, score_threshold), post.width, post.height);
}

EvalReport evaluate_model(const DamageModel<float>& model, const std::vector<ScenePair>& pairs,
                          double score_threshold)
{
    std::vector<ImageEval> images;
    images.reserve(pairs.size());
    for (const auto& p : pairs) {
        images.push_back({detect(model, p, score_threshold, model.training_precision()), p.local_annotations()});
    }
    return evaluate(images);
}

ShiftSweep run_shift_sweep(const DamageModel<float>& model, const FixedSupportSet& set, double score_threshold)
{
    ShiftSweep sweep;
    sweep.support = set.support();
    for (std::size_t i = 0; i < set.pair_count(); ++i) {
        sweep.gt_count += static_cast<int>(set.annotations(i).size());
    }
    for (int m : set.magnitudes()) {
        SweepRow row{m, 0, 0, std::nullopt};
        double acc_sum = 0;
        int acc_n = 0;
        for (const auto& d : set.directions()) {
            std::vector<ScenePair> instances;
            for (std::size_t i = 0; i < set.pair_count(); ++i) {
                instances.push_back(set.instance(i, m, d));
            }
            SweepCell cell{m, d, evaluate_model(model, instances, score_threshold)};
            require(cell.report.gt_count == sweep.gt_count, ErrorKind::protocol,
                    "ground-truth set changed across shifts");
            cell.report.shift_magnitude = m;
            cell.report.shift_direction = to_string(d);
            row.map50 += cell.report.map50;
            row.localization_f1 += cell.report.localization_f1;
            if (cell.report.classification_accuracy) {
                acc_sum += *cell.report.classification_accuracy;
                ++acc_n;
            }
            sweep.cells.push_back(std::move(cell));
        }
        const double n = static_cast<double>(set.directions().size());
        row.map50 /= n;
        row.localization_f1 /= n;
        if (acc_n > 0) {
            row.classification_accuracy = acc_sum / acc_n;
        }
        sweep.rows.push_back(row);
    }
    return sweep;
}

namespace {

std::string fmt(double v)
{
    std::ostringstream ss;
    ss.precision(6);
    ss << std::fixed << v;
    return ss.str();
}

}  // namespace

std::string sweep_csv(const ShiftSweep& sweep)
{
    std::ostringstream out;
    out << "shift_magnitude,direction,map50,loc_f1,cls_acc\n";
    for (const auto& c : sweep.cells) {
        out << c.magnitude << ',' << to_string(c.direction) << ',' << fmt(c.report.map50) << ','
            << fmt(c.report.localization_f1) << ','
            << (c.report.classification_accuracy ? fmt(*c.report.classification_accuracy) : "") << '\n';
    }
    for (const auto& r : sweep.rows) {
        out << r.magnitude << ",mean," << fmt(r.map50) << ',' << fmt(r.localization_f1) << ','
            << (r.classification_accuracy ? fmt(*r.classification_accuracy) : "") << '\n';
    }
    return out.str();
}

nlohmann::json to_json(const ShiftSweep& sweep)
{
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : sweep.cells) {
        cells.push_back(to_json(c.report));
    }
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : sweep.rows) {
        nlohmann::json row{{"shift_magnitude", r.magnitude}, {"map50", r.map50}, {"localization_f1", r.localization_f1}};
        row["classification_accuracy"] =
            r.classification_accuracy ? nlohmann::json(*r.classification_accuracy) : nlohmann::json(nullptr);
        rows.push_back(row);
    }
    return {{"support", {sweep.support.x, sweep.support.y, sweep.support.width, sweep.support.height}},
            {"gt_count", sweep.gt_count},
            {"rows", rows},
            {"cells", cells}};
}

std::string detection_product(const std::vector<Detection>& dets, const std::string& tile_id,
                              const ConfigHash& hash, int x_origin, int y_origin)
{
    std::string out;
    for (const auto& d : dets) {
        nlohmann::json j{{"tile_id", tile_id},
                         {"config_hash", to_hex(hash)},
                         {"box", {d.box.x_min + x_origin, d.box.y_min + y_origin, d.box.x_max + x_origin,
                                  d.box.y_max + y_origin}},
                         {"damage", to_string(d.damage)},
                         {"confidence", d.confidence},
                         {"objectness", d.objectness},
                         {"class_scores", d.class_scores}};
        out += j.dump() + "\n";
    }
    return out;
}

void export_patches(const std::vector<Detection>& dets, const Image& post, const std::string& directory,
                    const std::string& tile_id, int pad)
{
    std::filesystem::create_directories(directory);
    for (std::size_t i = 0; i < dets.size(); ++i) {
        const Box& b = dets[i].box;
        const int x0 = std::max(0, static_cast<int>(std::floor(b.x_min)) - pad);
        const int y0 = std::max(0, static_cast<int>(std::floor(b.y_min)) - pad);
        const int x1 = std::min(post.width, static_cast<int>(std::ceil(b.x_max)) + pad);
        const int y1 = std::min(post.height, static_cast<int>(std::ceil(b.y_max)) + pad);
        if (x1 <= x0 || y1 <= y0) {
            continue;
        }
        const std::string name = tile_id + "_" + std::to_string(i) + "_" + to_string(dets[i].damage) + ".png";
        write_png((std::filesystem::path(directory) / name).string(), crop(post, {x0, y0, x1 - x0, y1 - y0}));
    }
}

}  // namespace obda
