#include "obda/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "obda/error.hpp"

namespace obda {

namespace {

std::vector<std::size_t> confidence_order(const std::vector<Detection>& dets)
{
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });
    return order;
}

// A detection from one image, tagged with whether greedy matching made it a true positive.
struct Scored {
    double confidence;
    std::size_t image;
    std::size_t rank;  // position in its image's confidence order
    bool tp;
};

// Pools per-image matches into one confidence-sorted list. Greedy matching is
// sequential in confidence order, so the matches among detections above any
// cut are exactly the matches of the full run restricted to them.
std::vector<Scored> pooled(const std::vector<ImageEval>& images, double iou_threshold, bool class_aware,
                           std::optional<DamageClass> cls, int* gt_total)
{
    std::vector<Scored> out;
    int gts_seen = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        std::vector<Detection> dets;
        std::vector<BoxAnnotation> gts;
        for (const auto& d : images[i].dets) {
            if (!cls || d.damage == *cls) dets.push_back(d);
        }
        for (const auto& g : images[i].gts) {
            if (!cls || g.damage == *cls) gts.push_back(g);
        }
        gts_seen += static_cast<int>(gts.size());
        const auto m = greedy_match(dets, gts, iou_threshold, class_aware);
        std::vector<char> is_tp(dets.size(), 0);
        for (const auto& p : m.pairs) is_tp[p.det] = 1;
        const auto order = confidence_order(dets);
        for (std::size_t r = 0; r < order.size(); ++r) {
            out.push_back({dets[order[r]].confidence, i, r, is_tp[order[r]] != 0});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const Scored& a, const Scored& b) { return a.confidence > b.confidence; });
    if (gt_total) *gt_total = gts_seen;
    return out;
}

double ap_from_ranked(const std::vector<Scored>& ranked, int gt_total)
{
    std::vector<double> precision, recall;
    int tp = 0;
    for (std::size_t k = 0; k < ranked.size(); ++k) {
        tp += ranked[k].tp ? 1 : 0;
        precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
        recall.push_back(static_cast<double>(tp) / gt_total);
    }
    // Precision envelope, then area under the step function at each recall increase.
    for (std::size_t k = precision.size(); k-- > 1;) {
        precision[k - 1] = std::max(precision[k - 1], precision[k]);
    }
    double ap = 0, prev_recall = 0;
    for (std::size_t k = 0; k < recall.size(); ++k) {
        if (recall[k] > prev_recall) {
            ap += (recall[k] - prev_recall) * precision[k];
            prev_recall = recall[k];
        }
    }
    return ap;
}

// Best F1 over cuts at each distinct confidence, from a pooled ranking.
SweepResult sweep(const std::vector<Scored>& ranked, int gt_total)
{
    SweepResult best;
    int tp = 0;
    for (std::size_t k = 0; k < ranked.size(); ++k) {
        tp += ranked[k].tp ? 1 : 0;
        // Only cut after the last detection sharing this confidence.
        if (k + 1 < ranked.size() && ranked[k + 1].confidence == ranked[k].confidence) {
            continue;
        }
        const auto s = prf_from_counts(tp, static_cast<int>(k + 1) - tp, gt_total - tp);
        if (s.f1 > best.f1) {
            best = {s.f1, ranked[k].confidence, s.precision, s.recall};
        }
    }
    if (best.f1 == 0 && !ranked.empty()) {
        best.threshold = ranked.front().confidence;
    }
    return best;
}

std::vector<Detection> above(const std::vector<Detection>& dets, double threshold)
{
    std::vector<Detection> out;
    for (const auto& d : dets) {
        if (d.confidence >= threshold) out.push_back(d);
    }
    return out;
}

}  // namespace

MatchResult greedy_match(const std::vector<Detection>& dets, const std::vector<BoxAnnotation>& gts,
                         double iou_threshold, bool class_aware)
{
    MatchResult result;
    std::vector<char> gt_used(gts.size(), 0);
    for (std::size_t d : confidence_order(dets)) {
        std::optional<std::size_t> best;
        double best_iou = 0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (gt_used[g] || (class_aware && gts[g].damage != dets[d].damage)) continue;
            const double v = iou(dets[d].box, gts[g].box);
            if (v >= iou_threshold && (!best || v > best_iou)) {
                best = g;
                best_iou = v;
            }
        }
        if (best) {
            gt_used[*best] = 1;
            result.pairs.push_back({d, *best, best_iou});
        } else {
            result.unmatched_dets.push_back(d);
        }
    }
    std::sort(result.unmatched_dets.begin(), result.unmatched_dets.end());
    for (std::size_t g = 0; g < gts.size(); ++g) {
        if (!gt_used[g]) result.unmatched_gts.push_back(g);
    }
    return result;
}

std::optional<double> average_precision(const std::vector<ImageEval>& images, DamageClass cls, double iou_threshold)
{
    int gt_total = 0;
    const auto ranked = pooled(images, iou_threshold, true, cls, &gt_total);
    if (gt_total == 0) return std::nullopt;
    return ap_from_ranked(ranked, gt_total);
}

std::optional<double> average_precision(const std::vector<Detection>& dets, const std::vector<BoxAnnotation>& gts,
                                        DamageClass cls, double iou_threshold)
{
    return average_precision(std::vector<ImageEval>{{dets, gts}}, cls, iou_threshold);
}

double mean_average_precision(const std::vector<ImageEval>& images, double iou_threshold)
{
    double total = 0;
    int classes = 0;
    for (DamageClass c : kAllClasses) {
        if (auto ap = average_precision(images, c, iou_threshold)) {
            total += *ap;
            ++classes;
        }
    }
    return classes ? total / classes : 0.0;
}

SweepResult localization_f1(const std::vector<ImageEval>& images, double iou_threshold)
{
    int gt_total = 0;
    const auto ranked = pooled(images, iou_threshold, false, std::nullopt, &gt_total);
    return sweep(ranked, gt_total);
}

SweepResult localization_f1(const std::vector<Detection>& dets, const std::vector<BoxAnnotation>& gts,
                            double iou_threshold)
{
    return localization_f1(std::vector<ImageEval>{{dets, gts}}, iou_threshold);
}

std::optional<double> classification_accuracy(const MatchResult& match, const std::vector<Detection>& dets,
                                              const std::vector<BoxAnnotation>& gts)
{
    if (match.pairs.empty()) return std::nullopt;
    int correct = 0;
    for (const auto& p : match.pairs) {
        correct += dets.at(p.det).damage == gts.at(p.gt).damage ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(match.pairs.size());
}

PrfScore prf_from_counts(int tp, int fp, int fn)
{
    PrfScore s;
    s.tp = tp;
    s.fp = fp;
    s.fn = fn;
    s.precision_defined = tp + fp > 0;
    s.precision = s.precision_defined ? static_cast<double>(tp) / (tp + fp) : 0.0;
    s.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    s.f1 = 2 * tp + fp + fn > 0 ? 2.0 * tp / (2.0 * tp + fp + fn) : 0.0;
    return s;
}

EvalReport evaluate(const std::vector<ImageEval>& images, double iou_threshold)
{
    EvalReport r;
    r.images = static_cast<int>(images.size());
    for (const auto& im : images) {
        r.gt_count += static_cast<int>(im.gts.size());
        r.det_count += static_cast<int>(im.dets.size());
    }

    double ap_total = 0;
    int ap_classes = 0;
    for (DamageClass c : kAllClasses) {
        r.ap[class_index(c)] = average_precision(images, c, iou_threshold);
        if (r.ap[class_index(c)]) {
            ap_total += *r.ap[class_index(c)];
            ++ap_classes;
        }
    }
    r.map50 = ap_classes ? ap_total / ap_classes : 0.0;

    int gt_total = 0;
    const auto aware = sweep(pooled(images, iou_threshold, true, std::nullopt, &gt_total), gt_total);
    r.operating_threshold = aware.threshold;
    std::array<int, kNumClasses> tp{}, fp{}, fn{};
    for (const auto& im : images) {
        const auto dets = above(im.dets, r.operating_threshold);
        const auto m = greedy_match(dets, im.gts, iou_threshold, true);
        for (const auto& p : m.pairs) ++tp[class_index(dets[p.det].damage)];
        for (auto d : m.unmatched_dets) ++fp[class_index(dets[d].damage)];
        for (auto g : m.unmatched_gts) ++fn[class_index(im.gts[g].damage)];
    }
    int macro_classes = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        r.per_class[c] = prf_from_counts(tp[c], fp[c], fn[c]);
        if (tp[c] + fn[c] > 0) {
            r.macro_precision += r.per_class[c].precision;
            r.macro_recall += r.per_class[c].recall;
            r.macro_f1 += r.per_class[c].f1;
            ++macro_classes;
        }
    }
    if (macro_classes) {
        r.macro_precision /= macro_classes;
        r.macro_recall /= macro_classes;
        r.macro_f1 /= macro_classes;
    }
    r.micro = prf_from_counts(std::accumulate(tp.begin(), tp.end(), 0), std::accumulate(fp.begin(), fp.end(), 0),
                              std::accumulate(fn.begin(), fn.end(), 0));

    const auto loc = localization_f1(images, iou_threshold);
    r.localization_f1 = loc.f1;
    r.localization_threshold = loc.threshold;
    int correct = 0;
    for (const auto& im : images) {
        const auto dets = above(im.dets, loc.threshold);
        const auto m = greedy_match(dets, im.gts, iou_threshold, false);
        r.matched += static_cast<int>(m.pairs.size());
        for (const auto& p : m.pairs) correct += dets[p.det].damage == im.gts[p.gt].damage ? 1 : 0;
    }
    if (r.matched > 0) {
        r.classification_accuracy = static_cast<double>(correct) / r.matched;
    }
    return r;
}

nlohmann::json to_json(const EvalReport& r)
{
    using nlohmann::json;
    auto prf = [](const PrfScore& s) {
        return json{{"precision", s.precision}, {"recall", s.recall},       {"f1", s.f1},
                    {"tp", s.tp},               {"fp", s.fp},               {"fn", s.fn},
                    {"precision_defined", s.precision_defined}};
    };
    json ap = json::object(), per_class = json::object();
    for (DamageClass c : kAllClasses) {
        const auto& v = r.ap[class_index(c)];
        ap[to_string(c)] = v ? json(*v) : json(nullptr);
        per_class[to_string(c)] = prf(r.per_class[class_index(c)]);
    }
    json j{{"map50", r.map50},
           {"ap50", ap},
           {"operating_threshold", r.operating_threshold},
           {"per_class", per_class},
           {"micro", prf(r.micro)},
           {"macro", {{"precision", r.macro_precision}, {"recall", r.macro_recall}, {"f1", r.macro_f1}}},
           {"localization_f1", r.localization_f1},
           {"localization_threshold", r.localization_threshold},
           {"classification_accuracy", r.classification_accuracy ? json(*r.classification_accuracy) : json(nullptr)},
           {"matched", r.matched},
           {"images", r.images},
           {"gt_count", r.gt_count},
           {"det_count", r.det_count}};
    if (r.shift_magnitude) j["shift_magnitude"] = *r.shift_magnitude;
    if (r.shift_direction) j["shift_direction"] = *r.shift_direction;
    return j;
}

}  // namespace obda
