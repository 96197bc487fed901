#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "obda/metrics.hpp"

// Brute-force metric oracles and random detection instances shared by the
// metric unit tests and the acceptance gate.
namespace obda::oracles {

using Rng = std::mt19937_64;

inline Detection det(Box b, DamageClass c, double conf)
{
    Detection d;
    d.box = b;
    d.damage = c;
    d.confidence = conf;
    d.objectness = conf;
    d.class_scores[class_index(c)] = 1.0;
    return d;
}

// Small integer boxes on a 12x12 canvas so IoU and confidence ties are common.
struct Instance {
    std::vector<Detection> dets;
    std::vector<BoxAnnotation> gts;
};

inline Box random_box(Rng& rng)
{
    std::uniform_int_distribution<int> pos(0, 8), ext(2, 5);
    const int x = pos(rng), y = pos(rng);
    return {static_cast<double>(x), static_cast<double>(y), static_cast<double>(x + ext(rng)),
            static_cast<double>(y + ext(rng))};
}

inline Instance random_instance(Rng& rng)
{
    Instance in;
    std::uniform_int_distribution<int> count(0, 5), cls(0, 1), conf(1, 6);
    const int n_gt = count(rng), n_det = count(rng);
    for (int g = 0; g < n_gt; ++g) {
        in.gts.push_back({random_box(rng), static_cast<DamageClass>(cls(rng))});
    }
    for (int d = 0; d < n_det; ++d) {
        // Half the detections jitter a GT so matches actually happen.
        Box b = random_box(rng);
        if (!in.gts.empty() && rng() % 2 == 0) {
            b = in.gts[rng() % in.gts.size()].box;
            b.x_max += static_cast<double>(rng() % 2);
        }
        in.dets.push_back(det(b, static_cast<DamageClass>(cls(rng)), conf(rng) / 10.0));
    }
    return in;
}

// Oracle: recursive statement of the greedy rule. The first detection (by
// confidence, then index) among those remaining takes its best admissible GT
// among those remaining; recurse on the rest.
inline void oracle_match(const std::vector<Detection>& dets, const std::vector<BoxAnnotation>& gts, double thr, bool aware,
                  std::set<std::size_t> dets_left, std::set<std::size_t> gts_left,
                  std::vector<std::pair<std::size_t, std::size_t>>& out)
{
    if (dets_left.empty()) return;
    std::size_t first = *dets_left.begin();
    for (auto d : dets_left) {
        if (dets[d].confidence > dets[first].confidence) first = d;
    }
    dets_left.erase(first);
    double best = -1;
    std::size_t best_gt = 0;
    for (auto g : gts_left) {
        if (aware && gts[g].damage != dets[first].damage) continue;
        const double v = iou(dets[first].box, gts[g].box);
        if (v >= thr && v > best) {
            best = v;
            best_gt = g;
        }
    }
    if (best >= 0) {
        gts_left.erase(best_gt);
        out.emplace_back(first, best_gt);
    }
    oracle_match(dets, gts, thr, aware, dets_left, gts_left, out);
}

inline std::vector<std::pair<std::size_t, std::size_t>> oracle_pairs(const Instance& in, bool aware)
{
    std::set<std::size_t> d, g;
    for (std::size_t i = 0; i < in.dets.size(); ++i) d.insert(i);
    for (std::size_t i = 0; i < in.gts.size(); ++i) g.insert(i);
    std::vector<std::pair<std::size_t, std::size_t>> out;
    oracle_match(in.dets, in.gts, 0.5, aware, d, g, out);
    return out;
}

// Oracle: AP = sum over recall levels m/G of (1/G) * best precision at recall >= m/G.
inline std::optional<double> oracle_ap(const Instance& in, DamageClass cls)
{
    std::vector<Detection> dets;
    std::vector<BoxAnnotation> gts;
    for (const auto& d : in.dets) if (d.damage == cls) dets.push_back(d);
    for (const auto& g : in.gts) if (g.damage == cls) gts.push_back(g);
    if (gts.empty()) return std::nullopt;
    Instance sub{dets, gts};
    auto pairs = oracle_pairs(sub, true);
    std::vector<char> tp(dets.size(), 0);
    for (auto [d, g] : pairs) tp[d] = 1;
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return dets[a].confidence > dets[b].confidence; });
    std::vector<double> p, r;
    int hits = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        hits += tp[order[k]];
        p.push_back(static_cast<double>(hits) / (k + 1));
        r.push_back(static_cast<double>(hits) / gts.size());
    }
    double ap = 0;
    const int G = static_cast<int>(gts.size());
    for (int m = 1; m <= G; ++m) {
        double best = 0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            if (r[k] >= static_cast<double>(m) / G - 1e-12) best = std::max(best, p[k]);
        }
        ap += best / G;
    }
    return ap;
}

inline double oracle_loc_f1(const Instance& in)
{
    std::set<double> confs;
    for (const auto& d : in.dets) confs.insert(d.confidence);
    double best = 0;
    for (double t : confs) {
        Instance cut;
        cut.gts = in.gts;
        for (const auto& d : in.dets) if (d.confidence >= t) cut.dets.push_back(d);
        const auto pairs = oracle_pairs(cut, false);
        const double tp = pairs.size();
        const double fp = cut.dets.size() - tp, fn = cut.gts.size() - tp;
        if (tp > 0) best = std::max(best, 2 * tp / (2 * tp + fp + fn));
    }
    return best;
}


}  // namespace obda::oracles
