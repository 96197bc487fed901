#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "obda/error.hpp"
#include "obda/metrics.hpp"
#include "metric_oracles.hpp"

using namespace obda;
using namespace obda::oracles;

TEST_CASE("iou examples")
{
    const Box a{0, 0, 10, 10};
    CHECK(iou(a, a) == 1.0);
    CHECK(iou(a, {20, 20, 30, 30}) == 0.0);
    CHECK(iou(a, {10, 0, 20, 10}) == 0.0);
    CHECK(iou(a, {5, 0, 15, 10}) == doctest::Approx(50.0 / 150.0).epsilon(1e-15));
    try {
        iou(a, {3, 3, 3, 9});
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::input);
    }
}

TEST_CASE("greedy matching basics")
{
    const std::vector<BoxAnnotation> gts{{{0, 0, 10, 10}, DamageClass::minor}};
    auto one = greedy_match({det({0, 0, 10, 10}, DamageClass::minor, 0.5)}, gts);
    CHECK(one.pairs.size() == 1);

    std::vector<Detection> two{det({0, 0, 10, 10}, DamageClass::minor, 0.4),
                               det({0, 0, 10, 10}, DamageClass::minor, 0.9)};
    auto m = greedy_match(two, gts);
    REQUIRE(m.pairs.size() == 1);
    CHECK(m.pairs[0].det == 1);
    CHECK(m.unmatched_dets == std::vector<std::size_t>{0});

    // Class-agnostic mode ignores labels.
    auto blind = greedy_match({det({0, 0, 10, 10}, DamageClass::destroyed, 0.5)}, gts, 0.5, false);
    CHECK(blind.pairs.size() == 1);
    auto aware = greedy_match({det({0, 0, 10, 10}, DamageClass::destroyed, 0.5)}, gts, 0.5, true);
    CHECK(aware.pairs.empty());
    CHECK(aware.unmatched_gts == std::vector<std::size_t>{0});
}

TEST_CASE("greedy matching equals the recursive oracle on random instances")
{
    Rng rng(1);
    for (int trial = 0; trial < 2000; ++trial) {
        const auto in = random_instance(rng);
        for (bool aware : {true, false}) {
            const auto m = greedy_match(in.dets, in.gts, 0.5, aware);
            const auto expected = oracle_pairs(in, aware);
            REQUIRE(m.pairs.size() == expected.size());
            for (std::size_t k = 0; k < expected.size(); ++k) {
                CHECK(m.pairs[k].det == expected[k].first);
                CHECK(m.pairs[k].gt == expected[k].second);
            }
            CHECK(m.pairs.size() + m.unmatched_dets.size() == in.dets.size());
            CHECK(m.pairs.size() + m.unmatched_gts.size() == in.gts.size());
        }
    }
}

TEST_CASE("hand-computed average precision")
{
    const std::vector<BoxAnnotation> gts{{{0, 0, 10, 10}, DamageClass::major}, {{20, 0, 30, 10}, DamageClass::major}};
    const std::vector<Detection> dets{det({0, 0, 10, 10}, DamageClass::major, 0.9),
                                      det({50, 50, 60, 60}, DamageClass::major, 0.8),
                                      det({20, 0, 30, 10}, DamageClass::major, 0.7)};
    const auto ap = average_precision(dets, gts, DamageClass::major);
    REQUIRE(ap.has_value());
    CHECK(std::abs(*ap - (0.5 + 2.0 / 3.0 * 0.5)) < 1e-9);

    CHECK(*average_precision({det({0, 0, 10, 10}, DamageClass::major, 0.9)}, {gts[0]}, DamageClass::major) == 1.0);
    CHECK(*average_precision({}, {gts[0]}, DamageClass::major) == 0.0);
    CHECK_FALSE(average_precision(dets, gts, DamageClass::minor).has_value());
}

TEST_CASE("average precision equals the recall-level oracle on random instances")
{
    Rng rng(2);
    for (int trial = 0; trial < 2000; ++trial) {
        const auto in = random_instance(rng);
        for (DamageClass c : {DamageClass::no_damage, DamageClass::minor}) {
            const auto ap = average_precision(in.dets, in.gts, c);
            const auto expected = oracle_ap(in, c);
            REQUIRE(ap.has_value() == expected.has_value());
            if (ap) {
                CHECK(*ap == doctest::Approx(*expected).epsilon(1e-12));
                CHECK(*ap >= 0.0);
                CHECK(*ap <= 1.0);
            }
        }
    }
}

TEST_CASE("localization F1 sweep equals exhaustive evaluation")
{
    Rng rng(3);
    for (int trial = 0; trial < 2000; ++trial) {
        const auto in = random_instance(rng);
        const auto s = localization_f1(in.dets, in.gts);
        CHECK(s.f1 == doctest::Approx(oracle_loc_f1(in)).epsilon(1e-12));
        CHECK(s.f1 >= 0.0);
        CHECK(s.f1 <= 1.0);
    }
    CHECK(localization_f1({}, {{{0, 0, 5, 5}, DamageClass::minor}}).f1 == 0.0);

    // Right boxes, wrong labels: perfect localization.
    const std::vector<BoxAnnotation> gts{{{0, 0, 10, 10}, DamageClass::minor}, {{20, 0, 30, 10}, DamageClass::major}};
    const std::vector<Detection> dets{det({0, 0, 10, 10}, DamageClass::destroyed, 0.9),
                                      det({20, 0, 30, 10}, DamageClass::no_damage, 0.6)};
    CHECK(localization_f1(dets, gts).f1 == 1.0);
}

TEST_CASE("classification accuracy on matched pairs")
{
    const std::vector<BoxAnnotation> gts{{{0, 0, 10, 10}, DamageClass::minor},
                                         {{20, 0, 30, 10}, DamageClass::major},
                                         {{40, 0, 50, 10}, DamageClass::destroyed},
                                         {{60, 0, 70, 10}, DamageClass::no_damage}};
    std::vector<Detection> dets{det({0, 0, 10, 10}, DamageClass::minor, 0.9),
                                det({20, 0, 30, 10}, DamageClass::major, 0.8),
                                det({40, 0, 50, 10}, DamageClass::destroyed, 0.7),
                                det({60, 0, 70, 10}, DamageClass::minor, 0.6)};
    auto m = greedy_match(dets, gts, 0.5, false);
    CHECK(*classification_accuracy(m, dets, gts) == 0.75);

    dets[3].damage = DamageClass::no_damage;
    m = greedy_match(dets, gts, 0.5, false);
    CHECK(*classification_accuracy(m, dets, gts) == 1.0);

    // Unmatched extras leave the value alone.
    auto more_gts = gts;
    more_gts.push_back({{100, 100, 110, 110}, DamageClass::major});
    auto more_dets = dets;
    more_dets.push_back(det({200, 200, 210, 210}, DamageClass::minor, 0.95));
    m = greedy_match(more_dets, more_gts, 0.5, false);
    CHECK(*classification_accuracy(m, more_dets, more_gts) == 1.0);

    CHECK_FALSE(classification_accuracy(greedy_match({}, gts, 0.5, false), {}, gts).has_value());
}

TEST_CASE("metric properties on random instances")
{
    Rng rng(4);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto in = random_instance(rng);

        // Order-only dependence of AP.
        auto warped = in.dets;
        for (auto& d : warped) d.confidence = std::pow(d.confidence, 3.0) * 7.0 + 1.0;
        for (DamageClass c : {DamageClass::no_damage, DamageClass::minor}) {
            auto a = average_precision(in.dets, in.gts, c);
            auto b = average_precision(warped, in.gts, c);
            REQUIRE(a.has_value() == b.has_value());
            if (a) CHECK(*a == *b);
        }

        // Dropping a false positive never lowers AP.
        const auto m = greedy_match(in.dets, in.gts, 0.5, true);
        for (auto fp : m.unmatched_dets) {
            auto fewer = in.dets;
            const DamageClass c = fewer[fp].damage;
            fewer.erase(fewer.begin() + static_cast<long>(fp));
            auto before = average_precision(in.dets, in.gts, c);
            auto after = average_precision(fewer, in.gts, c);
            if (before) CHECK(*after >= *before - 1e-12);
        }

        // Class-blind F1 dominates class-aware F1 at every cut.
        const double loc = localization_f1(in.dets, in.gts).f1;
        std::set<double> confs;
        for (const auto& d : in.dets) confs.insert(d.confidence);
        for (double t : confs) {
            std::vector<Detection> cut;
            for (const auto& d : in.dets) if (d.confidence >= t) cut.push_back(d);
            const auto ma = greedy_match(cut, in.gts, 0.5, true);
            const auto mb = greedy_match(cut, in.gts, 0.5, false);
            const auto fa = prf_from_counts(static_cast<int>(ma.pairs.size()), static_cast<int>(ma.unmatched_dets.size()),
                                            static_cast<int>(ma.unmatched_gts.size()));
            const auto fb = prf_from_counts(static_cast<int>(mb.pairs.size()), static_cast<int>(mb.unmatched_dets.size()),
                                            static_cast<int>(mb.unmatched_gts.size()));
            CHECK(fb.f1 >= fa.f1);
            CHECK(loc >= fa.f1);
        }
    }
}

TEST_CASE("evaluation report pools images")
{
    std::vector<ImageEval> images(2);
    images[0].gts = {{{0, 0, 10, 10}, DamageClass::minor}};
    images[0].dets = {det({0, 0, 10, 10}, DamageClass::minor, 0.9)};
    images[1].gts = {{{0, 0, 10, 10}, DamageClass::major}};
    images[1].dets = {det({0, 0, 10, 10}, DamageClass::minor, 0.8)};
    const auto r = evaluate(images);
    CHECK(r.images == 2);
    CHECK(r.gt_count == 2);
    CHECK_FALSE(r.ap[class_index(DamageClass::no_damage)].has_value());
    CHECK(*r.ap[class_index(DamageClass::minor)] == 1.0);
    CHECK(*r.ap[class_index(DamageClass::major)] == 0.0);
    CHECK(r.map50 == 0.5);
    CHECK(r.localization_f1 == 1.0);
    CHECK(*r.classification_accuracy == 0.5);
    CHECK(r.matched == 2);
    CHECK(r.per_class[class_index(DamageClass::major)].fn == 1);
    CHECK_FALSE(r.per_class[class_index(DamageClass::major)].precision_defined);
    const auto j = to_json(r);
    CHECK(j["ap50"]["no_damage"].is_null());
    CHECK(j["map50"] == 0.5);

    const auto empty = evaluate({ImageEval{{}, {{{0, 0, 4, 4}, DamageClass::minor}}}});
    CHECK_FALSE(empty.classification_accuracy.has_value());
    CHECK(to_json(empty)["classification_accuracy"].is_null());
}
