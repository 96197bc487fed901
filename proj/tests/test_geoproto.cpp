#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "obda/geoproto.hpp"

using namespace obda;

namespace {

// Pixel values encode their own coordinates, so any crop or shift is checkable.
Image coordinate_image(int size, float tag)
{
    Image img(3, size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            img.at(0, y, x) = static_cast<float>(x);
            img.at(1, y, x) = static_cast<float>(y);
            img.at(2, y, x) = tag;
        }
    }
    return img;
}

ScenePair coordinate_pair(int size, std::vector<BoxAnnotation> boxes)
{
    return make_scene_pair("p", coordinate_image(size, 0), coordinate_image(size, 1), std::move(boxes));
}

}  // namespace

TEST_CASE("a (150,150) shift of a 1024 pair leaves an 874 square and discards crossing boxes")
{
    auto pair = coordinate_pair(1024, {{{800, 800, 900, 900}, DamageClass::minor},
                                       {{10, 10, 40, 40}, DamageClass::major},
                                       {{200, 200, 874, 874}, DamageClass::destroyed}});
    auto shifted = apply_shift(pair, 150, 150);
    CHECK(shifted.support == Rect{0, 0, 874, 874});
    CHECK(shifted.pre.width == 874);
    CHECK(shifted.post.height == 874);
    REQUIRE(shifted.annotations.size() == 2);
    CHECK(shifted.annotations[0].damage == DamageClass::major);
    CHECK(shifted.annotations[1].damage == DamageClass::destroyed);

    auto neg = apply_shift(pair, -150, -150);
    CHECK(neg.support == Rect{150, 150, 874, 874});
    REQUIRE(neg.annotations.size() == 2);
    CHECK(neg.annotations[0].damage == DamageClass::minor);
    CHECK(neg.annotations[1].damage == DamageClass::destroyed);
}

TEST_CASE("the post sample at pre-frame p comes from p + (dx, dy)")
{
    auto pair = coordinate_pair(64, {});
    for (auto [dx, dy] : {std::pair{5, -7}, std::pair{-20, 3}, std::pair{0, 12}}) {
        auto s = apply_shift(pair, dx, dy);
        for (int y = 0; y < s.support.height; ++y) {
            for (int x = 0; x < s.support.width; ++x) {
                const int px = s.support.x + x, py = s.support.y + y;
                REQUIRE(s.pre.at(0, y, x) == px);
                REQUIRE(s.pre.at(1, y, x) == py);
                REQUIRE(s.post.at(0, y, x) == px + dx);
                REQUIRE(s.post.at(1, y, x) == py + dy);
            }
        }
        CHECK(s.shift_dx == dx);
        CHECK(s.shift_dy == dy);
    }
}

TEST_CASE("zero shift is the identity")
{
    auto pair = coordinate_pair(96, {{{1, 1, 95, 95}, DamageClass::minor}, {{0, 0, 96, 96}, DamageClass::major}});
    auto s = apply_shift(pair, 0, 0);
    CHECK(s.pre == pair.pre);
    CHECK(s.post == pair.post);
    CHECK(s.annotations == pair.annotations);
    CHECK(s.support == Rect{0, 0, 96, 96});

    Rng rng(1);
    auto a = shift_augment(pair, rng, 0);
    CHECK(a.pre == pair.pre);
    CHECK(a.post == pair.post);
    CHECK(a.annotations == pair.annotations);
}

TEST_CASE("augmentation is deterministic, bounded and covers both signs")
{
    auto pair = coordinate_pair(128, {{{60, 60, 70, 70}, DamageClass::minor}});
    Rng r1(7), r2(7);
    bool saw_neg_x = false, saw_pos_x = false, saw_neg_y = false, saw_pos_y = false;
    for (int i = 0; i < 200; ++i) {
        auto a = shift_augment(pair, r1, 40);
        auto b = shift_augment(pair, r2, 40);
        CHECK(a.post == b.post);
        CHECK(a.annotations == b.annotations);
        CHECK(std::abs(a.shift_dx) <= 40);
        CHECK(std::abs(a.shift_dy) <= 40);
        CHECK(a.support == shifted_intersection(128, 128, a.shift_dx, a.shift_dy));
        for (const auto& ann : a.annotations) {
            CHECK(a.support.contains(ann.box));
        }
        saw_neg_x |= a.shift_dx < 0;
        saw_pos_x |= a.shift_dx > 0;
        saw_neg_y |= a.shift_dy < 0;
        saw_pos_y |= a.shift_dy > 0;
    }
    CHECK((saw_neg_x && saw_pos_x && saw_neg_y && saw_pos_y));
    CHECK_THROWS_AS(shift_augment(pair, r1, 128), Error);
}

TEST_CASE("fixed support follows the largest shift")
{
    std::vector<ScenePair> pairs{coordinate_pair(1024, {{{10, 10, 50, 50}, DamageClass::minor},
                                                        {{950, 950, 1000, 1000}, DamageClass::major},
                                                        {{300, 300, 400, 400}, DamageClass::destroyed}})};
    auto shared = std::make_shared<const std::vector<ScenePair>>(pairs);
    FixedSupportSet one(shared, {0, 50, 100}, {{1, 1}});
    CHECK(one.support() == Rect{0, 0, 924, 924});
    auto zero = one.instance(0, 0, {1, 1});
    auto far = one.instance(0, 100, {1, 1});
    CHECK(zero.pre.width == 924);
    CHECK(zero.support == far.support);
    CHECK(zero.annotations == far.annotations);
    CHECK(zero.annotations.size() == 2);
    CHECK(zero.annotations[1].damage == DamageClass::destroyed);

    FixedSupportSet four(shared, {0, 25, 50, 100}, diagonal_directions());
    CHECK(four.support() == Rect{100, 100, 824, 824});
    const auto& reference = four.annotations(0);
    for (int m : four.magnitudes()) {
        for (const auto& d : four.directions()) {
            auto inst = four.instance(0, m, d);
            CHECK(inst.annotations == reference);
            CHECK(inst.support == four.support());
            CHECK(inst.shift_dx == d.sx * m);
            CHECK(inst.shift_dy == d.sy * m);
        }
    }

    CHECK_THROWS_AS(FixedSupportSet(shared, {100, 50}, {{1, 1}}), Error);
    CHECK_THROWS_AS(FixedSupportSet(shared, {0, 1024}, {{1, 1}}), Error);
    CHECK_THROWS_AS(FixedSupportSet(shared, {0, 10}, {}), Error);
    CHECK_THROWS_AS(four.instance(0, 150, {1, 1}), Error);
}

TEST_CASE("support area is non-increasing in the largest shift")
{
    long long previous = 1LL << 62;
    for (int m = 0; m < 128; m += 7) {
        const auto r = fixed_support(256, 256, m, diagonal_directions());
        CHECK(r.area() <= previous);
        previous = r.area();
    }
    previous = 1LL << 62;
    for (int m = 0; m < 128; m += 5) {
        const auto r = fixed_support(256, 256, m, axis_directions());
        CHECK(r.area() <= previous);
        previous = r.area();
    }
    // Opposite directions at half the image size or more share no pixels.
    CHECK_THROWS_AS(fixed_support(256, 256, 128, diagonal_directions()), Error);
    CHECK(fixed_support(256, 256, 200, {{1, 1}}).area() == 56 * 56);
}

TEST_CASE("direction names round trip")
{
    for (const auto& d : diagonal_directions()) {
        CHECK(shift_direction_from_string(to_string(d)) == d);
    }
    CHECK(to_string(ShiftDirection{1, -1}) == "+-");
    CHECK_THROWS_AS(shift_direction_from_string("00"), Error);
    CHECK_THROWS_AS(shift_direction_from_string("+"), Error);
}
