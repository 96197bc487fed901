#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "obda/datasets.hpp"

using namespace obda;
namespace fs = std::filesystem;

namespace {

double mean_abs_diff(const Image& a, const Image& b, const Box& box)
{
    double total = 0;
    int n = 0;
    for (int c = 0; c < 3; ++c) {
        for (int y = static_cast<int>(box.y_min); y < static_cast<int>(box.y_max); ++y) {
            for (int x = static_cast<int>(box.x_min); x < static_cast<int>(box.x_max); ++x) {
                total += std::abs(a.at(c, y, x) - b.at(c, y, x));
                ++n;
            }
        }
    }
    return total / n;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name)
    {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& text)
{
    fs::create_directories(p.parent_path());
    std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("generation is deterministic")
{
    SyntheticSceneSpec spec;
    auto a = generate_scene(spec, 42);
    auto b = generate_scene(spec, 42);
    CHECK(a.pre == b.pre);
    CHECK(a.post == b.post);
    CHECK(a.annotations == b.annotations);
    auto c = generate_scene(spec, 43);
    CHECK_FALSE(a.pre == c.pre);
}

TEST_CASE("all-intact scenes differ only by illumination")
{
    SyntheticSceneSpec spec;
    spec.class_distribution = {1, 0, 0, 0};
    spec.illumination_jitter = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto p = generate_scene(spec, seed);
        CHECK(p.pre == p.post);
    }
    spec.illumination_jitter = 0.05;
    auto p = generate_scene(spec, 3);
    // A global gain: post/pre is one constant wherever pre is clear of the clamps.
    double ratio = -1;
    bool constant = true;
    for (std::size_t i = 0; i < p.pre.data.size(); ++i) {
        if (p.pre.data[i] > 0.05f && p.pre.data[i] < 0.9f) {
            const double r = p.post.data[i] / p.pre.data[i];
            if (ratio < 0) ratio = r;
            constant = constant && std::abs(r - ratio) < 1e-5;
        }
    }
    CHECK(constant);
    CHECK(std::abs(ratio - 1.0) <= 0.05 + 1e-6);
}

TEST_CASE("destroyed buildings change more than intact ones")
{
    SyntheticSceneSpec spec;
    int scenes_checked = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        auto p = generate_scene(spec, seed);
        double max_intact = -1, min_destroyed = 1e9;
        for (const auto& a : p.annotations) {
            const double d = mean_abs_diff(p.pre, p.post, a.box);
            if (a.damage == DamageClass::no_damage) max_intact = std::max(max_intact, d);
            if (a.damage == DamageClass::destroyed) min_destroyed = std::min(min_destroyed, d);
        }
        if (max_intact >= 0 && min_destroyed < 1e9) {
            CHECK(min_destroyed > max_intact);
            ++scenes_checked;
        }
    }
    CHECK(scenes_checked > 5);
}

TEST_CASE("annotations match rendered buildings")
{
    SyntheticSceneSpec spec;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto p = generate_scene(spec, seed);
        const Image bg = synthetic_background(spec, seed);
        CHECK(static_cast<int>(p.annotations.size()) >= spec.building_count_range.first);
        CHECK(static_cast<int>(p.annotations.size()) <= spec.building_count_range.second);
        for (std::size_t i = 0; i < p.annotations.size(); ++i) {
            const Box& b = p.annotations[i].box;
            CHECK(b.valid());
            CHECK(Rect{0, 0, 256, 256}.contains(b));
            CHECK(b.width() >= spec.building_size_range.first);
            CHECK(b.width() <= spec.building_size_range.second);
            CHECK(mean_abs_diff(p.pre, bg, b) > 0.05);
            for (std::size_t j = i + 1; j < p.annotations.size(); ++j) {
                CHECK(iou(b, p.annotations[j].box) == 0.0);
            }
        }
        // Outside every box the pre image is pure background.
        Image masked = p.pre;
        for (const auto& a : p.annotations) {
            for (int c = 0; c < 3; ++c)
                for (int y = static_cast<int>(a.box.y_min); y < a.box.y_max; ++y)
                    for (int x = static_cast<int>(a.box.x_min); x < a.box.x_max; ++x) masked.at(c, y, x) = bg.at(c, y, x);
        }
        CHECK(masked == bg);
    }
}

TEST_CASE("impossible placement is a configuration error")
{
    SyntheticSceneSpec spec;
    spec.image_size = 64;
    spec.building_count_range = {30, 30};
    spec.building_size_range = {20, 30};
    try {
        generate_scene(spec, 1);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::config);
    }
    SyntheticSceneSpec bad;
    bad.class_distribution = {0.5, 0.5, 0.5, 0};
    CHECK_THROWS_AS(generate_scene(bad, 1), Error);
}

TEST_CASE("post_shift crops through the shift protocol")
{
    SyntheticSceneSpec spec;
    spec.post_shift = std::pair{16, -8};
    auto p = generate_scene(spec, 5);
    CHECK(p.shift_dx == 16);
    CHECK(p.shift_dy == -8);
    CHECK(p.support == Rect{0, 8, 240, 248});
    for (const auto& a : p.annotations) {
        CHECK(p.support.contains(a.box));
    }
}

TEST_CASE("polygon envelopes")
{
    CHECK(polygon_envelope({{0, 0}, {10, 0}, {0, 8}}) == Box{0, 0, 10, 8});
    const std::vector<std::pair<double, double>> rect{{2, 3}, {9, 3}, {9, 7}, {2, 7}};
    const Box b = polygon_envelope(rect);
    CHECK(b == Box{2, 3, 9, 7});
    CHECK(polygon_envelope({{b.x_min, b.y_min}, {b.x_max, b.y_min}, {b.x_max, b.y_max}, {b.x_min, b.y_max}}) == b);

    Rng rng(3);
    std::uniform_real_distribution<double> u(-50, 50);
    for (int t = 0; t < 100; ++t) {
        std::vector<std::pair<double, double>> poly;
        for (int k = 0; k < 3 + t % 5; ++k) poly.emplace_back(u(rng), u(rng));
        const Box e = polygon_envelope(poly);
        for (auto [x, y] : poly) {
            CHECK((x >= e.x_min && x <= e.x_max && y >= e.y_min && y <= e.y_max));
        }
    }
}

TEST_CASE("xBD annotation parsing")
{
    const std::string doc = R"js({"features": {"xy": [
        {"properties": {"subtype": "no-damage"}, "wkt": "POLYGON ((0 0, 10 0, 0 8, 0 0))"},
        {"properties": {"subtype": "un-classified"}, "wkt": "POLYGON ((1 1, 5 1, 5 5, 1 1))"},
        {"properties": {"subtype": "destroyed"}, "wkt": "POLYGON ((20 30, 40 30, 40 50, 20 50, 20 30))"},
        {"properties": {"subtype": "un-classified"}, "wkt": "POLYGON ((2 2, 6 2, 6 6, 2 2))"},
        {"properties": {"subtype": "major-damage"}, "vertices": [[3, 4], [7, 4], [5, 9]]}
    ]}})js";
    int dropped = 0;
    auto boxes = parse_xbd_annotations(doc, "sample.json", &dropped);
    CHECK(dropped == 2);
    REQUIRE(boxes.size() == 3);
    CHECK(boxes[0] == BoxAnnotation{{0, 0, 10, 8}, DamageClass::no_damage});
    CHECK(boxes[1] == BoxAnnotation{{20, 30, 40, 50}, DamageClass::destroyed});
    CHECK(boxes[2] == BoxAnnotation{{3, 4, 7, 9}, DamageClass::major});

    for (const std::string bad : {"{not json", R"js({"features": {"xy": [{"properties": {"subtype": "minor-damage"}}]}})js",
                                  R"js({"features": {"xy": [{"properties": {"subtype": "melted"}, "wkt": "POLYGON ((0 0, 1 0, 1 1))"}]}})js",
                                  R"js({"features": {"xy": [{"properties": {"subtype": "minor-damage"}, "wkt": "LINESTRING (0 0, 1 1)"}]}})js"}) {
        try {
            parse_xbd_annotations(bad, "broken_post_disaster.json");
            FAIL("expected error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::input);
            CHECK(std::string(e.what()).find("broken_post_disaster.json") != std::string::npos);
        }
    }
}

TEST_CASE("xBD directory ingestion")
{
    TempDir dir("obda_xbd_test");
    const auto images = dir.path / "images", labels = dir.path / "labels";
    fs::create_directories(images);
    fs::create_directories(dir.path / "tier3" / "images");
    Image img(3, 32, 32, 0.5f);
    write_png((images / "quake_0001_pre_disaster.png").string(), img);
    write_png((images / "quake_0001_post_disaster.png").string(), img);
    write_png((images / "quake_0002_pre_disaster.png").string(), img);  // post missing
    write_text(labels / "quake_0001_post_disaster.json",
               R"js({"features": {"xy": [{"properties": {"subtype": "minor-damage"}, "wkt": "POLYGON ((4 4, 12 4, 12 9, 4 9, 4 4))"},
                  {"properties": {"subtype": "un-classified"}, "wkt": "POLYGON ((1 1, 3 1, 3 3, 1 1))"},
                  {"properties": {"subtype": "destroyed"}, "wkt": "POLYGON ((20 20, 40 20, 40 40, 20 40, 20 20))"}]}})js");
    write_text(labels / "quake_0002_post_disaster.json", R"js({"features": {"xy": []}})js");
    auto pairs = ingest_xbd(images.string(), labels.string());
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].id == "quake_0001");
    REQUIRE(pairs[0].annotations.size() == 2);
    CHECK(pairs[0].annotations[0] == BoxAnnotation{{4, 4, 12, 9}, DamageClass::minor});
    CHECK(pairs[0].annotations[1].box == Box{20, 20, 32, 32});  // clipped to the tile
    CHECK(std::abs(pairs[0].pre.at(1, 5, 5) - 128.0f / 255.0f) < 1e-6);

    // Tier 3 trees are ignored.
    write_png((dir.path / "tier3" / "images" / "flood_0001_pre_disaster.png").string(), img);
    write_png((dir.path / "tier3" / "images" / "flood_0001_post_disaster.png").string(), img);
    write_text(labels / "flood_0001_post_disaster.json", R"js({"features": {"xy": []}})js");
    CHECK(ingest_xbd(dir.path.string(), labels.string()).size() == 1);

    write_text(labels / "quake_0001_post_disaster.json", "{oops");
    try {
        ingest_xbd(images.string(), labels.string());
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::input);
        CHECK(std::string(e.what()).find("quake_0001_post_disaster.json") != std::string::npos);
    }
}

TEST_CASE("splits partition deterministically")
{
    std::vector<std::string> ids;
    for (int i = 0; i < 10; ++i) ids.push_back("id" + std::to_string(i));
    auto s = make_split(ids, {0.6, 0.2, 0.2}, 11);
    CHECK(s.train.size() == 6);
    CHECK(s.val.size() == 2);
    CHECK(s.test.size() == 2);
    auto again = make_split(ids, {0.6, 0.2, 0.2}, 11);
    CHECK(again.train == s.train);
    CHECK(again.test == s.test);
    std::set<std::string> all(s.train.begin(), s.train.end());
    all.insert(s.val.begin(), s.val.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == 10);
    CHECK(all == std::set<std::string>(ids.begin(), ids.end()));

    for (int n = 1; n < 40; ++n) {
        std::vector<std::string> many;
        for (int i = 0; i < n; ++i) many.push_back(std::to_string(i));
        auto p = make_split(many, {0.6, 0.2, 0.2}, n);
        CHECK(p.train.size() + p.val.size() + p.test.size() == static_cast<std::size_t>(n));
    }
    CHECK_THROWS_AS(make_split({}, {0.6, 0.2, 0.2}, 1), Error);
    CHECK_THROWS_AS(make_split(ids, {0.6, 0.3, 0.2}, 1), Error);
}

TEST_CASE("synthetic manifests regenerate the same scenes")
{
    TempDir dir("obda_manifest_test");
    SyntheticSceneSpec spec;
    spec.image_size = 64;
    spec.building_count_range = {1, 3};
    spec.building_size_range = {8, 16};
    auto m = make_synthetic_manifest(spec, 10, 5);
    const auto path = (dir.path / "m.json").string();
    write_synthetic_manifest(path, m);
    auto a = load_dataset(path);
    auto b = load_dataset(path);
    CHECK(a.train.size() == 6);
    CHECK(a.val.size() == 2);
    CHECK(a.test.size() == 2);
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].id == m.split.train[i]);
        CHECK(a.train[i].pre == b.train[i].pre);
        CHECK(a.train[i].annotations == b.train[i].annotations);
    }
    try {
        load_dataset((dir.path / "missing.json").string());
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::input);
    }
}
