#include "obda/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <regex>
#include <sstream>

#include "json.hpp"

namespace obda {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const std::string& path)
{
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::input, "cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::pair<double, double>> parse_wkt_polygon(const std::string& wkt, const std::string& source)
{
    // Outer ring of POLYGON ((x y, x y, ...)); holes cannot widen the envelope.
    const auto open = wkt.find("((");
    const auto close = wkt.find(')', open == std::string::npos ? 0 : open);
    require(wkt.rfind("POLYGON", 0) == 0 && open != std::string::npos && close != std::string::npos, ErrorKind::input,
            source + ": malformed WKT polygon");
    std::vector<std::pair<double, double>> out;
    std::stringstream ring(wkt.substr(open + 2, close - open - 2));
    std::string vertex;
    while (std::getline(ring, vertex, ',')) {
        std::stringstream vs(vertex);
        double x = 0, y = 0;
        require(static_cast<bool>(vs >> x >> y), ErrorKind::input, source + ": malformed WKT vertex '" + vertex + "'");
        out.emplace_back(x, y);
    }
    return out;
}

std::vector<std::pair<double, double>> feature_vertices(const json& feature, const std::string& source)
{
    if (feature.contains("wkt")) {
        return parse_wkt_polygon(feature.at("wkt").get<std::string>(), source);
    }
    const json* list = nullptr;
    for (const char* key : {"vertices", "polygon", "points"}) {
        if (feature.contains(key)) {
            list = &feature.at(key);
            break;
        }
    }
    require(list != nullptr && list->is_array(), ErrorKind::input, source + ": feature without polygon vertices");
    std::vector<std::pair<double, double>> out;
    for (const auto& v : *list) {
        require(v.is_array() && v.size() >= 2, ErrorKind::input, source + ": vertex must be [x, y]");
        out.emplace_back(v[0].get<double>(), v[1].get<double>());
    }
    return out;
}

std::string feature_label(const json& feature)
{
    const json& props = feature.contains("properties") ? feature.at("properties") : feature;
    for (const char* key : {"subtype", "damage"}) {
        if (props.contains(key)) {
            return props.at(key).get<std::string>();
        }
    }
    return "";
}

bool in_tier3(const fs::path& p)
{
    for (const auto& part : p) {
        if (part == "tier3") {
            return true;
        }
    }
    return false;
}

json split_to_json(const DatasetSplit& s)
{
    return {{"train", s.train}, {"val", s.val}, {"test", s.test}, {"fractions", s.fractions}, {"seed", s.seed}};
}

DatasetSplit split_from_json(const json& j)
{
    DatasetSplit s;
    s.train = j.at("train").get<std::vector<std::string>>();
    s.val = j.at("val").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
    s.fractions = j.value("fractions", s.fractions);
    s.seed = j.value("seed", s.seed);
    return s;
}

LoadedDataset partition(std::vector<ScenePair> scenes, const DatasetSplit& split, const std::string& source)
{
    std::map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        by_id[scenes[i].id] = i;
    }
    LoadedDataset out;
    auto take = [&](const std::vector<std::string>& ids, std::vector<ScenePair>& dst) {
        for (const auto& id : ids) {
            auto it = by_id.find(id);
            require(it != by_id.end(), ErrorKind::input, source + ": split names unknown scene '" + id + "'");
            dst.push_back(std::move(scenes[it->second]));
        }
    };
    take(split.train, out.train);
    take(split.val, out.val);
    take(split.test, out.test);
    return out;
}

}  // namespace

json spec_to_json(const SyntheticSceneSpec& s)
{
    json j{{"image_size", s.image_size},
           {"building_count_range", {s.building_count_range.first, s.building_count_range.second}},
           {"building_size_range", {s.building_size_range.first, s.building_size_range.second}},
           {"class_distribution", s.class_distribution},
           {"background_texture_seed", s.background_texture_seed},
           {"illumination_jitter", s.illumination_jitter}};
    if (s.post_shift) {
        j["post_shift"] = {s.post_shift->first, s.post_shift->second};
    } else {
        j["post_shift"] = nullptr;
    }
    return j;
}

SyntheticSceneSpec spec_from_json(const json& j)
{
    SyntheticSceneSpec s;
    s.image_size = j.value("image_size", s.image_size);
    if (j.contains("building_count_range")) {
        s.building_count_range = {j["building_count_range"][0], j["building_count_range"][1]};
    }
    if (j.contains("building_size_range")) {
        s.building_size_range = {j["building_size_range"][0], j["building_size_range"][1]};
    }
    if (j.contains("class_distribution")) {
        s.class_distribution = j["class_distribution"].get<std::array<double, kNumClasses>>();
    }
    s.background_texture_seed = j.value("background_texture_seed", s.background_texture_seed);
    s.illumination_jitter = j.value("illumination_jitter", s.illumination_jitter);
    if (j.contains("post_shift") && !j["post_shift"].is_null()) {
        s.post_shift = std::pair<int, int>{j["post_shift"][0], j["post_shift"][1]};
    }
    s.validate();
    return s;
}

Box polygon_envelope(const std::vector<std::pair<double, double>>& vertices)
{
    require(!vertices.empty(), ErrorKind::input, "polygon without vertices");
    Box b{vertices[0].first, vertices[0].second, vertices[0].first, vertices[0].second};
    for (auto [x, y] : vertices) {
        b.x_min = std::min(b.x_min, x);
        b.y_min = std::min(b.y_min, y);
        b.x_max = std::max(b.x_max, x);
        b.y_max = std::max(b.y_max, y);
    }
    return b;
}

std::vector<BoxAnnotation> parse_xbd_annotations(const std::string& json_text, const std::string& source_name,
                                                 int* dropped)
{
    std::vector<BoxAnnotation> out;
    int skipped = 0;
    try {
        const json doc = json::parse(json_text);
        const json* features = &doc.at("features");
        if (features->is_object()) {
            features = &features->at("xy");
        }
        require(features->is_array(), ErrorKind::input, source_name + ": 'features' must be a list");
        for (const auto& f : *features) {
            const std::string label = feature_label(f);
            if (label.empty() || label == "un-classified" || label == "unclassified") {
                ++skipped;
                continue;
            }
            const DamageClass damage = damage_class_from_string(label);
            const Box box = polygon_envelope(feature_vertices(f, source_name));
            require(box.valid(), ErrorKind::input, source_name + ": degenerate polygon");
            out.push_back({box, damage});
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::input, source_name + ": malformed annotation file: " + e.what());
    } catch (const Error& e) {
        if (std::string(e.what()).find(source_name) == std::string::npos) {
            fail(e.kind(), source_name + ": " + e.what());
        }
        throw;
    }
    if (dropped) {
        *dropped = skipped;
    }
    return out;
}

std::vector<ScenePair> ingest_xbd(const std::string& image_dir, const std::string& annotation_dir)
{
    require(fs::is_directory(image_dir), ErrorKind::input, "image directory not found: " + image_dir);
    require(fs::is_directory(annotation_dir), ErrorKind::input, "annotation directory not found: " + annotation_dir);
    const std::string pre_suffix = "_pre_disaster.png", post_suffix = "_post_disaster.png";

    std::map<std::string, fs::path> pre, post, labels;
    for (const auto& e : fs::recursive_directory_iterator(image_dir)) {
        if (!e.is_regular_file() || in_tier3(fs::relative(e.path(), image_dir))) continue;
        const std::string name = e.path().filename().string();
        if (name.size() > pre_suffix.size() && name.ends_with(pre_suffix)) {
            pre[name.substr(0, name.size() - pre_suffix.size())] = e.path();
        } else if (name.size() > post_suffix.size() && name.ends_with(post_suffix)) {
            post[name.substr(0, name.size() - post_suffix.size())] = e.path();
        }
    }
    for (const auto& e : fs::recursive_directory_iterator(annotation_dir)) {
        if (!e.is_regular_file() || in_tier3(fs::relative(e.path(), annotation_dir))) continue;
        const std::string name = e.path().filename().string();
        if (name.ends_with("_post_disaster.json")) {
            labels[name.substr(0, name.size() - std::string("_post_disaster.json").size())] = e.path();
        }
    }

    std::vector<ScenePair> out;
    for (const auto& [stem, pre_path] : pre) {
        auto post_it = post.find(stem);
        auto label_it = labels.find(stem);
        if (post_it == post.end() || label_it == labels.end()) {
            std::cerr << "warning: skipping " << stem << ": missing "
                      << (post_it == post.end() ? "post-disaster image" : "annotation file") << "\n";
            continue;
        }
        Image pre_img = read_png(pre_path.string());
        Image post_img = read_png(post_it->second.string());
        auto boxes = parse_xbd_annotations(read_text(label_it->second.string()), label_it->second.string());
        // Polygons may touch or cross the tile edge; clip to the frame.
        std::vector<BoxAnnotation> kept;
        for (auto a : boxes) {
            a.box.x_min = std::clamp(a.box.x_min, 0.0, static_cast<double>(pre_img.width));
            a.box.x_max = std::clamp(a.box.x_max, 0.0, static_cast<double>(pre_img.width));
            a.box.y_min = std::clamp(a.box.y_min, 0.0, static_cast<double>(pre_img.height));
            a.box.y_max = std::clamp(a.box.y_max, 0.0, static_cast<double>(pre_img.height));
            if (a.box.valid()) kept.push_back(a);
        }
        out.push_back(make_scene_pair(stem, std::move(pre_img), std::move(post_img), std::move(kept)));
    }
    for (const auto& [stem, path] : post) {
        if (!pre.contains(stem)) {
            std::cerr << "warning: skipping " << stem << ": missing pre-disaster image\n";
        }
    }
    return out;
}

DatasetSplit make_split(const std::vector<std::string>& ids, std::array<double, 3> fractions, std::uint64_t seed)
{
    require(!ids.empty(), ErrorKind::input, "cannot split an empty id list");
    for (double f : fractions) {
        require(f >= 0 && std::isfinite(f), ErrorKind::config, "split fractions must be non-negative");
    }
    require(std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) < 1e-9, ErrorKind::config,
            "split fractions must sum to 1");
    std::vector<std::string> order = ids;
    std::sort(order.begin(), order.end());
    require(std::adjacent_find(order.begin(), order.end()) == order.end(), ErrorKind::input, "duplicate scene ids");
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n = static_cast<double>(order.size());
    const std::size_t n_train = std::min(order.size(), static_cast<std::size_t>(std::llround(fractions[0] * n)));
    const std::size_t n_val =
        std::min(order.size() - n_train, static_cast<std::size_t>(std::llround(fractions[1] * n)));
    DatasetSplit split;
    split.fractions = fractions;
    split.seed = seed;
    split.train.assign(order.begin(), order.begin() + n_train);
    split.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    split.test.assign(order.begin() + n_train + n_val, order.end());
    return split;
}

SyntheticManifest make_synthetic_manifest(const SyntheticSceneSpec& spec, int scene_count, std::uint64_t seed,
                                          std::array<double, 3> fractions)
{
    spec.validate();
    require(scene_count > 0, ErrorKind::config, "scene_count must be positive");
    SyntheticManifest m;
    m.spec = spec;
    Rng rng(seed);
    std::vector<std::string> ids;
    for (int i = 0; i < scene_count; ++i) {
        const std::uint64_t s = rng();
        ids.push_back("synthetic-" + std::to_string(s));
        m.scenes.emplace_back(ids.back(), s);
    }
    m.split = make_split(ids, fractions, seed + 1);
    return m;
}

void write_synthetic_manifest(const std::string& path, const SyntheticManifest& m)
{
    json scenes = json::array();
    for (const auto& [id, s] : m.scenes) {
        scenes.push_back({{"id", id}, {"seed", s}});
    }
    json doc{{"kind", "synthetic"}, {"spec", spec_to_json(m.spec)}, {"scenes", scenes}, {"split", split_to_json(m.split)}};
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::filesystem::create_directories(parent);
    }
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorKind::input, "cannot write " + path);
    out << doc.dump(2) << "\n";
}

LoadedDataset load_dataset(const std::string& manifest_path)
{
    require(fs::exists(manifest_path), ErrorKind::input, "dataset manifest not found: " + manifest_path);
    json doc;
    try {
        doc = json::parse(read_text(manifest_path));
    } catch (const json::exception& e) {
        fail(ErrorKind::input, manifest_path + ": malformed manifest: " + e.what());
    }
    const std::string kind = doc.value("kind", "synthetic");
    try {
        if (kind == "synthetic") {
            const auto spec = spec_from_json(doc.at("spec"));
            std::vector<ScenePair> scenes;
            for (const auto& s : doc.at("scenes")) {
                ScenePair p = generate_scene(spec, s.at("seed").get<std::uint64_t>());
                p.id = s.at("id").get<std::string>();
                scenes.push_back(std::move(p));
            }
            return partition(std::move(scenes), split_from_json(doc.at("split")), manifest_path);
        }
        if (kind == "xbd") {
            const fs::path base = fs::path(manifest_path).parent_path();
            auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (base / p).string(); };
            auto scenes = ingest_xbd(resolve(doc.at("image_dir")), resolve(doc.at("annotation_dir")));
            DatasetSplit split;
            if (doc.contains("split")) {
                split = split_from_json(doc.at("split"));
            } else {
                std::vector<std::string> ids;
                for (const auto& s : scenes) ids.push_back(s.id);
                split = make_split(ids, doc.value("fractions", std::array<double, 3>{0.6, 0.2, 0.2}),
                                   doc.value("seed", std::uint64_t{0}));
            }
            return partition(std::move(scenes), split, manifest_path);
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::input, manifest_path + ": malformed manifest: " + e.what());
    }
    fail(ErrorKind::input, manifest_path + ": unknown dataset kind '" + kind + "'");
}

}  // namespace obda
