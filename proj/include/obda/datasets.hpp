#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "obda/geoproto.hpp"

namespace obda {

struct SyntheticSceneSpec {
    int image_size = 256;
    std::pair<int, int> building_count_range{4, 10};
    std::pair<int, int> building_size_range{14, 44};
    std::array<double, kNumClasses> class_distribution{0.4, 0.2, 0.2, 0.2};
    std::uint64_t background_texture_seed = 0;
    double illumination_jitter = 0.05;  // post-image gain drawn from 1 +- jitter
    std::optional<std::pair<int, int>> post_shift;

    void validate() const;
    bool operator==(const SyntheticSceneSpec&) const = default;
};

// Renders one deterministic pre/post pair. Throws a config error if the
// requested buildings cannot be placed without overlap.
ScenePair generate_scene(const SyntheticSceneSpec& spec, std::uint64_t seed);
// The building-free background that generate_scene draws on for this seed.
Image synthetic_background(const SyntheticSceneSpec& spec, std::uint64_t seed);

// xBD-style layout: <image_dir>/**/<name>_pre_disaster.png and
// _post_disaster.png, with polygons in <annotation_dir>/**/<name>_post_disaster.json.
// Directories named "tier3" are skipped.
std::vector<ScenePair> ingest_xbd(const std::string& image_dir, const std::string& annotation_dir);

// Parses one annotation document: features with polygon vertices (WKT
// POLYGON or a vertex list) and a damage "subtype". Unclassified features
// are dropped; `dropped` receives their count.
std::vector<BoxAnnotation> parse_xbd_annotations(const std::string& json_text, const std::string& source_name,
                                                 int* dropped = nullptr);

Box polygon_envelope(const std::vector<std::pair<double, double>>& vertices);

struct DatasetSplit {
    std::vector<std::string> train, val, test;
    std::array<double, 3> fractions{0.6, 0.2, 0.2};
    std::uint64_t seed = 0;
};

DatasetSplit make_split(const std::vector<std::string>& ids, std::array<double, 3> fractions, std::uint64_t seed);

// A persisted synthetic dataset: the spec, one seed per scene, and the split.
nlohmann::json spec_to_json(const SyntheticSceneSpec& s);
// Missing keys keep their defaults.
SyntheticSceneSpec spec_from_json(const nlohmann::json& j);

struct SyntheticManifest {
    SyntheticSceneSpec spec;
    std::vector<std::pair<std::string, std::uint64_t>> scenes;  // id, seed
    DatasetSplit split;
};

SyntheticManifest make_synthetic_manifest(const SyntheticSceneSpec& spec, int scene_count, std::uint64_t seed,
                                          std::array<double, 3> fractions = {0.6, 0.2, 0.2});

struct LoadedDataset {
    std::vector<ScenePair> train, val, test;
};

// Reads a manifest file. "synthetic" manifests regenerate their scenes from
// the stored seeds; "xbd" manifests ingest image_dir/annotation_dir and split
// by the stored (or freshly drawn) split.
LoadedDataset load_dataset(const std::string& manifest_path);
void write_synthetic_manifest(const std::string& path, const SyntheticManifest& manifest);

}  // namespace obda
