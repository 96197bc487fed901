#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "obda/fusion.hpp"
#include "obda/latent_codec.hpp"

namespace obda {

// Momentum SGD with linear warmup, cosine decay and global-norm clipping.
struct OptimizerConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    int steps = 2000;
    int warmup_steps = 100;
    double final_lr_fraction = 0.02;
    double grad_clip = 10.0;
    int batch_size = 1;  // scenes per step (gradient accumulation)

    void validate() const;
    bool operator==(const OptimizerConfig&) const = default;
};

struct ExperimentConfig {
    std::string name = "experiment";
    VariantConfig variant;
    std::string profile = "toy";  // "toy", "reference" or "custom"
    EncoderConfig encoder = EncoderConfig::toy();
    int head_width = 64;
    OptimizerConfig optimizer;
    int max_train_shift = 150;  // used when variant.shift_augmentation is on
    // The shift range grows linearly from 0 to max_train_shift over this
    // fraction of the steps (0: full range from the first step).
    double shift_warmup_fraction = 0.0;
    // Chance that a training sample is shifted at all (1: every sample).
    double shift_probability = 1.0;
    bool flip_augmentation = true;  // random horizontal/vertical flips of both images
    std::string manifest;       // dataset manifest path
    std::uint64_t seed = 0;
    std::string output_dir = "runs/experiment";
    int val_every = 0;  // 0 disables periodic validation
    double score_threshold = 0.01;

    // Encoder input channels follow the fusion mode (6 for early fusion).
    void validate() const;
    bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const VariantConfig& v);
VariantConfig variant_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EncoderConfig& e);
nlohmann::json to_json(const OptimizerConfig& o);
nlohmann::json to_json(const ExperimentConfig& c);

// Missing keys keep their defaults; "variant" may be a row name string such as
// "S+A+Aug" or an object; "profile" selects the encoder widths unless it is
// "custom", in which case "encoder" is read.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::string& path);
void save_experiment(const std::string& path, const ExperimentConfig& c);

// FNV-1a 64 of the canonical (sorted-key, compact) JSON form, excluding the
// output directory so relocating a run keeps its identity.
ConfigHash config_hash(const ExperimentConfig& c);

// Reads a whole text file; input error if it cannot be opened.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace obda
