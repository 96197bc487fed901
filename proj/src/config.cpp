#include "obda/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace obda {

using nlohmann::json;

void OptimizerConfig::validate() const
{
    require(learning_rate > 0, ErrorKind::config, "learning_rate must be positive");
    require(momentum >= 0 && momentum < 1, ErrorKind::config, "momentum must be in [0,1)");
    require(weight_decay >= 0, ErrorKind::config, "weight_decay must be non-negative");
    require(steps > 0, ErrorKind::config, "steps must be positive");
    require(warmup_steps >= 0 && warmup_steps < steps, ErrorKind::config, "warmup_steps must be in [0, steps)");
    require(final_lr_fraction >= 0 && final_lr_fraction <= 1, ErrorKind::config,
            "final_lr_fraction must be in [0,1]");
    require(grad_clip > 0, ErrorKind::config, "grad_clip must be positive");
    require(batch_size > 0, ErrorKind::config, "batch_size must be positive");
}

void ExperimentConfig::validate() const
{
    variant.validate();
    encoder.validate();
    optimizer.validate();
    const int expected = variant.fusion_mode == FusionMode::early_fusion ? 6 : 3;
    require(encoder.in_channels == expected, ErrorKind::config,
            "encoder in_channels must be " + std::to_string(expected) + " for " + to_string(variant.fusion_mode));
    require(head_width > 0, ErrorKind::config, "head_width must be positive");
    require(max_train_shift >= 0, ErrorKind::config, "max_train_shift must be non-negative");
    require(shift_warmup_fraction >= 0 && shift_warmup_fraction <= 1, ErrorKind::config,
            "shift_warmup_fraction must be in [0,1]");
    require(shift_probability >= 0 && shift_probability <= 1, ErrorKind::config,
            "shift_probability must be in [0,1]");
    require(val_every >= 0, ErrorKind::config, "val_every must be non-negative");
    require(score_threshold >= 0 && score_threshold < 1, ErrorKind::config, "score_threshold must be in [0,1)");
    if (variant.compressed()) {
        for (Level level : kAllLevels) {
            latent_channels(encoder.channels_at(level), variant.compression_ratio);
        }
    }
}

json to_json(const VariantConfig& v)
{
    json levels = json::array();
    for (Level l : v.attention_levels) {
        levels.push_back(to_string(l));
    }
    return {{"fusion_mode", to_string(v.fusion_mode)},
            {"attention_levels", levels},
            {"attention_channel_reduction", v.attention_channel_reduction},
            {"compression_ratio", v.compression_ratio},
            {"drop_d3", v.drop_d3},
            {"shift_augmentation", v.shift_augmentation}};
}

VariantConfig variant_from_json(const json& j)
{
    if (j.is_string()) {
        return VariantConfig::named(j.get<std::string>());
    }
    require(j.is_object(), ErrorKind::config, "variant must be a row name or an object");
    VariantConfig v;
    if (j.contains("fusion_mode")) v.fusion_mode = fusion_mode_from_string(j.at("fusion_mode").get<std::string>());
    if (j.contains("attention_levels")) {
        v.attention_levels.clear();
        for (const auto& l : j.at("attention_levels")) {
            v.attention_levels.push_back(level_from_string(l.get<std::string>()));
        }
    }
    v.attention_channel_reduction = j.value("attention_channel_reduction", v.attention_channel_reduction);
    v.compression_ratio = j.value("compression_ratio", v.compression_ratio);
    v.drop_d3 = j.value("drop_d3", v.drop_d3);
    v.shift_augmentation = j.value("shift_augmentation", v.shift_augmentation);
    v.validate();
    return v;
}

json to_json(const EncoderConfig& e)
{
    return {{"in_channels", e.in_channels}, {"channels", e.channels}, {"depth", e.depth}};
}

json to_json(const OptimizerConfig& o)
{
    return {{"learning_rate", o.learning_rate}, {"momentum", o.momentum},
            {"weight_decay", o.weight_decay},   {"steps", o.steps},
            {"warmup_steps", o.warmup_steps},   {"final_lr_fraction", o.final_lr_fraction},
            {"grad_clip", o.grad_clip},         {"batch_size", o.batch_size}};
}

json to_json(const ExperimentConfig& c)
{
    return {{"name", c.name},
            {"variant", to_json(c.variant)},
            {"profile", c.profile},
            {"encoder", to_json(c.encoder)},
            {"head_width", c.head_width},
            {"optimizer", to_json(c.optimizer)},
            {"max_train_shift", c.max_train_shift},
            {"shift_warmup_fraction", c.shift_warmup_fraction},
            {"shift_probability", c.shift_probability},
            {"flip_augmentation", c.flip_augmentation},
            {"manifest", c.manifest},
            {"seed", c.seed},
            {"output_dir", c.output_dir},
            {"val_every", c.val_every},
            {"score_threshold", c.score_threshold}};
}

namespace {

OptimizerConfig optimizer_from_json(const json& j)
{
    OptimizerConfig o;
    o.learning_rate = j.value("learning_rate", o.learning_rate);
    o.momentum = j.value("momentum", o.momentum);
    o.weight_decay = j.value("weight_decay", o.weight_decay);
    o.steps = j.value("steps", o.steps);
    o.warmup_steps = j.value("warmup_steps", o.warmup_steps);
    o.final_lr_fraction = j.value("final_lr_fraction", o.final_lr_fraction);
    o.grad_clip = j.value("grad_clip", o.grad_clip);
    o.batch_size = j.value("batch_size", o.batch_size);
    return o;
}

}  // namespace

ExperimentConfig experiment_from_json(const json& j)
{
    require(j.is_object(), ErrorKind::config, "experiment config must be a JSON object");
    ExperimentConfig c;
    try {
        c.name = j.value("name", c.name);
        if (j.contains("variant")) c.variant = variant_from_json(j.at("variant"));
        c.profile = j.value("profile", c.profile);
        const int in_channels = c.variant.fusion_mode == FusionMode::early_fusion ? 6 : 3;
        if (c.profile == "toy") {
            c.encoder = EncoderConfig::toy(in_channels);
        } else if (c.profile == "reference") {
            c.encoder = EncoderConfig::reference(in_channels);
            c.head_width = 128;
        } else if (c.profile == "custom") {
            require(j.contains("encoder"), ErrorKind::config, "profile \"custom\" needs an \"encoder\" object");
            const auto& e = j.at("encoder");
            c.encoder.in_channels = e.value("in_channels", in_channels);
            c.encoder.channels = e.at("channels").get<std::array<int, 3>>();
            c.encoder.depth = e.value("depth", c.encoder.depth);
        } else {
            fail(ErrorKind::config, "unknown profile '" + c.profile + "' (toy, reference, custom)");
        }
        c.head_width = j.value("head_width", c.head_width);
        if (j.contains("optimizer")) c.optimizer = optimizer_from_json(j.at("optimizer"));
        c.max_train_shift = j.value("max_train_shift", c.max_train_shift);
        c.shift_warmup_fraction = j.value("shift_warmup_fraction", c.shift_warmup_fraction);
        c.shift_probability = j.value("shift_probability", c.shift_probability);
        c.flip_augmentation = j.value("flip_augmentation", c.flip_augmentation);
        c.manifest = j.value("manifest", c.manifest);
        c.seed = j.value("seed", c.seed);
        c.output_dir = j.value("output_dir", c.output_dir);
        c.val_every = j.value("val_every", c.val_every);
        c.score_threshold = j.value("score_threshold", c.score_threshold);
    } catch (const json::exception& e) {
        fail(ErrorKind::config, std::string("bad experiment config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string read_text_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::input, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text)
{
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::filesystem::create_directories(parent);
    }
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::input, "cannot write " + path);
    out << text;
}

ExperimentConfig load_experiment(const std::string& path)
{
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        fail(ErrorKind::config, path + ": " + e.what());
    }
    try {
        return experiment_from_json(j);
    } catch (const Error& e) {
        fail(e.kind(), path + ": " + e.what());
    }
}

void save_experiment(const std::string& path, const ExperimentConfig& c) { write_text_file(path, to_json(c).dump(2) + "\n"); }

ConfigHash config_hash(const ExperimentConfig& c)
{
    json j = to_json(c);
    j.erase("output_dir");
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    ConfigHash out{};
    for (int i = 0; i < 8; ++i) {
        out[i] = static_cast<std::uint8_t>(h >> (56 - 8 * i));
    }
    return out;
}

}  // namespace obda
