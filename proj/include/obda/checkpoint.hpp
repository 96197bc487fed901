#pragma once

#include <memory>
#include <string>

#include "obda/config.hpp"
#include "obda/model.hpp"

namespace obda {

// A checkpoint is two files: `<path>` holds the parameters and `<path>.json`
// the experiment config they were trained under.
//
// Parameter file, little-endian:
//   "OBDC" | version u8 | config_hash 8B | count u64 | count x f32 | CRC32 u32
struct Checkpoint {
    ExperimentConfig config;
    ConfigHash hash{};
    std::vector<float> parameters;
    int steps_trained = 0;
};

void save_checkpoint(const std::string& path, const ExperimentConfig& config, const ParamStore<float>& params,
                     int steps_trained);
Checkpoint read_checkpoint(const std::string& path);

// Rebuilds the model the checkpoint describes and loads its parameters.
std::unique_ptr<DamageModel<float>> load_model(const Checkpoint& ckpt);

}  // namespace obda
