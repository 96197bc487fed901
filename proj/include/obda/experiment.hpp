#pragma once

#include <optional>
#include <string>
#include <vector>

#include "obda/checkpoint.hpp"
#include "obda/datasets.hpp"
#include "obda/inference.hpp"
#include "obda/trainer.hpp"

namespace obda {

// Test-time shift sweep request. The original JSON is kept so result files
// can embed it verbatim.
struct SweepSpec {
    std::vector<int> magnitudes{0, 16, 32, 48, 64};
    std::vector<ShiftDirection> directions = diagonal_directions();
    std::uint64_t seed = 0;
    nlohmann::json source;
};

SweepSpec sweep_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SweepSpec& s);

// A variant row derived from a base config: only the variant, the encoder
// input width it implies, the seed and the output directory change.
ExperimentConfig derive_variant(const ExperimentConfig& base, const std::string& row, std::uint64_t seed);

struct RunOutcome {
    ExperimentConfig config;
    std::vector<TrainStep> log;
    EvalReport test;
    std::optional<ShiftSweep> sweep;
    double train_seconds = 0;
};

// Trains from scratch on data.train, evaluates on data.test and, when a sweep
// is given, runs it on data.test. With save_artifacts the checkpoint, loss
// curve and reports land in config.output_dir.
RunOutcome run_experiment(const ExperimentConfig& config, const LoadedDataset& data, const SweepSpec* sweep,
                          bool save_artifacts, const TrainHooks& hooks = {});

std::string training_log_csv(const std::vector<TrainStep>& log);

}  // namespace obda
