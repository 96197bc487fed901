#include "obda/experiment.hpp"

#include <chrono>
#include <filesystem>
#include <sstream>

namespace obda {

SweepSpec sweep_spec_from_json(const nlohmann::json& j)
{
    SweepSpec s;
    try {
        if (j.contains("magnitudes")) s.magnitudes = j.at("magnitudes").get<std::vector<int>>();
        if (j.contains("directions")) {
            const auto& d = j.at("directions");
            if (d.is_string()) {
                const std::string name = d.get<std::string>();
                require(name == "diagonal" || name == "axis", ErrorKind::config,
                        "directions must be \"diagonal\", \"axis\" or a list such as [\"++\", \"-+\"]");
                s.directions = name == "diagonal" ? diagonal_directions() : axis_directions();
            } else {
                s.directions.clear();
                for (const auto& e : d) {
                    s.directions.push_back(shift_direction_from_string(e.get<std::string>()));
                }
            }
        }
        s.seed = j.value("seed", s.seed);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::config, std::string("bad sweep specification: ") + e.what());
    }
    require(!s.magnitudes.empty() && !s.directions.empty(), ErrorKind::config,
            "sweep needs at least one magnitude and one direction");
    s.source = j;
    return s;
}

nlohmann::json to_json(const SweepSpec& s)
{
    if (!s.source.is_null()) {
        return s.source;
    }
    nlohmann::json dirs = nlohmann::json::array();
    for (const auto& d : s.directions) dirs.push_back(to_string(d));
    return {{"magnitudes", s.magnitudes}, {"directions", dirs}, {"seed", s.seed}};
}

ExperimentConfig derive_variant(const ExperimentConfig& base, const std::string& row, std::uint64_t seed)
{
    ExperimentConfig c = base;
    c.variant = VariantConfig::named(row);
    c.encoder.in_channels = c.variant.fusion_mode == FusionMode::early_fusion ? 6 : 3;
    c.seed = seed;
    c.name = base.name + "/" + row + "/seed" + std::to_string(seed);
    c.output_dir = (std::filesystem::path(base.output_dir) / row / ("seed" + std::to_string(seed))).string();
    c.validate();
    return c;
}

std::string training_log_csv(const std::vector<TrainStep>& log)
{
    std::ostringstream out;
    out << "step,learning_rate,loss,objectness,classification,box,grad_norm\n";
    for (const auto& s : log) {
        out << s.step << ',' << s.learning_rate << ',' << s.loss << ',' << s.objectness << ',' << s.classification
            << ',' << s.box << ',' << s.grad_norm << '\n';
    }
    return out.str();
}

RunOutcome run_experiment(const ExperimentConfig& config, const LoadedDataset& data, const SweepSpec* sweep,
                          bool save_artifacts, const TrainHooks& hooks)
{
    config.validate();
    require(!data.test.empty(), ErrorKind::input, "dataset has no test scenes");
    RunOutcome out;
    out.config = config;
    DamageModel<float> model(ModelSpec::from(config), config.seed);
    const auto t0 = std::chrono::steady_clock::now();
    out.log = train_model(model, data.train, config, hooks);
    out.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.test = evaluate_model(model, data.test, config.score_threshold);
    if (sweep) {
        auto pairs = std::make_shared<const std::vector<ScenePair>>(data.test);
        out.sweep = run_shift_sweep(model, FixedSupportSet(pairs, sweep->magnitudes, sweep->directions),
                                    config.score_threshold);
    }
    if (save_artifacts) {
        const std::filesystem::path dir(config.output_dir);
        const std::string hash = to_hex(config_hash(config));
        save_checkpoint((dir / "model.ckpt").string(), config, model.params(), config.optimizer.steps);
        save_experiment((dir / "config.json").string(), config);
        write_text_file((dir / "train_log.csv").string(), training_log_csv(out.log));
        nlohmann::json report{{"config_hash", hash}, {"split", "test"}, {"report", to_json(out.test)}};
        write_text_file((dir / "eval_test.json").string(), report.dump(2) + "\n");
        if (out.sweep) {
            nlohmann::json sj{{"config_hash", hash}, {"sweep_spec", to_json(*sweep)}, {"result", to_json(*out.sweep)}};
            write_text_file((dir / "sweep.json").string(), sj.dump(2) + "\n");
            write_text_file((dir / "sweep.csv").string(), sweep_csv(*out.sweep));
        }
    }
    return out;
}

}  // namespace obda
