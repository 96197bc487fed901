// obda: command-line front end for training, evaluation, shift sweeps, the
// ground/on-board latent split and the link budget.

#include <chrono>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "obda/budget.hpp"
#include "obda/experiment.hpp"

namespace fs = std::filesystem;
using namespace obda;
using nlohmann::json;

namespace {

int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::input: return 2;
    case ErrorKind::config: return 3;
    case ErrorKind::numeric: return 4;
    case ErrorKind::integrity: return 5;
    case ErrorKind::protocol: return 6;
    }
    return 1;
}

json read_json(const std::string& path)
{
    try {
        return json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        fail(ErrorKind::config, path + ": " + e.what());
    }
}

void emit(const json& j, const std::string& out)
{
    if (out.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        write_text_file(out, j.dump(2) + "\n");
        std::cerr << "wrote " << out << "\n";
    }
}

ExperimentConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed)
{
    ExperimentConfig c = load_experiment(path);
    if (seed) {
        c.seed = *seed;
    }
    // A relative manifest path is taken relative to the config file.
    if (!c.manifest.empty() && fs::path(c.manifest).is_relative() && !fs::exists(c.manifest)) {
        c.manifest = (fs::path(path).parent_path() / c.manifest).string();
    }
    return c;
}

const std::vector<ScenePair>& pick_split(const LoadedDataset& d, const std::string& split)
{
    if (split == "train") return d.train;
    if (split == "val") return d.val;
    require(split == "test", ErrorKind::config, "split must be train, val or test");
    return d.test;
}

// When --config is given alongside a checkpoint, both must describe the same run.
void check_config_matches(const Checkpoint& ckpt, const std::string& config_path,
                          const std::optional<std::uint64_t>& seed)
{
    if (config_path.empty()) {
        return;
    }
    const ExperimentConfig c = load_config(config_path, seed);
    require(config_hash(c) == ckpt.hash, ErrorKind::integrity,
            "config " + config_path + " (hash " + to_hex(config_hash(c)) + ") does not match the checkpoint (hash " +
                to_hex(ckpt.hash) + ")");
}

std::string progress_line(const TrainStep& s)
{
    std::ostringstream ss;
    ss << "step " << s.step + 1 << " lr " << s.learning_rate << " loss " << s.loss << " (obj " << s.objectness
       << " cls " << s.classification << " box " << s.box << ")";
    return ss.str();
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Bi-temporal building damage detection with a ground/on-board latent split"};
    app.require_subcommand(1);

    std::string config_path, checkpoint_path, out, split = "test", sweep_path, pre_path, post_path, packet_path,
                                                    patches_dir, tile_id = "tile", rows_arg;
    std::optional<std::uint64_t> seed;
    double threshold = -1;
    int x_origin = 0, y_origin = 0, log_every = 100, count = 100, image_size = 256;
    std::vector<std::uint64_t> seeds;
    bool exact = false;

    auto* train = app.add_subcommand("train", "Train a model from an experiment config");
    train->add_option("--config", config_path, "Experiment config JSON")->required();
    train->add_option("--seed", seed, "Override the config seed");
    train->add_option("--log-every", log_every, "Print progress every N steps (0: silent)");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
    eval->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
    eval->add_option("--config", config_path, "Config that must match the checkpoint");
    eval->add_option("--seed", seed, "Seed override applied to --config");
    eval->add_option("--split", split, "train, val or test");
    eval->add_option("--threshold", threshold, "Score threshold (default: from config)");
    eval->add_option("--out", out, "Report path (default: stdout)");

    auto* sweep = app.add_subcommand("sweep-shift", "Fixed-support test-time shift sweep");
    sweep->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
    sweep->add_option("--config", config_path, "Config that must match the checkpoint");
    sweep->add_option("--seed", seed, "Seed override applied to --config");
    sweep->add_option("--sweep", sweep_path, "Sweep JSON: magnitudes, directions, seed");
    sweep->add_option("--split", split, "train, val or test");
    sweep->add_option("--out", out, "Output directory (sweep.json and sweep.csv)")->required();

    auto* budget = app.add_subcommand("budget", "Uplink/downlink/inference budget for an area");
    budget->add_option("--config", config_path, "Budget scenario JSON");
    BudgetScenario scenario;
    budget->add_option("--area-km2", scenario.area_km2);
    budget->add_option("--gsd", scenario.gsd_m_per_px, "Ground sampling distance, m/px");
    budget->add_option("--tile-size", scenario.tile_size);
    budget->add_option("--bytes-per-px", scenario.bytes_per_px);
    budget->add_option("--throughput", scenario.throughput_mpx_per_s, "MPixels/s");
    budget->add_option("--ratio", scenario.compression_ratio, "Latent compression ratio (0: none)");
    budget->add_flag("--drop-d3", scenario.drop_d3);
    budget->add_option("--detections", scenario.detections, "Detections to downlink");
    budget->add_option("--out", out, "Report path (default: stdout)");

    auto* encode = app.add_subcommand("encode-latent", "Ground side: pre-disaster image to latent packet");
    encode->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
    encode->add_option("--config", config_path, "Config that must match the checkpoint");
    encode->add_option("--pre", pre_path, "Pre-disaster PNG")->required();
    encode->add_option("--out", out, "Packet file")->required();
    encode->add_option("--tile-id", tile_id);
    encode->add_option("--x-origin", x_origin);
    encode->add_option("--y-origin", y_origin);

    auto* detect_cmd = app.add_subcommand("detect", "On-board side: latent packet + post image to detections");
    detect_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
    detect_cmd->add_option("--config", config_path, "Config that must match the checkpoint");
    detect_cmd->add_option("--packet", packet_path, "Latent packet file")->required();
    detect_cmd->add_option("--post", post_path, "Post-disaster PNG")->required();
    detect_cmd->add_option("--out", out, "Detection product (JSON lines)")->required();
    detect_cmd->add_option("--patches", patches_dir, "Directory for post-image chips around detections");
    detect_cmd->add_option("--threshold", threshold, "Score threshold (default: from config)");

    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset manifest");
    gen->add_option("--config", config_path, "Scene spec JSON (optional)");
    gen->add_option("--count", count, "Number of scenes");
    gen->add_option("--image-size", image_size, "Scene size in pixels (when no spec is given)");
    gen->add_option("--seed", seed, "Dataset seed");
    gen->add_option("--out", out, "Manifest path")->required();
    gen->add_option("--png-dir", patches_dir, "Also write scenes as PNG pairs + JSON annotations here");

    auto* ablate = app.add_subcommand("ablate", "Train and evaluate variant rows derived from one base config");
    ablate->add_option("--config", config_path, "Base experiment config")->required();
    ablate->add_option("--rows", rows_arg, "Comma-separated rows (default: all)");
    ablate->add_option("--seeds", seeds, "Seeds (default: the config seed)");
    ablate->add_option("--sweep", sweep_path, "Also run this shift sweep per run");
    ablate->add_option("--log-every", log_every, "Print progress every N steps (0: silent)");

    auto* pair_cmd = app.add_subcommand("infer", "Monolithic inference on one pre/post PNG pair");
    pair_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
    pair_cmd->add_option("--pre", pre_path, "Pre-disaster PNG")->required();
    pair_cmd->add_option("--post", post_path, "Post-disaster PNG")->required();
    pair_cmd->add_option("--out", out, "Detection product (JSON lines)")->required();
    pair_cmd->add_option("--threshold", threshold, "Score threshold (default: from config)");
    pair_cmd->add_flag("--exact", exact, "Skip latent quantization");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            const ExperimentConfig cfg = load_config(config_path, seed);
            require(!cfg.manifest.empty(), ErrorKind::config, "config has no dataset manifest");
            const LoadedDataset data = load_dataset(cfg.manifest);
            require(!data.train.empty(), ErrorKind::input, "dataset has no training scenes");
            DamageModel<float> model(ModelSpec::from(cfg), cfg.seed);
            TrainHooks hooks;
            hooks.on_step = [&](const TrainStep& s) {
                if (log_every > 0 && ((s.step + 1) % log_every == 0 || s.step == 0)) {
                    std::cerr << progress_line(s) << "\n";
                }
            };
            hooks.validation = data.val.empty() ? nullptr : &data.val;
            json val_log = json::array();
            hooks.on_validation = [&](int step, const EvalReport& r) {
                std::cerr << "step " << step << " val mAP@0.5 " << r.map50 << "\n";
                val_log.push_back({{"step", step}, {"map50", r.map50}, {"localization_f1", r.localization_f1}});
            };
            const auto log = train_model(model, data.train, cfg, hooks);
            const fs::path dir(cfg.output_dir);
            save_checkpoint((dir / "model.ckpt").string(), cfg, model.params(), cfg.optimizer.steps);
            save_experiment((dir / "config.json").string(), cfg);
            write_text_file((dir / "train_log.csv").string(), training_log_csv(log));
            write_text_file((dir / "val_log.json").string(),
                            json{{"config_hash", to_hex(config_hash(cfg))}, {"validation", val_log}}.dump(2) + "\n");
            std::cerr << "checkpoint " << (dir / "model.ckpt").string() << " (config hash "
                      << to_hex(config_hash(cfg)) << ")\n";
        } else if (*eval) {
            const Checkpoint ckpt = read_checkpoint(checkpoint_path);
            check_config_matches(ckpt, config_path, seed);
            const auto model = load_model(ckpt);
            const LoadedDataset data = load_dataset(ckpt.config.manifest);
            const double thr = threshold >= 0 ? threshold : ckpt.config.score_threshold;
            const EvalReport r = evaluate_model(*model, pick_split(data, split), thr);
            emit({{"config_hash", to_hex(ckpt.hash)}, {"split", split}, {"report", to_json(r)}}, out);
        } else if (*sweep) {
            const Checkpoint ckpt = read_checkpoint(checkpoint_path);
            check_config_matches(ckpt, config_path, seed);
            const auto model = load_model(ckpt);
            const SweepSpec spec = sweep_path.empty() ? SweepSpec{} : sweep_spec_from_json(read_json(sweep_path));
            const LoadedDataset data = load_dataset(ckpt.config.manifest);
            auto pairs = std::make_shared<const std::vector<ScenePair>>(pick_split(data, split));
            const ShiftSweep result = run_shift_sweep(*model, FixedSupportSet(pairs, spec.magnitudes, spec.directions),
                                                      ckpt.config.score_threshold);
            const fs::path dir(out);
            write_text_file((dir / "sweep.csv").string(), sweep_csv(result));
            write_text_file((dir / "sweep.json").string(),
                            json{{"config_hash", to_hex(ckpt.hash)}, {"split", split}, {"sweep_spec", to_json(spec)},
                                 {"result", to_json(result)}}
                                    .dump(2) +
                                "\n");
            std::cout << sweep_csv(result);
        } else if (*budget) {
            if (!config_path.empty()) {
                scenario = budget_scenario_from_json(read_json(config_path));
            }
            const BudgetReport r = compute_budget(scenario);
            emit({{"scenario", to_json(scenario)}, {"report", to_json(r)}}, out);
        } else if (*encode) {
            const Checkpoint ckpt = read_checkpoint(checkpoint_path);
            check_config_matches(ckpt, config_path, seed);
            const auto model = load_model(ckpt);
            const Image pre = read_png(pre_path);
            const auto latent = encode_pre_image(*model, pre);
            const LatentPacket packet = make_packet(latent, tile_id, x_origin, y_origin, ckpt.hash);
            write_packet_file(out, packet);
            std::cerr << "wrote " << out << " (" << serialize(packet).size() << " bytes)\n";
        } else if (*detect_cmd) {
            const Checkpoint ckpt = read_checkpoint(checkpoint_path);
            check_config_matches(ckpt, config_path, seed);
            const auto model = load_model(ckpt);
            const LatentPacket packet = read_packet_file(packet_path);
            const auto latent = unpack_latent<float>(packet, ckpt.hash);
            const Image post = read_png(post_path);
            const double thr = threshold >= 0 ? threshold : ckpt.config.score_threshold;
            const auto dets = detect_onboard(*model, latent, post, thr);
            write_text_file(out, detection_product(dets, packet.tile_id, ckpt.hash, packet.x_origin, packet.y_origin));
            if (!patches_dir.empty()) {
                export_patches(dets, post, patches_dir, packet.tile_id);
            }
            std::cerr << dets.size() << " detections -> " << out << "\n";
        } else if (*pair_cmd) {
            const Checkpoint ckpt = read_checkpoint(checkpoint_path);
            const auto model = load_model(ckpt);
            const ScenePair pair = make_scene_pair("pair", read_png(pre_path), read_png(post_path), {});
            const double thr = threshold >= 0 ? threshold : ckpt.config.score_threshold;
            const auto dets = detect(*model, pair, thr, exact ? LatentPrecision::exact : LatentPrecision::int8);
            write_text_file(out, detection_product(dets, "pair", ckpt.hash, 0, 0));
        } else if (*gen) {
            SyntheticSceneSpec spec;
            if (!config_path.empty()) {
                spec = spec_from_json(read_json(config_path));
            } else {
                spec.image_size = image_size;
                spec.validate();
            }
            const auto manifest = make_synthetic_manifest(spec, count, seed.value_or(0));
            write_synthetic_manifest(out, manifest);
            if (!patches_dir.empty()) {
                const fs::path dir(patches_dir);
                for (const auto& [id, scene_seed] : manifest.scenes) {
                    const ScenePair p = generate_scene(spec, scene_seed);
                    write_png((dir / (id + "_pre_disaster.png")).string(), p.pre);
                    write_png((dir / (id + "_post_disaster.png")).string(), p.post);
                    json boxes = json::array();
                    for (const auto& a : p.annotations) {
                        boxes.push_back({{"box", {a.box.x_min, a.box.y_min, a.box.x_max, a.box.y_max}},
                                         {"damage", to_string(a.damage)}});
                    }
                    write_text_file((dir / (id + "_boxes.json")).string(), boxes.dump(1) + "\n");
                }
            }
            std::cerr << "wrote " << out << " (" << count << " scenes)\n";
        } else if (*ablate) {
            const ExperimentConfig base = load_config(config_path, seed);
            const LoadedDataset data = load_dataset(base.manifest);
            std::vector<std::string> rows;
            if (rows_arg.empty()) {
                rows = VariantConfig::ablation_row_names();
            } else {
                std::stringstream ss(rows_arg);
                for (std::string r; std::getline(ss, r, ',');) rows.push_back(r);
            }
            if (seeds.empty()) seeds.push_back(base.seed);
            std::optional<SweepSpec> spec;
            if (!sweep_path.empty()) spec = sweep_spec_from_json(read_json(sweep_path));
            json table = json::array();
            for (const auto& row : rows) {
                for (auto s : seeds) {
                    const ExperimentConfig cfg = derive_variant(base, row, s);
                    std::cerr << "== " << row << " seed " << s << "\n";
                    TrainHooks hooks;
                    hooks.on_step = [&](const TrainStep& st) {
                        if (log_every > 0 && (st.step + 1) % log_every == 0) std::cerr << progress_line(st) << "\n";
                    };
                    const RunOutcome r = run_experiment(cfg, data, spec ? &*spec : nullptr, true, hooks);
                    const auto& t = r.test;
                    std::cerr << row << " seed " << s << ": mAP@0.5 " << t.map50 << ", P " << t.macro_precision
                              << " R " << t.macro_recall << " F1 " << t.macro_f1 << "\n";
                    table.push_back({{"row", row},
                                     {"seed", s},
                                     {"config_hash", to_hex(config_hash(cfg))},
                                     {"precision", t.macro_precision},
                                     {"recall", t.macro_recall},
                                     {"f1", t.macro_f1},
                                     {"map50", t.map50},
                                     {"train_seconds", r.train_seconds}});
                }
            }
            emit({{"base_config", to_json(base)}, {"rows", table}}, (fs::path(base.output_dir) / "ablation.json").string());
        }
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
