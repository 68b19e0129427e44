#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "apex/experiment.hpp"
#include "json.hpp"
#include "plots.hpp"

namespace fs = std::filesystem;
using namespace apex;

namespace {

std::string config_dir_of(const std::string& config_path) {
  return fs::path(config_path).parent_path().string();
}

ExperimentConfig load_with_overrides(const std::string& config_path, const std::string& variant,
                                     const std::string& algorithm,
                                     const std::vector<std::string>& setups) {
  ExperimentConfig cfg = load_config(config_path);
  if (!variant.empty()) cfg.apply_variant(variant_from_string(variant));
  if (!algorithm.empty()) {
    if (algorithm == "SAC" || algorithm == "sac") {
      cfg.trainer.algorithm = Algorithm::SAC;
    } else if (algorithm == "DSAC" || algorithm == "dsac") {
      cfg.trainer.algorithm = Algorithm::DSAC;
    } else {
      throw std::runtime_error("algorithm must be DSAC or SAC");
    }
  }
  if (!setups.empty()) {
    ExperimentConfig restricted = restrict_setups(cfg, setups);
    cfg = restricted;
  }
  return cfg;
}

Networks load_policy_checkpoint(const std::string& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  return unpack_networks(ckpt);
}

int fail(const std::string& what) {
  nlohmann::json err;
  err["error"] = what;
  std::cerr << err.dump() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"autonomous test driver: training, demonstrations, evaluation and sweeps"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "runs";
  std::string variant;
  std::string algorithm;
  std::string demo_dir;
  std::string checkpoint;
  std::vector<std::string> setups;
  std::vector<std::uint64_t> seeds;

  // ---- train
  auto* train = app.add_subcommand("train", "train one or more seeds of a variant");
  train->add_option("--config", config_path, "experiment config JSON")->required();
  train->add_option("--variant", variant,
                    "pure_rl | shared_and_reg | reg_only | augmented_only | augmented_and_reg");
  train->add_option("--algorithm", algorithm, "DSAC | SAC override");
  train->add_option("--seeds", seeds, "override the config seed list");
  train->add_option("--setups", setups, "restrict the setup queue (e.g. baseline)");
  train->add_option("--demos", demo_dir, "demonstration directory override");
  train->add_option("--out", out_dir, "output directory");

  // ---- demos
  auto* demos_cmd = app.add_subcommand("demos", "generate scripted-expert demonstrations");
  int demo_laps = 12;
  double demo_noise = 0.35;
  std::uint64_t demo_seed = 2024;
  demos_cmd->add_option("--config", config_path)->required();
  demos_cmd->add_option("--out", out_dir, "demo output directory")->required();
  demos_cmd->add_option("--laps", demo_laps, "laps per setup");
  demos_cmd->add_option("--noise", demo_noise, "lateral noise scale (m)");
  demos_cmd->add_option("--seed", demo_seed);

  // ---- eval
  auto* eval_cmd = app.add_subcommand("eval", "deterministic evaluation of a checkpoint");
  int eval_laps = 0;
  bool stochastic = false;
  eval_cmd->add_option("--config", config_path)->required();
  eval_cmd->add_option("--checkpoint", checkpoint)->required();
  eval_cmd->add_option("--out", out_dir)->required();
  eval_cmd->add_option("--laps", eval_laps, "laps per setup (default from config)");
  eval_cmd->add_flag("--stochastic", stochastic, "sample actions instead of the mean");
  eval_cmd->add_option("--demos", demo_dir, "demonstration directory override");

  // ---- sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "unseen-setup sweep over the convex hull");
  int sweep_n = 0;
  std::uint64_t sweep_seed = 7;
  sweep_cmd->add_option("--config", config_path)->required();
  sweep_cmd->add_option("--checkpoint", checkpoint)->required();
  sweep_cmd->add_option("--out", out_dir)->required();
  sweep_cmd->add_option("--n", sweep_n, "sample count (default from config)");
  sweep_cmd->add_option("--seed", sweep_seed);

  // ---- plot
  auto* plot_cmd = app.add_subcommand("plot", "render SVG charts from CSV outputs");
  std::string kind;
  std::vector<std::string> inputs;
  std::string plot_out = "plot.svg";
  std::string track_json;
  double window_u1 = 0.0, window_u2 = -1.0;
  plot_cmd->add_option("kind", kind, "speed | steer | brake | line | curves")->required();
  plot_cmd->add_option("--in", inputs, "input CSV files")->required();
  plot_cmd->add_option("--out", plot_out, "output SVG path");
  plot_cmd->add_option("--track", track_json, "track JSON (line plots)");
  plot_cmd->add_option("--u1", window_u1, "window start (brake plots)");
  plot_cmd->add_option("--u2", window_u2, "window end (brake plots)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      ExperimentConfig cfg = load_with_overrides(config_path, variant, algorithm, setups);
      if (!seeds.empty()) cfg.seeds = seeds;
      const ExperimentAssets assets = load_assets(cfg, config_dir_of(config_path), demo_dir);
      if (cfg.imitation.any_enabled() && !assets.has_demos) {
        return fail("variant needs demonstrations; run the demos command first");
      }
      for (std::uint64_t seed : cfg.seeds) {
        const std::string run_dir = out_dir + "/" + to_string(cfg.variant) +
                                    (cfg.trainer.algorithm == Algorithm::SAC ? "_sac" : "") +
                                    "_seed" + std::to_string(seed);
        std::printf("training %s (seed %llu)\n", run_dir.c_str(),
                    static_cast<unsigned long long>(seed));
        const TrainOutcome outcome = run_training(cfg, assets, seed, run_dir);
        std::printf("done: %lld env steps, best checkpoint %s\n",
                    static_cast<long long>(outcome.summary.env_steps),
                    outcome.summary.best_checkpoint.c_str());
      }
      return 0;
    }

    if (*demos_cmd) {
      const ExperimentConfig cfg = load_config(config_path);
      const ExperimentAssets assets = load_assets(cfg, config_dir_of(config_path), "");
      const auto sets =
          generate_demo_dirs(cfg, *assets.track, out_dir, demo_laps, demo_noise, demo_seed);
      // pooled path statistics beside the per-setup directories
      std::vector<const DemoSet*> ptrs;
      for (const DemoSet& d : sets) ptrs.push_back(&d);
      const PathStatistics stats = compute_path_stats(ptrs, assets.track->total_length());
      nlohmann::json js;
      js["bin_width"] = stats.bin_width;
      js["total_length"] = stats.total_length;
      js["lap_count"] = stats.lap_count;
      js["mu"] = stats.mu;
      js["sigma"] = stats.sigma;
      std::ofstream stats_out(fs::path(out_dir) / "path_stats.json");
      stats_out << js.dump() << "\n";
      for (const DemoSet& d : sets) {
        std::printf("%s: %zu laps, best %.2f s, peak steer %.3f rad\n", d.setup_id.c_str(),
                    d.laps.size(), d.laps.front().lap_time(), d.peak_steer_angle);
      }
      return 0;
    }

    if (*eval_cmd) {
      ExperimentConfig cfg = load_config(config_path);
      const ExperimentAssets assets = load_assets(cfg, config_dir_of(config_path), demo_dir);
      const Networks nets = load_policy_checkpoint(checkpoint);

      std::unique_ptr<DemoBuffer> demo_buffer;
      if (assets.has_demos) {
        demo_buffer = std::make_unique<DemoBuffer>(assets.demo_ptrs(), *assets.track,
                                                   cfg.vehicle, cfg.norm, assets.weights,
                                                   nullptr, cfg.imitation.holdout_laps);
      }

      EvalOptions options;
      options.n_laps = (eval_laps > 0) ? eval_laps : cfg.eval.n_laps;
      options.stochastic = stochastic;
      options.start_u = cfg.eval.fixed_start_u;
      options.valid_margin = cfg.eval.lap_valid_margin;
      options.write_telemetry = true;
      options.telemetry_dir = out_dir;
      options.telemetry_prefix = fs::path(checkpoint).stem().string() + "_";

      fs::create_directories(out_dir);
      const EvalReport report =
          evaluate(nets.policy, make_env_spec(cfg, assets), cfg.setups, options,
                   demo_buffer.get(), assets.has_demos ? &assets.path_stats : nullptr);
      std::ofstream json_out(fs::path(out_dir) / "eval_report.json");
      json_out << report.to_json() << "\n";
      report.write_csv((fs::path(out_dir) / "eval_report.csv").string());
      std::printf("%s\n", report.to_json().c_str());
      return 0;
    }

    if (*sweep_cmd) {
      ExperimentConfig cfg = load_config(config_path);
      const ExperimentAssets assets = load_assets(cfg, config_dir_of(config_path), "");
      const Networks nets = load_policy_checkpoint(checkpoint);
      RngStream rng(sweep_seed);
      const int n = (sweep_n > 0) ? sweep_n : cfg.eval.sweep_n;
      const SweepResult result =
          sweep_unseen(nets.policy, make_env_spec(cfg, assets), cfg.setups, n, rng);
      fs::create_directories(out_dir);
      std::ofstream json_out(fs::path(out_dir) / "sweep.json");
      json_out << result.to_json() << "\n";
      result.write_csv((fs::path(out_dir) / "sweep.csv").string());
      std::printf("%s\n", result.to_json().c_str());
      return 0;
    }

    if (*plot_cmd) {
      if (kind == "speed") {
        plots::plot_speed(inputs, plot_out);
      } else if (kind == "steer") {
        plots::plot_steer(inputs, plot_out);
      } else if (kind == "brake") {
        plots::plot_brake(inputs, window_u1, window_u2, plot_out);
      } else if (kind == "line") {
        if (track_json.empty()) return fail("line plots need --track");
        plots::plot_line(track_json, inputs, plot_out);
      } else if (kind == "curves") {
        plots::plot_curves(inputs, plot_out);
      } else {
        return fail("unknown plot kind '" + kind + "'");
      }
      return 0;
    }
  } catch (const std::exception& e) {
    return fail(e.what());
  }
  return 0;
}
