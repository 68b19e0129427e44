#include "apex/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace apex {

namespace fs = std::filesystem;

std::vector<const DemoSet*> ExperimentAssets::demo_ptrs() const {
  std::vector<const DemoSet*> ptrs;
  ptrs.reserve(demo_sets.size());
  for (const DemoSet& d : demo_sets) ptrs.push_back(&d);
  return ptrs;
}

std::string resolve_path(const std::string& path, const std::string& config_dir) {
  if (fs::exists(path)) return path;
  if (!config_dir.empty()) {
    const fs::path beside = fs::path(config_dir) / path;
    if (fs::exists(beside)) return beside.string();
    const fs::path repo_root = fs::path(config_dir) / ".." / ".." / path;
    if (fs::exists(repo_root)) return fs::weakly_canonical(repo_root).string();
  }
#ifdef APEX_ASSET_DIR
  const fs::path assets = fs::path(APEX_ASSET_DIR) / ".." / path;
  if (fs::exists(assets)) return fs::weakly_canonical(assets).string();
#endif
  return path;
}

ExperimentAssets load_assets(const ExperimentConfig& cfg, const std::string& config_dir,
                             const std::string& demo_dir_override) {
  ExperimentAssets assets;
  assets.track = std::make_shared<TrackModel>(
      load_track(resolve_path(cfg.track_path, config_dir)));
  assets.weights = cfg.reward_weights;

  std::string demo_dir = demo_dir_override.empty() ? cfg.imitation.demo_dir : demo_dir_override;
  if (!demo_dir.empty()) {
    demo_dir = resolve_path(demo_dir, config_dir);
    bool all_present = true;
    for (const VehicleSetup& setup : cfg.setups) {
      if (!fs::exists(fs::path(demo_dir) / setup.setup_id / "manifest.json")) {
        all_present = false;
        break;
      }
    }
    if (all_present) {
      for (const VehicleSetup& setup : cfg.setups) {
        assets.demo_sets.push_back(load_demo_set((fs::path(demo_dir) / setup.setup_id).string()));
      }
      assets.has_demos = true;
    }
  }

  if (assets.has_demos) {
    assets.path_stats = compute_path_stats(assets.demo_ptrs(), assets.track->total_length());
    // rate thresholds follow the maximum observed in the demonstrations
    double steer_rate = 0.0, pedal_rate = 0.0;
    for (const DemoSet& d : assets.demo_sets) {
      steer_rate = std::max(steer_rate, d.max_steer_cmd_rate);
      pedal_rate = std::max(pedal_rate, d.max_pedal_cmd_rate);
    }
    assets.weights.steer_rate_threshold = steer_rate;
    assets.weights.pedal_rate_threshold = pedal_rate;
  }
  return assets;
}

std::vector<DemoSet> generate_demo_dirs(const ExperimentConfig& cfg, const TrackModel& track,
                                        const std::string& dir, int laps_per_setup,
                                        double noise_scale, std::uint64_t seed) {
  auto track_ptr = std::make_shared<TrackModel>(track);
  RngStream master(seed);
  std::vector<DemoSet> sets;
  for (const VehicleSetup& setup : cfg.setups) {
    RngStream rng = master.spawn(std::hash<std::string>{}(setup.setup_id));
    DemoSet demos = generate_demos(track_ptr, setup, cfg.vehicle, cfg.episode,
                                   cfg.reward_weights, cfg.norm, laps_per_setup, noise_scale,
                                   rng);
    write_demo_set((fs::path(dir) / setup.setup_id).string(), demos);
    sets.push_back(std::move(demos));
  }
  return sets;
}

EnvSpec make_env_spec(const ExperimentConfig& cfg, const ExperimentAssets& assets) {
  EnvSpec spec;
  spec.track = assets.track;
  spec.vehicle = cfg.vehicle;
  spec.episode = cfg.episode;
  spec.weights = assets.weights;
  spec.weights.path_dev_w = cfg.reward_weights.path_dev_w;  // variant-controlled
  spec.norm = cfg.norm;
  spec.setups = cfg.setups;
  spec.path_stats = assets.has_demos ? &assets.path_stats : nullptr;
  return spec;
}

TrainOutcome run_training(const ExperimentConfig& cfg, const ExperimentAssets& assets,
                          std::uint64_t seed, const std::string& run_dir) {
  if (cfg.imitation.any_enabled() && !assets.has_demos) {
    throw std::runtime_error("variant " + to_string(cfg.variant) +
                             " needs demonstrations; generate them first (demos command)");
  }

  fs::create_directories(run_dir);
  {
    std::ofstream out(fs::path(run_dir) / "config.json");
    out << cfg.resolved_json() << "\n";
    std::ofstream hash_out(fs::path(run_dir) / "config_hash.txt");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(cfg.config_hash()));
    hash_out << buf << "\n";
  }

  const EnvSpec spec = make_env_spec(cfg, assets);

  std::unique_ptr<DemoBuffer> demo_buffer;
  if (cfg.imitation.regularization || cfg.imitation.shared_experience || assets.has_demos) {
    if (assets.has_demos) {
      demo_buffer = std::make_unique<DemoBuffer>(
          assets.demo_ptrs(), *assets.track, cfg.vehicle, cfg.norm, spec.weights,
          cfg.imitation.augmented_reward ? &assets.path_stats : nullptr,
          cfg.imitation.holdout_laps);
    }
  }

  Trainer trainer(cfg.trainer, spec, seed, demo_buffer.get(), cfg.imitation);
  TrainOutcome outcome;
  outcome.run_dir = run_dir;
  outcome.summary = trainer.train(run_dir, cfg.config_hash());
  return outcome;
}

ExperimentConfig restrict_setups(const ExperimentConfig& cfg,
                                 const std::vector<std::string>& setup_ids) {
  ExperimentConfig out = cfg;
  out.setups.clear();
  for (const std::string& id : setup_ids) {
    bool found = false;
    for (const VehicleSetup& s : cfg.setups) {
      if (s.setup_id == id) {
        out.setups.push_back(s);
        found = true;
        break;
      }
    }
    if (!found) throw std::runtime_error("unknown setup id '" + id + "'");
  }
  return out;
}

}  // namespace apex
