#pragma once

#include <memory>
#include <string>
#include <vector>

#include "apex/config.hpp"
#include "apex/evalkit.hpp"
#include "apex/imitation.hpp"
#include "apex/trainer.hpp"

namespace apex {

// Resolved, ready-to-run experiment pieces: the track, the demonstration
// sets (one per setup) with pooled path statistics, and reward weights whose
// rate thresholds are calibrated from the demonstrations when present.
struct ExperimentAssets {
  std::shared_ptr<const TrackModel> track;
  std::vector<DemoSet> demo_sets;
  PathStatistics path_stats;
  bool has_demos = false;
  RewardWeights weights;

  std::vector<const DemoSet*> demo_ptrs() const;
};

// Resolves a path against the working directory, then the config directory,
// then the repository layout around it.
std::string resolve_path(const std::string& path, const std::string& config_dir);

ExperimentAssets load_assets(const ExperimentConfig& cfg, const std::string& config_dir,
                             const std::string& demo_dir_override = "");

// Writes one demonstration directory per setup (dir/<setup_id>/) and returns
// the generated sets.
std::vector<DemoSet> generate_demo_dirs(const ExperimentConfig& cfg, const TrackModel& track,
                                        const std::string& dir, int laps_per_setup,
                                        double noise_scale, std::uint64_t seed);

EnvSpec make_env_spec(const ExperimentConfig& cfg, const ExperimentAssets& assets);

struct TrainOutcome {
  Trainer::Summary summary;
  std::string run_dir;
};

// Runs one seed of the configured variant end to end: builds the demo buffer
// when the variant needs it, writes the resolved config and hash into the run
// directory and trains to completion.
TrainOutcome run_training(const ExperimentConfig& cfg, const ExperimentAssets& assets,
                          std::uint64_t seed, const std::string& run_dir);

// restricts the config's setup list (single-setup ablation)
ExperimentConfig restrict_setups(const ExperimentConfig& cfg,
                                 const std::vector<std::string>& setup_ids);

}  // namespace apex
