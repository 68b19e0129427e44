#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "apex/env.hpp"
#include "apex/imitation.hpp"
#include "apex/trainer.hpp"

namespace apex {

enum class Variant {
  PureRl,
  SharedAndReg,
  RegOnly,
  AugmentedOnly,
  AugmentedAndReg,
};

Variant variant_from_string(const std::string& name);
std::string to_string(Variant v);

struct EvalConfig {
  int n_laps = 3;
  double fixed_start_u = 0.0;
  double lap_valid_margin = 0.05;
  int sweep_n = 100;
  int max_eval_steps = 4000;
};

// Full experiment description. Parsed strictly: unknown keys are rejected and
// the vehicle section has no defaults.
struct ExperimentConfig {
  std::string track_path;
  VehicleParams vehicle;
  std::vector<VehicleSetup> setups;
  RewardWeights reward_weights;
  EpisodeConfig episode;
  NormTable norm;
  TrainerConfig trainer;
  ImitationConfig imitation;
  EvalConfig eval;
  Variant variant = Variant::PureRl;
  std::vector<std::uint64_t> seeds = {1};

  // applies the variant's imitation-flag column
  void apply_variant(Variant v);

  std::string resolved_json() const;  // all defaults materialized
  std::uint64_t config_hash() const;  // FNV-1a of the resolved document
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);

std::uint64_t fnv1a_hash(const std::string& text);

}  // namespace apex
