#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "apex/env.hpp"
#include "apex/imitation.hpp"
#include "apex/nn.hpp"

namespace apex {

struct LapRecord {
  std::string setup_id;
  double lap_time = 0.0;
  bool valid = false;       // no excursion beyond the allowed margin
  double max_abs_e_norm = 0.0;
  int start_row = 0;        // rows of the source telemetry
  int end_row = 0;
};

// Splits a continuous telemetry stream into laps delimited by forward
// start/finish crossings (u wrapping from near L to near 0 with positive
// progress). Crossing times are interpolated inside the step; partial laps at
// either end are discarded; reverse crossings do not produce laps.
std::vector<LapRecord> lap_split(const std::vector<TelemetryRow>& rows, const TrackModel& track,
                                 double valid_margin = 0.05);

// First arc position inside [u1, u2] where the brake fraction exceeds the
// threshold after a full-throttle stretch. Empty when nothing qualifies.
std::optional<double> brake_point(const std::vector<TelemetryRow>& rows, double u1, double u2,
                                  double threshold = 0.1);

struct LinearFit {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
};

// Ordinary least squares y ~ c0 + c1 x1 + c2 x2 via pivoted normal equations.
// Throws std::runtime_error on rank deficiency.
LinearFit linear_fit(const std::vector<Eigen::Vector3d>& points);

// ---------------------------------------------------------------------------
// Policy rollouts

struct RolloutOptions {
  double start_u = 0.0;
  int max_steps = 4000;
  bool deterministic = true;
  std::uint64_t seed = 0;     // used when sampling stochastically
  int stop_after_laps = 0;    // 0: run to max_steps or termination
};

struct RolloutResult {
  std::vector<TelemetryRow> rows;
  double total_reward = 0.0;
  int laps_completed = 0;
  bool terminated_early = false;
  double path_deviation_sum = 0.0;  // sum of the Eq-kernel over all steps
};

// Deterministic (or sampled) rollout of a policy from a fixed start.
RolloutResult rollout_policy(Environment& env, const PolicyNet& policy,
                             const RolloutOptions& options);

struct SetupEval {
  std::string setup_id;
  double best_lap = std::numeric_limits<double>::quiet_NaN();
  double avg_lap = std::numeric_limits<double>::quiet_NaN();
  int laps_completed = 0;
  int laps_valid = 0;
  bool completed = false;            // at least one full lap
  double avg_reward = 0.0;           // reward over the first episode-length window
  double path_deviation = std::numeric_limits<double>::quiet_NaN();  // per-lap sum
};

struct EvalReport {
  std::vector<SetupEval> setups;
  double policy_similarity = std::numeric_limits<double>::quiet_NaN();  // mean log-likelihood
  bool stochastic = false;
  double mean_best_lap = std::numeric_limits<double>::quiet_NaN();

  std::string to_json() const;
  void write_csv(const std::string& path) const;
};

struct EvalOptions {
  int n_laps = 3;
  bool stochastic = false;
  std::uint64_t seed = 1;
  double start_u = 0.0;
  double valid_margin = 0.05;
  bool write_telemetry = false;
  std::string telemetry_dir;
  std::string telemetry_prefix;
};

// Deterministic evaluation of a policy over the given setups from a single
// fixed start, with lap times, reward, path deviation (when stats are given)
// and policy similarity (when demos are given).
EvalReport evaluate(const PolicyNet& policy, const EnvSpec& spec,
                    const std::vector<VehicleSetup>& setups, const EvalOptions& options,
                    const DemoBuffer* demos = nullptr, const PathStatistics* stats = nullptr);

// ---------------------------------------------------------------------------
// Unseen-setup sweep

struct SweepSample {
  double mu_front = 0.0;
  double mu_rear = 0.0;
  double lap_time = std::numeric_limits<double>::quiet_NaN();
  bool completed = false;
};

struct SweepResult {
  std::vector<SweepSample> samples;
  LinearFit fit;
  int completed = 0;
  double lap_time_range = 0.0;

  std::string to_json() const;
  void write_csv(const std::string& path) const;
};

// Maps convex-hull weights onto a setup (exposed for tests).
VehicleSetup hull_setup(const std::vector<VehicleSetup>& vertices,
                        const std::vector<double>& weights);

// Samples n setups uniformly from the convex hull of the training setups via
// Dirichlet weights, runs one deterministic lap each and fits
// lap_time ~ c0 + c1 mu_f + c2 mu_r.
SweepResult sweep_unseen(const PolicyNet& policy, const EnvSpec& spec,
                         const std::vector<VehicleSetup>& training_setups, int n, RngStream& rng);

}  // namespace apex
