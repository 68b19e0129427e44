#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>
#include <vector>

#include "apex/csv.hpp"
#include "apex/env.hpp"
#include "apex/nn.hpp"
#include "apex/path_stats.hpp"
#include "apex/replay.hpp"
#include "apex/rng.hpp"

namespace apex {

struct ImitationConfig {
  double lambda_imi = 10.0;
  double demo_mix_fraction = 0.1;
  int imitation_batch_size = 256;
  bool shared_experience = false;
  bool regularization = false;
  bool augmented_reward = false;
  int holdout_laps = 2;
  std::string demo_dir;

  void validate() const;  // mix fraction above 0.5 destabilizes training
  bool any_enabled() const { return shared_experience || regularization || augmented_reward; }
};

struct DemoLap {
  std::vector<TelemetryRow> rows;  // includes action columns
  double lap_time() const { return rows.size() * kAgentPeriod; }
};

struct DemoSet {
  std::vector<DemoLap> laps;
  std::string setup_id;
  double mu_front_scale = 1.0;
  double mu_rear_scale = 1.0;
  std::string source;
  std::string track_name;
  // calibration measured over the demonstrations
  double max_steer_cmd_rate = 0.0;   // command units / s
  double max_pedal_cmd_rate = 0.0;   // positive deltas only
  double peak_steer_angle = 0.0;     // rad
  double max_abs_e_norm = 0.0;
  // reward weights in effect when the demos were generated (allows the slip
  // component to be rescaled on ingestion)
  double gen_q2 = 1.5;
};

// ---------------------------------------------------------------------------
// Scripted expert

struct RacingLine {
  std::vector<double> station_s;  // centerline arc position per node
  std::vector<double> offset;     // lateral offset of the line at each node
  std::vector<Eigen::Vector2d> points;
  std::vector<double> heading;
  std::vector<double> curvature;
  std::vector<double> speed;      // quasi-steady profile along the line
  double line_length = 0.0;
};

// Iterative curvature smoothing of the centerline within the track bounds
// (projected coordinate descent on the bending energy of the offset curve).
RacingLine compute_racing_line(const TrackModel& track, const VehicleParams& params,
                               const VehicleSetup& setup, double edge_margin = 1.2,
                               int sweeps = 400, const std::vector<double>* extra_offset = nullptr);

// Simulates the expert controller (pure pursuit + proportional speed control
// on the racing line) through the environment and returns closed laps. Each
// lap perturbs the target line with smooth lateral noise so the resulting
// path statistics have realistic spread.
DemoSet generate_demos(std::shared_ptr<const TrackModel> track, const VehicleSetup& setup,
                       const VehicleParams& params, const EpisodeConfig& episode,
                       const RewardWeights& weights, const NormTable& norm, int n_laps,
                       double noise_scale, RngStream& rng, double edge_margin = 1.2);

PathStatistics compute_path_stats(const DemoSet& demos, double total_length,
                                  double bin_width = 1.0);
// pooled statistics over demo sets from several setups
PathStatistics compute_path_stats(const std::vector<const DemoSet*>& sets, double total_length,
                                  double bin_width = 1.0);

void write_demo_set(const std::string& dir, const DemoSet& demos);
DemoSet load_demo_set(const std::string& dir);

// ---------------------------------------------------------------------------
// Training-side demonstration machinery

// Reconstructs observations and transitions from a demo set under the current
// normalization table and reward weights. Demonstrations are kept for the
// whole life of training (never evicted). The last holdout_laps laps are
// reserved for the policy-similarity metric.
class DemoBuffer {
 public:
  DemoBuffer(const DemoSet& demos, const TrackModel& track, const VehicleParams& params,
             const NormTable& norm, const RewardWeights& weights,
             const PathStatistics* path_stats, int holdout_laps);
  // pools transitions from one demo set per setup
  DemoBuffer(const std::vector<const DemoSet*>& sets, const TrackModel& track,
             const VehicleParams& params, const NormTable& norm, const RewardWeights& weights,
             const PathStatistics* path_stats, int holdout_laps);

  std::size_t size() const { return static_cast<std::size_t>(obs_.rows()); }
  std::size_t holdout_size() const { return static_cast<std::size_t>(holdout_obs_.rows()); }

  // uniform (s, a) pairs for the imitation loss
  void sample_pairs(int n, RngStream& rng, Matrix& obs, Matrix& act) const;
  // uniform transitions for shared-experience mixing
  void sample_into(Batch& batch, const std::vector<int>& rows, RngStream& rng) const;

  const Matrix& holdout_obs() const { return holdout_obs_; }
  const Matrix& holdout_act() const { return holdout_act_; }

 private:
  Matrix obs_, act_, next_obs_;
  Eigen::VectorXd reward_;
  Matrix holdout_obs_, holdout_act_;
};

// J_imi = -mean log pi(a_demo | s_demo). When grads is given, accumulates
// weight * dJ_imi into them.
double imitation_loss(const PolicyNet& policy, const Matrix& demo_obs, const Matrix& demo_act,
                      PolicyGrads* grads, double weight);

// Replaces floor(fraction * batch) rows of the batch with demo transitions.
void mix_batches(Batch& batch, const DemoBuffer& demos, double fraction, RngStream& rng);

// mean log-likelihood of held-out demonstration actions under the policy
double policy_similarity(const PolicyNet& policy, const DemoBuffer& demos);

}  // namespace apex
