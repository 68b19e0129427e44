#pragma once

#include <Eigen/Core>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "apex/path_stats.hpp"
#include "apex/rng.hpp"
#include "apex/track.hpp"
#include "apex/vehicle.hpp"

namespace apex {

constexpr int kObsDim = 74;
constexpr int kActDim = 2;

// Index layout of the observation vector.
namespace obs {
constexpr int kVx = 0;
constexpr int kVy = 1;
constexpr int kYawRate = 2;
constexpr int kSteerCmd = 3;
constexpr int kThrottle = 4;
constexpr int kBrake = 5;
constexpr int kAx = 6;
constexpr int kAy = 7;
constexpr int kAz = 8;
constexpr int kYawAccel = 9;
constexpr int kENorm = 10;
constexpr int kHeadingError = 11;
constexpr int kLeftEdge = 12;   // 15 x (x, y)
constexpr int kRightEdge = 42;  // 15 x (x, y)
constexpr int kMuFront = 72;
constexpr int kMuRear = 73;
}  // namespace obs

// Expected maximum absolute value of each observation group; entries are
// divided by these before reaching the agent.
struct NormTable {
  double vx = 80.0;
  double vy = 10.0;
  double yaw_rate = 1.5;
  double steer_cmd = 1.0;
  double throttle = 1.0;
  double brake = 1.0;
  double ax = 15.0;
  double ay = 25.0;
  double az = kGravity;
  double yaw_accel = 10.0;
  double e_norm = 2.0;
  double heading_error = 1.5;
  double edge_x = 250.0;
  double edge_y = 60.0;
  double mu_scale = 1.5;

  Eigen::VectorXd divisors() const;
  void validate() const;  // all > 0
};

struct RewardWeights {
  double progress_w = 1.0;
  double q1 = 1.0;           // bounds-exceed penalty weight
  double q2 = 1.5;           // slip-angle penalty weight
  double steer_rate_w = 16.0;
  double pedal_rate_w = 8.0;
  double steer_rate_threshold = 4.0;  // command units / s
  double pedal_rate_threshold = 4.0;  // command units / s
  double offtrack_terminal_penalty = 100.0;
  double path_dev_w = 0.0;   // > 0 enables the augmented-reward term
  double sigma_min = 1.0;
};

struct RewardBreakdown {
  double r_s = 0.0;
  double r_edge = 0.0;
  double r_slip = 0.0;
  double r_steer = 0.0;
  double r_pedals = 0.0;
  double r_imi = 0.0;
  double r_terminal = 0.0;  // early-termination penalty
  double total = 0.0;
};

struct EpisodeConfig {
  int max_steps = 625;
  double offtrack_limit_e_norm = 2.0;
  double stop_speed = 1.0;      // m/s
  double stop_patience = 2.0;   // s
  double start_speed_fraction = 0.5;
};

struct Transition {
  Eigen::VectorXd observation;
  Eigen::Vector2d action;
  double reward = 0.0;
  Eigen::VectorXd next_observation;
  bool done = false;
  std::string setup_id;
  int step_index = 0;
};

RewardBreakdown compute_reward(const CurvilinearPose& prev_pose, const CurvilinearPose& new_pose,
                               double speed, const TireReport& tires,
                               const Eigen::Vector2d& action_delta, const RewardWeights& weights,
                               const TrackModel& track, bool on_surface,
                               const PathStatistics* path_stats);

Eigen::VectorXd build_observation(const VehicleState& state, const TrackModel& track,
                                  const CurvilinearPose& pose, const Eigen::Vector2d& prev_action,
                                  const VehicleSetup& setup, const NormTable& norm);

// Circular queue of vehicle setups, advanced once per episode. Thread-safe.
class SetupQueue {
 public:
  explicit SetupQueue(std::vector<VehicleSetup> setups);
  VehicleSetup next();
  const std::vector<VehicleSetup>& setups() const { return setups_; }

 private:
  std::vector<VehicleSetup> setups_;
  std::size_t index_ = 0;
  std::mutex mutex_;
};

struct TelemetryRow {
  double t = 0.0;
  std::string setup_id;
  double u = 0.0, v = 0.0, e_norm = 0.0;
  double x = 0.0, y = 0.0, heading = 0.0;
  double vx = 0.0, vy = 0.0, yaw_rate = 0.0;
  double steer = 0.0, throttle = 0.0, brake = 0.0;
  double ax = 0.0, ay = 0.0;
  double r_s = 0.0, r_edge = 0.0, r_slip = 0.0, r_steer = 0.0, r_pedals = 0.0, r_imi = 0.0;
  double total = 0.0;
  int done = 0;
  // action columns, present in demonstration files
  double a_steer = 0.0, a_long = 0.0;
};

struct StepInfo {
  CurvilinearPose pose;
  VehicleState state;
  RewardBreakdown breakdown;
  int lap_crossings = 0;  // cumulative forward start/finish crossings
  bool truncated = false;
  bool off_track = false;
  bool stopped = false;
  bool blown_up = false;
};

// Everything needed to build one environment instance.
struct EnvSpec {
  std::shared_ptr<const TrackModel> track;
  VehicleParams vehicle;
  EpisodeConfig episode;
  RewardWeights weights;
  NormTable norm;
  std::vector<VehicleSetup> setups;
  const PathStatistics* path_stats = nullptr;  // augmented reward when set
};

// One racetrack MDP instance: owns the vehicle state, assembles observations,
// scores rewards and drives the episode lifecycle. Holds its own RNG; several
// environments step independently without shared mutable state.
class Environment {
 public:
  Environment(std::shared_ptr<const TrackModel> track, VehicleParams params,
              EpisodeConfig episode, RewardWeights weights, NormTable norm,
              std::uint64_t seed, SetupQueue* queue = nullptr,
              const PathStatistics* path_stats = nullptr);

  // Random start: u ~ U[0, L), e_norm ~ U(-0.25, 0.25), aligned with the
  // centerline at half of the reference lap speed. Advances the setup queue.
  Eigen::VectorXd reset();
  // Deterministic start at a fixed arc position on the centerline.
  Eigen::VectorXd reset_fixed(double u);
  // Full control over the start pose (used by the scripted expert).
  Eigen::VectorXd reset_custom(double u, double v, double heading, double speed);

  struct StepResult {
    Eigen::VectorXd obs;
    RewardBreakdown reward;
    bool done = false;
    StepInfo info;
  };
  StepResult step(const Eigen::Vector2d& action);

  void set_setup(const VehicleSetup& setup) { setup_ = setup; }
  const VehicleSetup& setup() const { return setup_; }
  const VehicleState& state() const { return state_; }
  const CurvilinearPose& pose() const { return pose_; }
  const TrackModel& track() const { return *track_; }
  const VehicleParams& vehicle_params() const { return params_; }
  const RewardWeights& reward_weights() const { return weights_; }
  const NormTable& norm_table() const { return norm_; }
  const EpisodeConfig& episode_config() const { return episode_; }
  int step_count() const { return step_count_; }
  const TelemetryRow& last_telemetry() const { return last_row_; }

  // reference speed at arc position u for the current setup (quasi-steady
  // centerline profile; memoized per setup id)
  double reference_speed(double u);

 private:
  Eigen::VectorXd start_episode(double u, double v, double heading, double speed);
  const std::vector<double>& profile_for(const VehicleSetup& setup);

  std::shared_ptr<const TrackModel> track_;
  VehicleParams params_;
  EpisodeConfig episode_;
  RewardWeights weights_;
  NormTable norm_;
  RngStream rng_;
  SetupQueue* queue_ = nullptr;
  const PathStatistics* path_stats_ = nullptr;

  VehicleSetup setup_;
  VehicleState state_;
  CurvilinearPose pose_;
  Eigen::Vector2d prev_action_ = Eigen::Vector2d::Zero();
  Eigen::VectorXd last_obs_;
  TelemetryRow last_row_;
  int step_count_ = 0;
  int stop_steps_ = 0;
  int lap_crossings_ = 0;

  std::map<std::string, std::vector<double>> profile_cache_;
  std::vector<double> station_s_, station_curv_;
};

}  // namespace apex
