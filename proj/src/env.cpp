#include "apex/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "apex/speed_profile.hpp"

namespace apex {

int PathStatistics::bin_of(double u) const {
  double w = std::fmod(u, total_length);
  if (w < 0.0) w += total_length;
  int b = static_cast<int>(w / bin_width);
  if (b >= static_cast<int>(mu.size())) b = static_cast<int>(mu.size()) - 1;
  return b;
}

double PathStatistics::mu_at(double u) const { return mu[bin_of(u)]; }
double PathStatistics::sigma_at(double u) const { return sigma[bin_of(u)]; }

double PathStatistics::deviation(double u, double v, double sigma_min) const {
  const int b = bin_of(u);
  const double d = v - mu[b];
  const double s = std::max(sigma[b], sigma_min);
  return d * d / (s * s);
}

Eigen::VectorXd NormTable::divisors() const {
  Eigen::VectorXd d(kObsDim);
  d[obs::kVx] = vx;
  d[obs::kVy] = vy;
  d[obs::kYawRate] = yaw_rate;
  d[obs::kSteerCmd] = steer_cmd;
  d[obs::kThrottle] = throttle;
  d[obs::kBrake] = brake;
  d[obs::kAx] = ax;
  d[obs::kAy] = ay;
  d[obs::kAz] = az;
  d[obs::kYawAccel] = yaw_accel;
  d[obs::kENorm] = e_norm;
  d[obs::kHeadingError] = heading_error;
  for (int k = 0; k < TrackModel::kEdgePoints; ++k) {
    d[obs::kLeftEdge + 2 * k] = edge_x;
    d[obs::kLeftEdge + 2 * k + 1] = edge_y;
    d[obs::kRightEdge + 2 * k] = edge_x;
    d[obs::kRightEdge + 2 * k + 1] = edge_y;
  }
  d[obs::kMuFront] = mu_scale;
  d[obs::kMuRear] = mu_scale;
  return d;
}

void NormTable::validate() const {
  const Eigen::VectorXd d = divisors();
  if ((d.array() <= 0.0).any()) throw std::runtime_error("normalization divisors must be > 0");
}

RewardBreakdown compute_reward(const CurvilinearPose& prev_pose, const CurvilinearPose& new_pose,
                               double speed, const TireReport& tires,
                               const Eigen::Vector2d& action_delta, const RewardWeights& weights,
                               const TrackModel& track, bool on_surface,
                               const PathStatistics* path_stats) {
  const double dt = kAgentPeriod;
  RewardBreakdown r;

  const double du = track.wrap_delta(new_pose.u - prev_pose.u);
  r.r_s = on_surface ? weights.progress_w * du : 0.0;

  const double abs_e = std::abs(new_pose.e_norm);
  if (abs_e > 1.0) {
    r.r_edge = -weights.q1 * abs_e * speed * speed;
  }

  r.r_slip = -weights.q2 * speed * (tires.alpha_front_excess + tires.alpha_rear_excess);

  const double steer_rate = std::abs(action_delta[0]) / dt;
  r.r_steer = -weights.steer_rate_w * std::max(steer_rate - weights.steer_rate_threshold, 0.0);

  // throttle release / brake application (negative delta) is free
  const double pedal_rate = action_delta[1] / dt;
  r.r_pedals = -weights.pedal_rate_w * std::max(pedal_rate - weights.pedal_rate_threshold, 0.0);

  if (path_stats != nullptr && weights.path_dev_w > 0.0) {
    r.r_imi = -weights.path_dev_w *
              path_stats->deviation(new_pose.u, new_pose.v, weights.sigma_min);
  }

  r.total = r.r_s + r.r_edge + r.r_slip + r.r_steer + r.r_pedals + r.r_imi + r.r_terminal;
  return r;
}

Eigen::VectorXd build_observation(const VehicleState& state, const TrackModel& track,
                                  const CurvilinearPose& pose, const Eigen::Vector2d& prev_action,
                                  const VehicleSetup& setup, const NormTable& norm) {
  Eigen::VectorXd o(kObsDim);
  o[obs::kVx] = state.vx;
  o[obs::kVy] = state.vy;
  o[obs::kYawRate] = state.yaw_rate;
  o[obs::kSteerCmd] = prev_action[0];
  o[obs::kThrottle] = state.throttle;
  o[obs::kBrake] = state.brake;
  o[obs::kAx] = state.ax;
  o[obs::kAy] = state.ay;
  o[obs::kAz] = kGravity;  // planar model: constant 1 g placeholder
  o[obs::kYawAccel] = state.yaw_accel;
  o[obs::kENorm] = pose.e_norm;
  o[obs::kHeadingError] = pose.heading_error;

  const TrackModel::EdgeView view = track.edge_points(pose, state.heading, state.speed());
  for (int k = 0; k < TrackModel::kEdgePoints; ++k) {
    o[obs::kLeftEdge + 2 * k] = view.left[k].x();
    o[obs::kLeftEdge + 2 * k + 1] = view.left[k].y();
    o[obs::kRightEdge + 2 * k] = view.right[k].x();
    o[obs::kRightEdge + 2 * k + 1] = view.right[k].y();
  }
  o[obs::kMuFront] = setup.mu_front_scale;
  o[obs::kMuRear] = setup.mu_rear_scale;

  return o.cwiseQuotient(norm.divisors());
}

SetupQueue::SetupQueue(std::vector<VehicleSetup> setups) : setups_(std::move(setups)) {
  if (setups_.empty()) throw std::runtime_error("setup queue must not be empty");
}

VehicleSetup SetupQueue::next() {
  std::lock_guard<std::mutex> lock(mutex_);
  VehicleSetup s = setups_[index_];
  index_ = (index_ + 1) % setups_.size();
  return s;
}

Environment::Environment(std::shared_ptr<const TrackModel> track, VehicleParams params,
                         EpisodeConfig episode, RewardWeights weights, NormTable norm,
                         std::uint64_t seed, SetupQueue* queue, const PathStatistics* path_stats)
    : track_(std::move(track)),
      params_(params),
      episode_(episode),
      weights_(weights),
      norm_(norm),
      rng_(seed),
      queue_(queue),
      path_stats_(path_stats) {
  params_.validate();
  norm_.validate();
  const auto& stations = track_->stations();
  const int n = static_cast<int>(stations.size()) - 1;  // drop closing duplicate
  station_s_.resize(n);
  station_curv_.resize(n);
  for (int i = 0; i < n; ++i) {
    station_s_[i] = stations[i].s;
    station_curv_[i] = track_->curvature(stations[i].s);
  }
}

const std::vector<double>& Environment::profile_for(const VehicleSetup& setup) {
  auto it = profile_cache_.find(setup.setup_id);
  if (it == profile_cache_.end()) {
    it = profile_cache_
             .emplace(setup.setup_id,
                      quasi_steady_speed_profile(station_s_, station_curv_,
                                                 track_->total_length(), params_, setup))
             .first;
  }
  return it->second;
}

double Environment::reference_speed(double u) {
  const std::vector<double>& prof = profile_for(setup_);
  const double uw = track_->wrap(u);
  const int n = static_cast<int>(station_s_.size());
  int lo = 0, hi = n - 1;
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    if (station_s_[mid] <= uw) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  const int j = (lo + 1) % n;
  const double s0 = station_s_[lo];
  const double s1 = (j == 0) ? track_->total_length() : station_s_[j];
  const double f = (s1 > s0) ? (uw - s0) / (s1 - s0) : 0.0;
  return (1.0 - f) * prof[lo] + f * prof[j];
}

Eigen::VectorXd Environment::reset() {
  if (queue_ != nullptr) setup_ = queue_->next();
  const double u = rng_.uniform(0.0, track_->total_length());
  const double f = rng_.uniform(-0.25, 0.25);
  const double hw = (f >= 0.0) ? track_->half_width(u, Side::Left)
                               : track_->half_width(u, Side::Right);
  const double v = f * hw;
  const double heading = track_->heading(u);
  const double speed = episode_.start_speed_fraction * reference_speed(u);
  return start_episode(u, v, heading, speed);
}

Eigen::VectorXd Environment::reset_fixed(double u) {
  if (queue_ != nullptr) setup_ = queue_->next();
  const double heading = track_->heading(u);
  const double speed = episode_.start_speed_fraction * reference_speed(u);
  return start_episode(u, 0.0, heading, speed);
}

Eigen::VectorXd Environment::reset_custom(double u, double v, double heading, double speed) {
  return start_episode(u, v, heading, speed);
}

Eigen::VectorXd Environment::start_episode(double u, double v, double heading, double speed) {
  state_ = VehicleState{};
  const Eigen::Vector2d p = track_->position_of(u, v);
  state_.x = p.x();
  state_.y = p.y();
  state_.heading = heading;
  state_.vx = speed;

  const auto pose = track_->project(state_.x, state_.y, state_.heading, u);
  if (!pose) throw std::runtime_error("environment: start position does not project onto track");
  pose_ = *pose;

  prev_action_ = Eigen::Vector2d::Zero();
  step_count_ = 0;
  stop_steps_ = 0;
  lap_crossings_ = 0;
  last_obs_ = build_observation(state_, *track_, pose_, prev_action_, setup_, norm_);
  return last_obs_;
}

Environment::StepResult Environment::step(const Eigen::Vector2d& action) {
  StepResult result;
  const CurvilinearPose prev_pose = pose_;

  const StepOutput out = apex::step(state_, setup_, params_, action);
  const Eigen::Vector2d action_delta = action - prev_action_;

  ++step_count_;
  result.info.truncated = false;

  if (!out.state.all_finite()) {
    // simulation blow-up: terminate with the penalty, keep the previous pose
    result.info.blown_up = true;
    result.reward.r_terminal = -weights_.offtrack_terminal_penalty;
    result.reward.total = result.reward.r_terminal;
    result.done = true;
    result.obs = last_obs_;
    result.info.pose = prev_pose;
    result.info.state = state_;
    result.info.breakdown = result.reward;
    result.info.lap_crossings = lap_crossings_;
    return result;
  }

  state_ = out.state;
  const auto projected = track_->project(state_.x, state_.y, state_.heading, prev_pose.u);

  bool off_track = false;
  if (!projected) {
    // beyond 3x track width: treat as leaving the track entirely
    off_track = true;
    pose_ = prev_pose;
  } else {
    pose_ = *projected;
    off_track = std::abs(pose_.e_norm) > episode_.offtrack_limit_e_norm;
  }

  // start/finish crossing bookkeeping
  if (projected) {
    const double du = track_->wrap_delta(pose_.u - prev_pose.u);
    if (du > 0.0 && pose_.u < prev_pose.u) ++lap_crossings_;
    if (du < 0.0 && pose_.u > prev_pose.u) --lap_crossings_;
  }

  const bool on_surface = std::abs(pose_.e_norm) <= 1.0;
  result.reward = compute_reward(prev_pose, pose_, state_.speed(), out.report, action_delta,
                                 weights_, *track_, on_surface, path_stats_);

  if (state_.speed() < episode_.stop_speed) {
    ++stop_steps_;
  } else {
    stop_steps_ = 0;
  }
  const bool stopped = stop_steps_ * kAgentPeriod >= episode_.stop_patience;
  const bool timeout = step_count_ >= episode_.max_steps;

  if (off_track || stopped) {
    result.reward.r_terminal = -weights_.offtrack_terminal_penalty;
    result.reward.total += result.reward.r_terminal;
    result.done = true;
  } else if (timeout) {
    result.done = true;
    result.info.truncated = true;
  }
  result.info.off_track = off_track;
  result.info.stopped = stopped;

  last_obs_ = build_observation(state_, *track_, pose_, action, setup_, norm_);
  prev_action_ = action;

  result.obs = last_obs_;
  result.info.pose = pose_;
  result.info.state = state_;
  result.info.breakdown = result.reward;
  result.info.lap_crossings = lap_crossings_;

  last_row_.t = step_count_ * kAgentPeriod;
  last_row_.setup_id = setup_.setup_id;
  last_row_.u = pose_.u;
  last_row_.v = pose_.v;
  last_row_.e_norm = pose_.e_norm;
  last_row_.x = state_.x;
  last_row_.y = state_.y;
  last_row_.heading = state_.heading;
  last_row_.vx = state_.vx;
  last_row_.vy = state_.vy;
  last_row_.yaw_rate = state_.yaw_rate;
  last_row_.steer = state_.steer_angle;
  last_row_.throttle = state_.throttle;
  last_row_.brake = state_.brake;
  last_row_.ax = state_.ax;
  last_row_.ay = state_.ay;
  last_row_.r_s = result.reward.r_s;
  last_row_.r_edge = result.reward.r_edge;
  last_row_.r_slip = result.reward.r_slip;
  last_row_.r_steer = result.reward.r_steer;
  last_row_.r_pedals = result.reward.r_pedals;
  last_row_.r_imi = result.reward.r_imi;
  last_row_.total = result.reward.total;
  last_row_.done = result.done ? 1 : 0;
  last_row_.a_steer = action[0];
  last_row_.a_long = action[1];

  return result;
}

}  // namespace apex
