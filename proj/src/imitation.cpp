#include "apex/imitation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "apex/speed_profile.hpp"
#include "json.hpp"

namespace apex {

void ImitationConfig::validate() const {
  if (lambda_imi < 0.0) throw std::runtime_error("imitation: lambda_imi must be >= 0");
  if (demo_mix_fraction < 0.0 || demo_mix_fraction > 0.5) {
    throw std::runtime_error(
        "imitation: demo_mix_fraction must lie in [0, 0.5]; larger ratios destabilize training");
  }
  if (imitation_batch_size < 1) throw std::runtime_error("imitation: batch size must be positive");
}

// ---------------------------------------------------------------------------
// Racing line

namespace {

// one pass of projected coordinate descent on the bending energy of the
// offset polygon; nodes are a strided subsample of the stations
void bending_sweeps(const std::vector<Eigen::Vector2d>& center,
                    const std::vector<Eigen::Vector2d>& normal, const std::vector<double>& lo,
                    const std::vector<double>& hi, std::vector<double>& e, int sweeps) {
  const int n = static_cast<int>(center.size());
  auto point = [&](int i) { return center[i] + e[i] * normal[i]; };
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (int i = 0; i < n; ++i) {
      // D_j = P_{j-1} - 2 P_j + P_{j+1} for j in {i-1, i, i+1}; e_i appears
      // with weights {1, -2, 1}
      double b_lin = 0.0;
      const double a_quad = 6.0;  // (1 + 4 + 1) * |n_i|^2
      for (int off = -1; off <= 1; ++off) {
        const int j = (i + off + n) % n;
        const int jm = (j - 1 + n) % n;
        const int jp = (j + 1) % n;
        Eigen::Vector2d d = point(jm) - 2.0 * point(j) + point(jp);
        const double w = (off == 0) ? -2.0 : 1.0;
        d -= w * e[i] * normal[i];  // remove e_i's own contribution
        b_lin += 2.0 * w * d.dot(normal[i]);
      }
      e[i] = std::clamp(-b_lin / (2.0 * a_quad), lo[i], hi[i]);
    }
  }
}

}  // namespace

RacingLine compute_racing_line(const TrackModel& track, const VehicleParams& params,
                               const VehicleSetup& setup, double edge_margin, int sweeps,
                               const std::vector<double>* extra_offset) {
  const auto& stations = track.stations();
  const int n = static_cast<int>(stations.size()) - 1;  // drop closing duplicate

  std::vector<Eigen::Vector2d> center(n);
  std::vector<Eigen::Vector2d> normal(n);
  std::vector<double> lo(n), hi(n), s(n);
  for (int i = 0; i < n; ++i) {
    s[i] = stations[i].s;
    center[i] = Eigen::Vector2d(stations[i].x, stations[i].y);
    const double h = stations[i].heading;
    normal[i] = Eigen::Vector2d(-std::sin(h), std::cos(h));
    hi[i] = std::max(stations[i].half_width_left - edge_margin, 0.0);
    lo[i] = -std::max(stations[i].half_width_right - edge_margin, 0.0);
  }

  // Coordinate descent on the biharmonic operator propagates information one
  // node per sweep, so solve coarse-to-fine: strided subsamples first, then
  // prolong and polish at full resolution.
  std::vector<double> e(n, 0.0);
  for (int stride : {16, 4, 1}) {
    if (stride >= n / 8) continue;
    const int m = (n + stride - 1) / stride;
    std::vector<Eigen::Vector2d> c_s(m), n_s(m);
    std::vector<double> lo_s(m), hi_s(m), e_s(m);
    for (int k = 0; k < m; ++k) {
      const int i = k * stride;
      c_s[k] = center[i];
      n_s[k] = normal[i];
      lo_s[k] = lo[i];
      hi_s[k] = hi[i];
      e_s[k] = e[i];
    }
    const int level_sweeps = (stride == 1) ? sweeps : 4 * sweeps;
    bending_sweeps(c_s, n_s, lo_s, hi_s, e_s, level_sweeps);
    // prolong back to full resolution by circular linear interpolation
    for (int i = 0; i < n; ++i) {
      const int k = i / stride;
      const int k1 = (k + 1) % m;
      const double span = (k1 == 0) ? (n - k * stride) : stride;
      const double f = (i - k * stride) / span;
      e[i] = std::clamp((1.0 - f) * e_s[k] + f * e_s[k1], lo[i], hi[i]);
    }
  }

  if (extra_offset != nullptr) {
    for (int i = 0; i < n; ++i) {
      e[i] = std::clamp(e[i] + (*extra_offset)[i], lo[i], hi[i]);
    }
  }

  RacingLine line;
  line.station_s = s;
  line.offset = e;
  line.points.resize(n);
  for (int i = 0; i < n; ++i) line.points[i] = center[i] + e[i] * normal[i];

  // arc length, heading and curvature of the offset polyline
  std::vector<double> seg_len(n);
  line.line_length = 0.0;
  for (int i = 0; i < n; ++i) {
    seg_len[i] = (line.points[(i + 1) % n] - line.points[i]).norm();
    line.line_length += seg_len[i];
  }
  line.heading.resize(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d d = line.points[(i + 1) % n] - line.points[(i - 1 + n) % n];
    line.heading[i] = std::atan2(d.y(), d.x());
  }
  line.curvature.resize(n);
  for (int i = 0; i < n; ++i) {
    const int im = (i - 1 + n) % n;
    const double dh = wrap_to_pi(line.heading[(i + 1) % n] - line.heading[im]);
    line.curvature[i] = dh / (seg_len[im] + seg_len[i]);
  }

  // speed profile along the line (line arc positions); the margin leaves the
  // controller room to track at the limit without washing out
  std::vector<double> line_s(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    line_s[i] = acc;
    acc += seg_len[i];
  }
  line.speed = quasi_steady_speed_profile(line_s, line.curvature, line.line_length, params, setup,
                                          0.90);
  return line;
}

namespace {

// station index for a centerline arc position
int station_index(const RacingLine& line, const TrackModel& track, double u) {
  const double uw = track.wrap(u);
  const int n = static_cast<int>(line.station_s.size());
  int lo = 0, hi = n - 1;
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    if (line.station_s[mid] <= uw) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return lo;
}

struct ExpertController {
  const RacingLine* line;
  const TrackModel* track;
  const VehicleParams* params;
  const VehicleSetup* setup;

  Eigen::Vector2d act(const VehicleState& state, const CurvilinearPose& pose) const {
    // exact steady-state steering for the previewed line curvature (brush
    // curve inverted per axle) plus feedback on the lateral and heading
    // errors relative to the line
    const int i0 = station_index(*line, *track, pose.u);
    const int ahead = station_index(*line, *track, pose.u + std::max(0.25 * state.vx, 4.0));
    const double kappa = line->curvature[ahead];
    const double a_lat = kappa * state.vx * state.vx;
    const double fmax_f = setup->mu_front_scale * params->base_mu * params->static_load_front();
    const double fmax_r = setup->mu_rear_scale * params->base_mu * params->static_load_rear();
    const double fyf = params->cg_to_rear_axle / params->wheelbase() * params->mass * a_lat;
    const double fyr = params->cg_to_front_axle / params->wheelbase() * params->mass * a_lat;
    const double sign = (kappa >= 0.0) ? 1.0 : -1.0;
    const double alpha_f =
        sign * brush_inverse(std::abs(fyf), params->cornering_stiffness_front, fmax_f);
    const double alpha_r =
        sign * brush_inverse(std::abs(fyr), params->cornering_stiffness_rear, fmax_r);
    const double steer_ff = params->wheelbase() * kappa + alpha_f - alpha_r;

    const Eigen::Vector2d pos(state.x, state.y);
    const double line_heading = line->heading[i0];
    const Eigen::Vector2d line_normal(-std::sin(line_heading), std::cos(line_heading));
    const double e_line = line_normal.dot(pos - line->points[i0]);
    const double heading_err = wrap_to_pi(state.heading - line_heading);

    // yaw damping catches the rear stepping out before the 10 Hz loop lags
    const double yaw_excess = state.yaw_rate - state.vx * kappa;
    const double steer =
        steer_ff - 0.035 * e_line - 0.55 * heading_err - 0.12 * yaw_excess;
    const double steer_cmd = std::clamp(steer / params->max_steer_angle, -1.0, 1.0);

    // speed target previews the profile so braking starts before the corner
    double v_target = line->speed[i0];
    const double preview = std::max(0.7 * state.vx, 5.0);
    const int steps = 7;
    const double mu_eff =
        params->base_mu * std::min(setup->mu_front_scale, setup->mu_rear_scale);
    for (int k = 1; k <= steps; ++k) {
      const int idx = station_index(*line, *track, pose.u + preview * k / steps);
      // braking anticipation: cap by what is reachable from the previewed speed
      const double d = preview * k / steps;
      const double v_prev = line->speed[idx];
      const double reachable =
          std::sqrt(v_prev * v_prev + 2.0 * 0.75 * mu_eff * kGravity * d);
      v_target = std::min(v_target, reachable);
    }

    const double err = v_target - state.vx;
    double long_cmd;
    if (err >= 0.0) {
      long_cmd = 0.5 * std::clamp(0.6 * err, 0.0, 1.0);  // 0.5 maps to full throttle
      // ease off the throttle when the lateral budget is nearly spent; the
      // drive force shares the rear friction ellipse with cornering
      const double lat_use = std::abs(state.ay) / (mu_eff * kGravity);
      long_cmd *= std::clamp((0.88 - lat_use) / 0.13, 0.0, 1.0);
    } else {
      long_cmd = -std::clamp(-0.35 * err, 0.0, 1.0);
    }
    return {steer_cmd, long_cmd};
  }
};

std::vector<double> smooth_lateral_noise(int n, const std::vector<double>& s, double total_length,
                                         double noise_scale, RngStream& rng) {
  std::vector<double> noise(n, 0.0);
  if (noise_scale <= 0.0) return noise;
  for (int k = 1; k <= 4; ++k) {
    const double amplitude = noise_scale * rng.uniform(0.5, 1.0) / k;
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    for (int i = 0; i < n; ++i) {
      noise[i] += amplitude * std::sin(2.0 * M_PI * k * s[i] / total_length + phase);
    }
  }
  return noise;
}

}  // namespace

DemoSet generate_demos(std::shared_ptr<const TrackModel> track, const VehicleSetup& setup,
                       const VehicleParams& params, const EpisodeConfig& episode,
                       const RewardWeights& weights, const NormTable& norm, int n_laps,
                       double noise_scale, RngStream& rng, double edge_margin) {
  DemoSet demos;
  demos.setup_id = setup.setup_id;
  demos.mu_front_scale = setup.mu_front_scale;
  demos.mu_rear_scale = setup.mu_rear_scale;
  demos.source = "scripted-expert";
  demos.track_name = track->name();
  demos.gen_q2 = weights.q2;

  const int n_stations = static_cast<int>(track->stations().size()) - 1;
  std::vector<double> station_s(n_stations);
  for (int i = 0; i < n_stations; ++i) station_s[i] = track->stations()[i].s;

  EpisodeConfig demo_episode = episode;
  demo_episode.max_steps = 1 << 20;  // the expert is not time-limited

  int attempts = 0;
  const int max_attempts = 3 * n_laps + 10;
  while (static_cast<int>(demos.laps.size()) < n_laps && attempts < max_attempts) {
    ++attempts;
    const std::vector<double> noise = smooth_lateral_noise(n_stations, station_s,
                                                           track->total_length(), noise_scale,
                                                           rng);

    const RacingLine line = compute_racing_line(*track, params, setup, edge_margin, 400, &noise);
    ExpertController ctl{&line, track.get(), &params, &setup};

    Environment env(track, params, demo_episode, weights, norm, 7 /*unused*/, nullptr, nullptr);
    env.set_setup(setup);
    env.reset_custom(0.0, line.offset[0], line.heading[0], line.speed[0]);

    DemoLap lap;
    bool valid = true;
    bool closed = false;
    const int step_cap = 1 << 16;
    for (int t = 0; t < step_cap; ++t) {
      const Eigen::Vector2d action = ctl.act(env.state(), env.pose());
      const auto result = env.step(action);
      if (std::abs(result.info.pose.e_norm) > 1.0 || result.done) {
        valid = false;
        break;
      }
      if (result.info.lap_crossings >= 1) {
        // lap closed; the crossing row opens the next lap's arc range and is
        // not recorded, so identical laps never double-cover a bin
        closed = true;
        break;
      }
      lap.rows.push_back(env.last_telemetry());
    }
    valid = valid && closed;
    if (valid && !lap.rows.empty()) {
      demos.laps.push_back(std::move(lap));
    }
  }
  if (static_cast<int>(demos.laps.size()) < n_laps) {
    throw std::runtime_error("scripted expert failed to complete the requested laps");
  }

  // calibration sweep over all rows
  for (const DemoLap& lap : demos.laps) {
    for (std::size_t i = 0; i < lap.rows.size(); ++i) {
      const TelemetryRow& row = lap.rows[i];
      demos.peak_steer_angle = std::max(demos.peak_steer_angle, std::abs(row.steer));
      demos.max_abs_e_norm = std::max(demos.max_abs_e_norm, std::abs(row.e_norm));
      if (i > 0) {
        const TelemetryRow& prev = lap.rows[i - 1];
        demos.max_steer_cmd_rate = std::max(
            demos.max_steer_cmd_rate, std::abs(row.a_steer - prev.a_steer) / kAgentPeriod);
        demos.max_pedal_cmd_rate = std::max(
            demos.max_pedal_cmd_rate, std::max(row.a_long - prev.a_long, 0.0) / kAgentPeriod);
      }
    }
  }
  return demos;
}

PathStatistics compute_path_stats(const std::vector<const DemoSet*>& sets, double total_length,
                                  double bin_width) {
  int total_laps = 0;
  for (const DemoSet* d : sets) total_laps += static_cast<int>(d->laps.size());
  if (total_laps < 2) {
    throw std::runtime_error("path statistics require at least 2 demonstration laps");
  }
  const int n_bins = static_cast<int>(std::ceil(total_length / bin_width));
  std::vector<double> sum(n_bins, 0.0), sum_sq(n_bins, 0.0);
  std::vector<int> count(n_bins, 0);

  for (const DemoSet* demos : sets) {
    for (const DemoLap& lap : demos->laps) {
      for (const TelemetryRow& row : lap.rows) {
        double uw = std::fmod(row.u, total_length);
        if (uw < 0.0) uw += total_length;
        int b = static_cast<int>(uw / bin_width);
        if (b >= n_bins) b = n_bins - 1;
        sum[b] += row.v;
        sum_sq[b] += row.v * row.v;
        ++count[b];
      }
    }
  }

  PathStatistics stats;
  stats.bin_width = bin_width;
  stats.total_length = total_length;
  stats.lap_count = total_laps;
  stats.mu.assign(n_bins, 0.0);
  stats.sigma.assign(n_bins, 0.0);
  for (int b = 0; b < n_bins; ++b) {
    if (count[b] > 0) {
      const double m = sum[b] / count[b];
      stats.mu[b] = m;
      stats.sigma[b] = std::sqrt(std::max(0.0, sum_sq[b] / count[b] - m * m));
    }
  }

  // fill empty bins by circular linear interpolation between populated ones
  for (int b = 0; b < n_bins; ++b) {
    if (count[b] > 0) continue;
    int prev = b, next = b;
    int back = 0, fwd = 0;
    do {
      prev = (prev - 1 + n_bins) % n_bins;
      ++back;
    } while (count[prev] == 0 && back < n_bins);
    do {
      next = (next + 1) % n_bins;
      ++fwd;
    } while (count[next] == 0 && fwd < n_bins);
    if (count[prev] == 0 || count[next] == 0) {
      throw std::runtime_error("path statistics: no populated bins");
    }
    const double f = static_cast<double>(back) / (back + fwd);
    stats.mu[b] = (1.0 - f) * stats.mu[prev] + f * stats.mu[next];
    stats.sigma[b] = (1.0 - f) * stats.sigma[prev] + f * stats.sigma[next];
  }
  return stats;
}

PathStatistics compute_path_stats(const DemoSet& demos, double total_length, double bin_width) {
  return compute_path_stats(std::vector<const DemoSet*>{&demos}, total_length, bin_width);
}

// ---------------------------------------------------------------------------
// Demo set IO

void write_demo_set(const std::string& dir, const DemoSet& demos) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["setup_id"] = demos.setup_id;
  manifest["mu_front_scale"] = demos.mu_front_scale;
  manifest["mu_rear_scale"] = demos.mu_rear_scale;
  manifest["source"] = demos.source;
  manifest["track_name"] = demos.track_name;
  manifest["max_steer_cmd_rate"] = demos.max_steer_cmd_rate;
  manifest["max_pedal_cmd_rate"] = demos.max_pedal_cmd_rate;
  manifest["peak_steer_angle"] = demos.peak_steer_angle;
  manifest["max_abs_e_norm"] = demos.max_abs_e_norm;
  manifest["gen_q2"] = demos.gen_q2;
  manifest["laps"] = nlohmann::json::array();
  for (std::size_t i = 0; i < demos.laps.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "lap_%02zu.csv", i);
    manifest["laps"].push_back(name);
    write_telemetry_csv(dir + "/" + name, demos.laps[i].rows, /*include_actions=*/true);
  }
  std::ofstream out(dir + "/manifest.json");
  if (!out) throw std::runtime_error("cannot write demo manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

DemoSet load_demo_set(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in) throw std::runtime_error("missing demo manifest in " + dir);
  nlohmann::json manifest;
  in >> manifest;

  DemoSet demos;
  demos.setup_id = manifest.at("setup_id").get<std::string>();
  demos.mu_front_scale = manifest.value("mu_front_scale", 1.0);
  demos.mu_rear_scale = manifest.value("mu_rear_scale", 1.0);
  demos.source = manifest.at("source").get<std::string>();
  demos.track_name = manifest.value("track_name", std::string());
  demos.max_steer_cmd_rate = manifest.at("max_steer_cmd_rate").get<double>();
  demos.max_pedal_cmd_rate = manifest.at("max_pedal_cmd_rate").get<double>();
  demos.peak_steer_angle = manifest.at("peak_steer_angle").get<double>();
  demos.max_abs_e_norm = manifest.value("max_abs_e_norm", 1.0);
  demos.gen_q2 = manifest.at("gen_q2").get<double>();
  for (const auto& lap_file : manifest.at("laps")) {
    DemoLap lap;
    lap.rows = read_telemetry_csv(dir + "/" + lap_file.get<std::string>());
    demos.laps.push_back(std::move(lap));
  }
  return demos;
}

// ---------------------------------------------------------------------------
// DemoBuffer

namespace {

struct DemoAccumulator {
  std::vector<Eigen::VectorXd> obs_list, next_list;
  std::vector<Eigen::Vector2d> act_list;
  std::vector<double> reward_list;
  std::vector<Eigen::VectorXd> hold_obs_list;
  std::vector<Eigen::Vector2d> hold_act_list;
};

void append_demo_set(DemoAccumulator& acc, const DemoSet& demos, const TrackModel& track,
                     const NormTable& norm, const RewardWeights& weights,
                     const PathStatistics* path_stats, int holdout_laps) {
  if (demos.laps.empty()) throw std::runtime_error("demo buffer: empty demo set");
  const int n_laps = static_cast<int>(demos.laps.size());
  const int n_train = std::max(1, n_laps - holdout_laps);

  VehicleSetup setup;
  setup.setup_id = demos.setup_id;
  setup.mu_front_scale = demos.mu_front_scale;
  setup.mu_rear_scale = demos.mu_rear_scale;

  auto obs_of_row = [&](const DemoLap& lap, std::size_t k) {
    const TelemetryRow& row = lap.rows[k];
    VehicleState state;
    state.x = row.x;
    state.y = row.y;
    state.heading = row.heading;
    state.vx = row.vx;
    state.vy = row.vy;
    state.yaw_rate = row.yaw_rate;
    state.steer_angle = row.steer;
    state.throttle = row.throttle;
    state.brake = row.brake;
    state.ax = row.ax;
    state.ay = row.ay;
    // yaw acceleration is not a telemetry column; finite-difference it
    if (k + 1 < lap.rows.size()) {
      state.yaw_accel = (lap.rows[k + 1].yaw_rate - row.yaw_rate) / kAgentPeriod;
    } else if (k > 0) {
      state.yaw_accel = (row.yaw_rate - lap.rows[k - 1].yaw_rate) / kAgentPeriod;
    }
    CurvilinearPose pose;
    pose.u = row.u;
    pose.v = row.v;
    pose.e_norm = row.e_norm;
    pose.heading_error = wrap_to_pi(row.heading - track.heading(row.u));
    const Eigen::Vector2d prev_action(row.a_steer, row.a_long);
    return build_observation(state, track, pose, prev_action, setup, norm);
  };

  for (int lap_idx = 0; lap_idx < n_laps; ++lap_idx) {
    const DemoLap& lap = demos.laps[lap_idx];
    const bool holdout = lap_idx >= n_train;
    for (std::size_t k = 0; k + 1 < lap.rows.size(); ++k) {
      const TelemetryRow& next_row = lap.rows[k + 1];
      const Eigen::Vector2d action(next_row.a_steer, next_row.a_long);
      if (holdout) {
        acc.hold_obs_list.push_back(obs_of_row(lap, k));
        acc.hold_act_list.push_back(action);
        continue;
      }
      const TelemetryRow& row = lap.rows[k];

      // rewards recomputed under the current weights
      RewardBreakdown r;
      const double du = track.wrap_delta(next_row.u - row.u);
      const bool on_surface = std::abs(next_row.e_norm) <= 1.0;
      const double speed = std::hypot(next_row.vx, next_row.vy);
      r.r_s = on_surface ? weights.progress_w * du : 0.0;
      if (std::abs(next_row.e_norm) > 1.0) {
        r.r_edge = -weights.q1 * std::abs(next_row.e_norm) * speed * speed;
      }
      // slip excesses are not telemetry columns; rescale the generated term
      r.r_slip = (demos.gen_q2 > 0.0) ? next_row.r_slip * (weights.q2 / demos.gen_q2) : 0.0;
      const double steer_rate = std::abs(next_row.a_steer - row.a_steer) / kAgentPeriod;
      r.r_steer =
          -weights.steer_rate_w * std::max(steer_rate - weights.steer_rate_threshold, 0.0);
      const double pedal_rate = (next_row.a_long - row.a_long) / kAgentPeriod;
      r.r_pedals =
          -weights.pedal_rate_w * std::max(pedal_rate - weights.pedal_rate_threshold, 0.0);
      if (path_stats != nullptr && weights.path_dev_w > 0.0) {
        r.r_imi = -weights.path_dev_w *
                  path_stats->deviation(next_row.u, next_row.v, weights.sigma_min);
      }
      r.total = r.r_s + r.r_edge + r.r_slip + r.r_steer + r.r_pedals + r.r_imi;

      acc.obs_list.push_back(obs_of_row(lap, k));
      acc.next_list.push_back(obs_of_row(lap, k + 1));
      acc.act_list.push_back(action);
      acc.reward_list.push_back(r.total);
    }
  }
}

}  // namespace

DemoBuffer::DemoBuffer(const std::vector<const DemoSet*>& sets, const TrackModel& track,
                       const VehicleParams& params, const NormTable& norm,
                       const RewardWeights& weights, const PathStatistics* path_stats,
                       int holdout_laps) {
  (void)params;
  DemoAccumulator acc;
  for (const DemoSet* demos : sets) {
    append_demo_set(acc, *demos, track, norm, weights, path_stats, holdout_laps);
  }
  const int n = static_cast<int>(acc.obs_list.size());
  obs_.resize(n, kObsDim);
  next_obs_.resize(n, kObsDim);
  act_.resize(n, kActDim);
  reward_.resize(n);
  for (int i = 0; i < n; ++i) {
    obs_.row(i) = acc.obs_list[i].transpose();
    next_obs_.row(i) = acc.next_list[i].transpose();
    act_.row(i) = acc.act_list[i].transpose();
    reward_[i] = acc.reward_list[i];
  }
  const int nh = static_cast<int>(acc.hold_obs_list.size());
  holdout_obs_.resize(nh, kObsDim);
  holdout_act_.resize(nh, kActDim);
  for (int i = 0; i < nh; ++i) {
    holdout_obs_.row(i) = acc.hold_obs_list[i].transpose();
    holdout_act_.row(i) = acc.hold_act_list[i].transpose();
  }
}

DemoBuffer::DemoBuffer(const DemoSet& demos, const TrackModel& track, const VehicleParams& params,
                       const NormTable& norm, const RewardWeights& weights,
                       const PathStatistics* path_stats, int holdout_laps)
    : DemoBuffer(std::vector<const DemoSet*>{&demos}, track, params, norm, weights, path_stats,
                 holdout_laps) {}

void DemoBuffer::sample_pairs(int n, RngStream& rng, Matrix& obs, Matrix& act) const {
  if (size() == 0) throw std::runtime_error("demo buffer: no transitions");
  obs.resize(n, obs_.cols());
  act.resize(n, act_.cols());
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<Eigen::Index>(rng.uniform_index(size()));
    obs.row(i) = obs_.row(idx);
    act.row(i) = act_.row(idx);
  }
}

void DemoBuffer::sample_into(Batch& batch, const std::vector<int>& rows, RngStream& rng) const {
  if (size() == 0) throw std::runtime_error("demo buffer: no transitions");
  for (int r : rows) {
    const auto idx = static_cast<Eigen::Index>(rng.uniform_index(size()));
    batch.obs.row(r) = obs_.row(idx);
    batch.next_obs.row(r) = next_obs_.row(idx);
    batch.action.row(r) = act_.row(idx);
    batch.reward[r] = reward_[idx];
    batch.done[r] = 0.0;  // demonstrations never terminate
  }
}

double imitation_loss(const PolicyNet& policy, const Matrix& demo_obs, const Matrix& demo_act,
                      PolicyGrads* grads, double weight) {
  PolicyForward fwd;
  policy_forward(policy, demo_obs, fwd);
  Matrix d_mean, d_logstd;
  const Eigen::VectorXd log_prob = policy_log_prob(fwd, demo_act, &d_mean, &d_logstd);
  const double j_imi = -log_prob.mean();
  if (grads != nullptr && weight != 0.0) {
    const double scale = -weight / static_cast<double>(demo_obs.rows());
    Matrix dm = scale * d_mean;
    Matrix dls = scale * d_logstd;
    for (Eigen::Index r = 0; r < dls.rows(); ++r) {
      for (Eigen::Index c = 0; c < dls.cols(); ++c) {
        const double raw = fwd.log_std_raw(r, c);
        if (raw <= kLogStdMin || raw >= kLogStdMax) dls(r, c) = 0.0;
      }
    }
    policy_backward(policy, fwd, dm, dls, *grads);
  }
  return j_imi;
}

void mix_batches(Batch& batch, const DemoBuffer& demos, double fraction, RngStream& rng) {
  const int n_demo = static_cast<int>(std::floor(fraction * batch.obs.rows()));
  if (n_demo <= 0) return;
  std::vector<int> rows(n_demo);
  for (int i = 0; i < n_demo; ++i) rows[i] = i;
  demos.sample_into(batch, rows, rng);
}

double policy_similarity(const PolicyNet& policy, const DemoBuffer& demos) {
  if (demos.holdout_size() == 0) return std::numeric_limits<double>::quiet_NaN();
  PolicyForward fwd;
  policy_forward(policy, demos.holdout_obs(), fwd);
  return policy_log_prob(fwd, demos.holdout_act()).mean();
}

}  // namespace apex
