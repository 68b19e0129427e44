#include "apex/evalkit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace apex {

std::vector<LapRecord> lap_split(const std::vector<TelemetryRow>& rows, const TrackModel& track,
                                 double valid_margin) {
  std::vector<LapRecord> laps;
  if (rows.size() < 2) return laps;
  const double total = track.total_length();

  // crossing times: forward wrap of u between consecutive rows, interpolated
  struct Crossing {
    int row;
    double time;
  };
  std::vector<Crossing> crossings;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double u_prev = rows[i - 1].u;
    const double u_new = rows[i].u;
    const double du = track.wrap_delta(u_new - u_prev);
    if (du > 0.0 && u_new < u_prev) {
      const double speed = std::hypot(rows[i].vx, rows[i].vy);
      if (speed <= 0.0) continue;
      const double frac = (total - u_prev) / (u_new + total - u_prev);
      crossings.push_back({static_cast<int>(i),
                           rows[i - 1].t + frac * (rows[i].t - rows[i - 1].t)});
    }
  }

  for (std::size_t c = 1; c < crossings.size(); ++c) {
    LapRecord lap;
    lap.setup_id = rows[static_cast<std::size_t>(crossings[c].row)].setup_id;
    lap.lap_time = crossings[c].time - crossings[c - 1].time;
    lap.start_row = crossings[c - 1].row;
    lap.end_row = crossings[c].row;
    lap.max_abs_e_norm = 0.0;
    for (int i = lap.start_row; i <= lap.end_row; ++i) {
      lap.max_abs_e_norm =
          std::max(lap.max_abs_e_norm, std::abs(rows[static_cast<std::size_t>(i)].e_norm));
    }
    lap.valid = lap.max_abs_e_norm <= 1.0 + valid_margin && lap.lap_time > 0.0;
    laps.push_back(lap);
  }
  return laps;
}

std::optional<double> brake_point(const std::vector<TelemetryRow>& rows, double u1, double u2,
                                  double threshold) {
  bool saw_full_throttle = false;
  for (const TelemetryRow& row : rows) {
    const bool in_window = (u1 <= u2) ? (row.u >= u1 && row.u <= u2)
                                      : (row.u >= u1 || row.u <= u2);  // wrapped window
    if (!in_window) {
      saw_full_throttle = false;
      continue;
    }
    if (row.throttle >= 0.9) saw_full_throttle = true;
    if (saw_full_throttle && row.brake > threshold) return row.u;
  }
  return std::nullopt;
}

LinearFit linear_fit(const std::vector<Eigen::Vector3d>& points) {
  const int n = static_cast<int>(points.size());
  if (n < 3) throw std::runtime_error("linear_fit: need at least 3 points");

  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = points[static_cast<std::size_t>(i)][0];
    x(i, 2) = points[static_cast<std::size_t>(i)][1];
    y[i] = points[static_cast<std::size_t>(i)][2];
  }
  const Eigen::MatrixXd xtx = x.transpose() * x;
  const Eigen::VectorXd xty = x.transpose() * y;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(xtx);
  lu.setThreshold(1e-10);
  if (lu.rank() < 3) throw std::runtime_error("linear_fit: rank-deficient design matrix");
  const Eigen::VectorXd c = lu.solve(xty);

  LinearFit fit;
  fit.c0 = c[0];
  fit.c1 = c[1];
  fit.c2 = c[2];
  const Eigen::VectorXd resid = y - x * c;
  fit.mae = resid.array().abs().mean();
  const double ss_res = resid.squaredNorm();
  const double ss_tot = (y.array() - y.mean()).square().sum();
  fit.r2 = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

RolloutResult rollout_policy(Environment& env, const PolicyNet& policy,
                             const RolloutOptions& options) {
  RolloutResult result;
  RngStream rng(options.seed + 17);
  Eigen::VectorXd obs = env.reset_fixed(options.start_u);

  for (int t = 0; t < options.max_steps; ++t) {
    const auto [action, logp] = policy_sample(policy, obs, rng, options.deterministic);
    const auto step = env.step(action);
    result.rows.push_back(env.last_telemetry());
    result.total_reward += step.reward.total;
    result.laps_completed = step.info.lap_crossings;
    obs = step.obs;
    if (step.done) {
      result.terminated_early = !step.info.truncated;
      break;
    }
    if (options.stop_after_laps > 0 && step.info.lap_crossings >= options.stop_after_laps) break;
  }
  return result;
}

namespace {

double nan_safe_mean(const std::vector<double>& values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(values.begin(), values.end(), 0.0) / values.size();
}

}  // namespace

EvalReport evaluate(const PolicyNet& policy, const EnvSpec& spec,
                    const std::vector<VehicleSetup>& setups, const EvalOptions& options,
                    const DemoBuffer* demos, const PathStatistics* stats) {
  EvalReport report;
  report.stochastic = options.stochastic;

  std::vector<double> best_laps;
  for (const VehicleSetup& setup : setups) {
    Environment env(spec.track, spec.vehicle, spec.episode, spec.weights, spec.norm,
                    options.seed, nullptr, spec.path_stats);
    env.set_setup(setup);

    RolloutOptions ro;
    ro.start_u = options.start_u;
    ro.deterministic = !options.stochastic;
    ro.seed = options.seed;
    ro.stop_after_laps = options.n_laps + 1;
    ro.max_steps = (options.n_laps + 2) * spec.episode.max_steps;
    const RolloutResult rollout = rollout_policy(env, policy, ro);

    SetupEval ev;
    ev.setup_id = setup.setup_id;
    ev.completed = rollout.laps_completed >= 1;

    const auto laps = lap_split(rollout.rows, *spec.track, options.valid_margin);
    std::vector<double> valid_times;
    for (const LapRecord& lap : laps) {
      if (lap.valid) valid_times.push_back(lap.lap_time);
    }
    ev.laps_completed = static_cast<int>(laps.size());
    ev.laps_valid = static_cast<int>(valid_times.size());
    if (!valid_times.empty()) {
      ev.best_lap = *std::min_element(valid_times.begin(), valid_times.end());
      ev.avg_lap = nan_safe_mean(valid_times);
      best_laps.push_back(ev.best_lap);
    }

    double window_reward = 0.0;
    const int window = std::min<int>(spec.episode.max_steps, rollout.rows.size());
    for (int i = 0; i < window; ++i) window_reward += rollout.rows[static_cast<std::size_t>(i)].total;
    ev.avg_reward = window_reward;

    if (stats != nullptr && !laps.empty()) {
      // per-lap sum of the deviation kernel, averaged over complete laps
      double sum = 0.0;
      int count = 0;
      for (const LapRecord& lap : laps) {
        double lap_sum = 0.0;
        for (int i = lap.start_row; i < lap.end_row; ++i) {
          const TelemetryRow& row = rollout.rows[static_cast<std::size_t>(i)];
          lap_sum += stats->deviation(row.u, row.v, spec.weights.sigma_min);
        }
        sum += lap_sum;
        ++count;
      }
      if (count > 0) ev.path_deviation = sum / count;
    }

    if (options.write_telemetry) {
      std::filesystem::create_directories(options.telemetry_dir);
      const std::string name = options.telemetry_dir + "/" + options.telemetry_prefix +
                               setup.setup_id + ".csv";
      write_telemetry_csv(name, rollout.rows, /*include_actions=*/true);
    }

    report.setups.push_back(std::move(ev));
  }

  if (!best_laps.empty()) report.mean_best_lap = nan_safe_mean(best_laps);
  if (demos != nullptr && demos->holdout_size() > 0) {
    report.policy_similarity = policy_similarity(policy, *demos);
  }
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::json doc;
  doc["stochastic"] = stochastic;
  if (std::isfinite(policy_similarity)) doc["policy_similarity"] = policy_similarity;
  if (std::isfinite(mean_best_lap)) doc["mean_best_lap"] = mean_best_lap;
  doc["setups"] = nlohmann::json::array();
  for (const SetupEval& ev : setups) {
    nlohmann::json js;
    js["setup_id"] = ev.setup_id;
    js["completed"] = ev.completed;
    js["laps_completed"] = ev.laps_completed;
    js["laps_valid"] = ev.laps_valid;
    js["avg_reward"] = ev.avg_reward;
    if (std::isfinite(ev.best_lap)) js["best_lap"] = ev.best_lap;
    if (std::isfinite(ev.avg_lap)) js["avg_lap"] = ev.avg_lap;
    if (std::isfinite(ev.path_deviation)) js["path_deviation"] = ev.path_deviation;
    doc["setups"].push_back(js);
  }
  return doc.dump(2);
}

void EvalReport::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "setup_id,best_lap,avg_lap,laps_valid,completed,avg_reward,path_deviation,policy_similarity\n";
  for (const SetupEval& ev : setups) {
    out << ev.setup_id << ',' << ev.best_lap << ',' << ev.avg_lap << ',' << ev.laps_valid << ','
        << (ev.completed ? 1 : 0) << ',' << ev.avg_reward << ',' << ev.path_deviation << ','
        << policy_similarity << "\n";
  }
}

VehicleSetup hull_setup(const std::vector<VehicleSetup>& vertices,
                        const std::vector<double>& weights) {
  if (vertices.size() != weights.size() || vertices.empty()) {
    throw std::runtime_error("hull_setup: weight/vertex mismatch");
  }
  VehicleSetup s;
  s.mu_front_scale = 0.0;
  s.mu_rear_scale = 0.0;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    s.mu_front_scale += weights[i] * vertices[i].mu_front_scale;
    s.mu_rear_scale += weights[i] * vertices[i].mu_rear_scale;
  }
  s.setup_id = "hull_sample";
  return s;
}

SweepResult sweep_unseen(const PolicyNet& policy, const EnvSpec& spec,
                         const std::vector<VehicleSetup>& training_setups, int n, RngStream& rng) {
  if (training_setups.size() < 3) {
    throw std::runtime_error("sweep: need at least 3 training setups to span a hull");
  }
  SweepResult result;

  for (int k = 0; k < n; ++k) {
    // Dirichlet(1,...,1) weights via normalized exponentials
    std::vector<double> w(training_setups.size());
    double sum = 0.0;
    for (double& wi : w) {
      double u = rng.uniform();
      while (u <= 0.0) u = rng.uniform();
      wi = -std::log(u);
      sum += wi;
    }
    for (double& wi : w) wi /= sum;

    VehicleSetup setup = hull_setup(training_setups, w);
    setup.setup_id = "sweep_" + std::to_string(k);

    Environment env(spec.track, spec.vehicle, spec.episode, spec.weights, spec.norm, 31, nullptr,
                    nullptr);
    env.set_setup(setup);
    RolloutOptions ro;
    ro.deterministic = true;
    ro.stop_after_laps = 1;
    ro.max_steps = 3 * spec.episode.max_steps;
    const RolloutResult rollout = rollout_policy(env, policy, ro);

    SweepSample sample;
    sample.mu_front = setup.mu_front_scale;
    sample.mu_rear = setup.mu_rear_scale;
    // the rollout starts exactly on the line, so the first forward crossing
    // closes one full lap; interpolate its time inside the step
    const double total = spec.track->total_length();
    for (std::size_t i = 1; i < rollout.rows.size(); ++i) {
      const double u_prev = rollout.rows[i - 1].u;
      const double u_new = rollout.rows[i].u;
      const double du = spec.track->wrap_delta(u_new - u_prev);
      if (du > 0.0 && u_new < u_prev) {
        const double frac = (total - u_prev) / (u_new + total - u_prev);
        sample.lap_time =
            rollout.rows[i - 1].t + frac * (rollout.rows[i].t - rollout.rows[i - 1].t);
        sample.completed = true;
        break;
      }
    }
    if (sample.completed) ++result.completed;
    result.samples.push_back(sample);
  }

  std::vector<Eigen::Vector3d> pts;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const SweepSample& s : result.samples) {
    if (!s.completed) continue;
    pts.emplace_back(s.mu_front, s.mu_rear, s.lap_time);
    lo = std::min(lo, s.lap_time);
    hi = std::max(hi, s.lap_time);
  }
  if (pts.size() >= 3) {
    result.fit = linear_fit(pts);
    result.lap_time_range = hi - lo;
  }
  return result;
}

std::string SweepResult::to_json() const {
  nlohmann::json doc;
  doc["completed"] = completed;
  doc["n"] = samples.size();
  doc["fit"] = {{"c0", fit.c0}, {"c1", fit.c1}, {"c2", fit.c2}, {"mae", fit.mae}, {"r2", fit.r2}};
  doc["lap_time_range"] = lap_time_range;
  return doc.dump(2);
}

void SweepResult::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "mu_front_scale,mu_rear_scale,lap_time,completed\n";
  for (const SweepSample& s : samples) {
    out << s.mu_front << ',' << s.mu_rear << ',' << s.lap_time << ',' << (s.completed ? 1 : 0)
        << "\n";
  }
}

}  // namespace apex
