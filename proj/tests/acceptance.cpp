// Acceptance suite: one pass/fail line per criterion.
//
// Fast criteria (1-3) run in seconds. The remaining criteria need trained
// policies; the suite trains any missing run into the acceptance directory
// (env APEX_ACCEPT_DIR, default ./acceptance_runs), so a cold start performs
// desk-scale training for every experiment variant and takes hours, while
// re-runs reuse the cached checkpoints and finish in minutes.

#include <malloc.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "apex/csv.hpp"
#include "apex/evalkit.hpp"
#include "apex/experiment.hpp"

using namespace apex;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;
int g_checks = 0;

void report(int criterion, const std::string& name, bool pass, const std::string& detail) {
  ++g_checks;
  if (!pass) ++g_failures;
  std::printf("CRITERION %d %-34s %s  %s\n", criterion, name.c_str(),
              pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

void note(const std::string& text) {
  std::printf("    %s\n", text.c_str());
  std::fflush(stdout);
}

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
  return buf;
}

// ---------------------------------------------------------------------------
// fixtures

VehicleParams gt_params() {
  VehicleParams p;
  p.mass = 1300.0;
  p.yaw_inertia = 1700.0;
  p.cg_to_front_axle = 1.30;
  p.cg_to_rear_axle = 1.40;
  p.base_mu = 1.4;
  p.cornering_stiffness_front = 230000.0;
  p.cornering_stiffness_rear = 250000.0;
  p.peak_slip_front = 0.121;
  p.peak_slip_rear = 0.104;
  p.max_engine_power = 375000.0;
  p.max_drive_force = 10000.0;
  p.max_brake_force = 18000.0;
  p.max_steer_angle = 0.30;
  p.steer_rate_limit = 1.0;
  p.drag_coeff = 1.1;
  p.rolling_resist = 300.0;
  return p;
}

std::shared_ptr<TrackModel> small_oval() {
  std::vector<Eigen::Vector2d> pts;
  std::vector<double> hwl, hwr;
  const double straight = 186.0, radius = 100.0;
  const double perimeter = 2.0 * straight + 2.0 * M_PI * radius;
  const int n = static_cast<int>(std::ceil(perimeter / 2.0));
  for (int i = 0; i < n; ++i) {
    const double s = perimeter * i / n;
    double x, y;
    if (s < straight) {
      x = s;
      y = 0.0;
    } else if (s < straight + M_PI * radius) {
      const double a = (s - straight) / radius;
      x = straight + radius * std::sin(a);
      y = radius * (1.0 - std::cos(a));
    } else if (s < 2.0 * straight + M_PI * radius) {
      x = straight - (s - straight - M_PI * radius);
      y = 2.0 * radius;
    } else {
      const double a = (s - 2.0 * straight - M_PI * radius) / radius;
      x = -radius * std::sin(a);
      y = 2.0 * radius - radius * (1.0 - std::cos(a));
    }
    pts.emplace_back(x, y);
    hwl.push_back(6.0);
    hwr.push_back(6.0);
  }
  return std::make_shared<TrackModel>(TrackModel::from_points("oval", pts, hwl, hwr));
}

// ---------------------------------------------------------------------------
// criterion 1: reward-engine exactness

bool reward_engine_exact() {
  auto track = small_oval();
  RewardWeights w;
  w.progress_w = 1.0;
  w.q1 = 1.0;
  w.q2 = 1.5;
  w.path_dev_w = 0.1;
  w.sigma_min = 1.0;
  w.steer_rate_threshold = 4.0;
  w.pedal_rate_threshold = 4.0;
  TireReport quiet;
  bool ok = true;

  CurvilinearPose prev, next;
  prev.u = 100.0;

  // progress substitution
  next.u = 104.2;
  next.e_norm = 0.2;
  auto r = compute_reward(prev, next, 30.0, quiet, {0.0, 0.0}, w, *track, true, nullptr);
  ok = ok && std::abs(r.total - 4.2) < 1e-9;

  // edge substitution
  next.u = 100.0;
  next.e_norm = 1.5;
  r = compute_reward(prev, next, 20.0, quiet, {0.0, 0.0}, w, *track, false, nullptr);
  ok = ok && std::abs(r.r_edge - (-600.0)) < 1e-9;

  // slip substitution
  next.e_norm = 0.0;
  TireReport slipping;
  slipping.alpha_front_excess = 0.02;
  r = compute_reward(prev, next, 40.0, slipping, {0.0, 0.0}, w, *track, true, nullptr);
  ok = ok && std::abs(r.r_slip - (-1.2)) < 1e-9;

  // path-deviation substitution (sigma below the floor)
  PathStatistics stats;
  stats.bin_width = 1.0;
  stats.total_length = track->total_length();
  const int n_bins = static_cast<int>(std::ceil(stats.total_length));
  stats.mu.assign(n_bins, 0.0);
  stats.sigma.assign(n_bins, 0.5);
  stats.lap_count = 2;
  next.v = 2.0;
  r = compute_reward(prev, next, 30.0, quiet, {0.0, 0.0}, w, *track, true, &stats);
  ok = ok && std::abs(r.r_imi - (-0.4)) < 1e-9;
  next.v = 0.0;
  r = compute_reward(prev, next, 30.0, quiet, {0.0, 0.0}, w, *track, true, &stats);
  ok = ok && std::abs(r.r_imi) < 1e-12;

  // full clean lap: progress telescopes to the track length
  EpisodeConfig episode;
  episode.max_steps = 4000;
  Environment env(track, gt_params(), episode, w, NormTable{}, 13, nullptr, nullptr);
  env.reset_fixed(0.0);
  const double u0 = env.pose().u;
  double sum_rs = 0.0, u_end = u0;
  bool lapped = false;
  for (int i = 0; i < 3000 && !lapped; ++i) {
    const double steer =
        std::clamp(-0.8 * env.pose().e_norm - 2.0 * env.pose().heading_error, -1.0, 1.0);
    const double long_cmd = std::clamp(0.25 * (18.0 - env.state().vx), -1.0, 0.5);
    const auto step = env.step({steer, long_cmd});
    if (step.done) return false;
    sum_rs += step.reward.r_s;
    if (step.info.lap_crossings >= 1) {
      u_end = step.info.pose.u;
      lapped = true;
    }
  }
  const double overshoot = track->wrap_delta(u_end - u0);
  ok = ok && lapped && std::abs(sum_rs - overshoot - track->total_length()) < 1e-6;
  return ok;
}

// ---------------------------------------------------------------------------
// criterion 2: numerical kernels

bool quantile_loss_vs_bruteforce() {
  RngStream rng(23);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 1 + rng.uniform_int(8);
    const int m = 1 + rng.uniform_int(8);
    const double kappa = (rep % 4 == 0) ? 1.0 : rng.uniform(0.5, 2.0);
    Eigen::VectorXd pred(n), targ(m);
    for (int i = 0; i < n; ++i) pred[i] = 2.0 * rng.normal();
    for (int j = 0; j < m; ++j) targ[j] = 2.0 * rng.normal();

    double expected = 0.0;
    for (int i = 0; i < n; ++i) {
      const double tau = (2.0 * i + 1.0) / (2.0 * n);
      for (int j = 0; j < m; ++j) {
        const double u = targ[j] - pred[i];
        const double huber =
            (std::abs(u) <= kappa) ? 0.5 * u * u : kappa * (std::abs(u) - 0.5 * kappa);
        expected += std::abs(tau - (u < 0.0 ? 1.0 : 0.0)) * huber / kappa;
      }
    }
    expected /= n * m;
    if (std::abs(quantile_huber_loss(pred, targ, kappa) - expected) > 1e-9) return false;
  }
  return true;
}

bool gradients_match_finite_differences() {
  RngStream rng(29);
  const int obs_dim = 5, act_dim = 2, n_q = 4, batch = 4;
  const double h = 1e-5, tol = 1e-4;

  auto check = [&](const std::vector<Matrix*>& params, const std::vector<Matrix*>& grads,
                   const std::function<double()>& loss) {
    for (std::size_t t = 0; t < params.size(); ++t) {
      Matrix& p = *params[t];
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double saved = p.data()[i];
        p.data()[i] = saved + h;
        const double up = loss();
        p.data()[i] = saved - h;
        const double down = loss();
        p.data()[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        const double an = grads[t]->data()[i];
        if (std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}) > tol) return false;
      }
    }
    return true;
  };

  // critic quantile loss
  CriticNet critic = CriticNet::create(obs_dim, act_dim, 8, 2, n_q, rng);
  Matrix obs = Matrix::NullaryExpr(batch, obs_dim, [&]() { return rng.normal(); });
  Matrix act = Matrix::NullaryExpr(batch, act_dim, [&]() { return 0.5 * rng.normal(); });
  Matrix targets = Matrix::NullaryExpr(batch, n_q, [&]() { return 2.0 * rng.normal(); });
  auto critic_loss = [&]() {
    CriticForward fwd;
    critic_forward(critic, obs, act, fwd);
    return quantile_huber_loss_batch(fwd.quantiles, targets, 1.0, nullptr);
  };
  CriticForward fwd;
  critic_forward(critic, obs, act, fwd);
  Matrix d_pred;
  quantile_huber_loss_batch(fwd.quantiles, targets, 1.0, &d_pred);
  CriticGrads cg = zeros_like(critic);
  critic_backward(critic, fwd, d_pred, &cg);
  if (!check(flatten(critic), flatten(cg), critic_loss)) return false;

  // policy objective through frozen critics plus the imitation composite
  PolicyNet policy = PolicyNet::create(obs_dim, act_dim, 8, 2, rng);
  for (Matrix* p : flatten(policy)) {
    *p += Matrix::NullaryExpr(p->rows(), p->cols(), [&]() { return 0.1 * rng.normal(); });
  }
  CriticNet c2 = CriticNet::create(obs_dim, act_dim, 8, 2, n_q, rng);
  Matrix eps = Matrix::NullaryExpr(batch, act_dim, [&]() { return rng.normal(); });
  Matrix dobs = Matrix::NullaryExpr(batch, obs_dim, [&]() { return rng.normal(); });
  Matrix dact =
      Matrix::NullaryExpr(batch, act_dim, [&]() { return 0.5 * rng.normal(); }).array().tanh();
  const double lambda = 10.0;
  auto policy_loss = [&]() {
    return policy_objective(policy, critic, c2, obs, eps, 0.2, nullptr) +
           lambda * imitation_loss(policy, dobs, dact, nullptr, 0.0);
  };
  PolicyGrads pg = zeros_like(policy);
  policy_objective(policy, critic, c2, obs, eps, 0.2, &pg);
  imitation_loss(policy, dobs, dact, &pg, lambda);
  return check(flatten(policy), flatten(pg), policy_loss);
}

bool checkpoint_bit_exact() {
  RngStream rng(53);
  TrainerConfig cfg;
  cfg.hidden_width = 16;
  cfg.hidden_layers = 2;
  cfg.quantiles = 8;
  Networks nets = Networks::create(10, 2, cfg, rng);
  Checkpoint ckpt = pack_networks(nets, NormTable{}, cfg);
  ckpt.config_hash = 0x1234abcdULL;
  const std::string p1 = "/tmp/apex_accept_ckpt_a.bin";
  const std::string p2 = "/tmp/apex_accept_ckpt_b.bin";
  save_checkpoint(p1, ckpt);
  save_checkpoint(p2, load_checkpoint(p1));
  std::ifstream a(p1, std::ios::binary), b(p2, std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  return !sa.empty() && sa == sb;
}

// ---------------------------------------------------------------------------
// criterion 3: dynamics oracles

bool dynamics_oracles() {
  const VehicleParams p = gt_params();
  const VehicleSetup base;
  bool ok = true;

  // steady-state yaw rate vs the linear bicycle closed form
  {
    const double steer_cmd = 0.02 / p.max_steer_angle;
    VehicleState s;
    s.vx = 20.0;
    for (int i = 0; i < 200; ++i) {
      const double long_cmd = std::clamp(0.5 * (20.0 - s.vx), -1.0, 1.0) * 0.5;
      s = step(s, base, p, {steer_cmd, long_cmd}).state;
    }
    const double expected = s.vx * 0.02 / (p.wheelbase() + p.understeer_gradient() * s.vx * s.vx);
    ok = ok && std::abs(s.yaw_rate - expected) / expected < 0.02;
  }

  // step halving
  {
    VehicleState a, b;
    a.vx = b.vx = 25.0;
    for (int i = 0; i < 30; ++i) a = step(a, base, p, {0.3, 0.2}, 0.1, 20).state;
    for (int i = 0; i < 30; ++i) b = step(b, base, p, {0.3, 0.2}, 0.1, 40).state;
    const double scale = std::max({std::abs(b.x), std::abs(b.y), 1.0});
    ok = ok && std::abs(a.x - b.x) / scale < 1e-3 && std::abs(a.y - b.y) / scale < 1e-3 &&
         std::abs(a.vx - b.vx) / std::max(b.vx, 1.0) < 1e-3;
  }

  // exact grip scaling at deep slip
  {
    VehicleState s;
    s.vx = 30.0;
    s.steer_angle = 0.5;
    VehicleSetup reduced;
    reduced.mu_front_scale = 0.9;
    const AxleForces f1 = tire_forces(s, base, p, 0.0, 0.0);
    const AxleForces f2 = tire_forces(s, reduced, p, 0.0, 0.0);
    ok = ok && std::abs(f2.fy_front / f1.fy_front - 0.9) < 1e-12;
  }
  return ok;
}

// ---------------------------------------------------------------------------
// heavy section: trained-policy criteria

struct RunHandle {
  std::string dir;
  ExperimentConfig cfg;
};

struct Harness {
  std::string root;
  ExperimentConfig base_cfg;
  ExperimentAssets assets;

  RunHandle ensure_run(const std::string& name, Variant variant, Algorithm algo,
                       std::uint64_t seed, const std::vector<std::string>& setups = {}) {
    ExperimentConfig cfg = base_cfg;
    cfg.apply_variant(variant);
    cfg.trainer.algorithm = algo;
    if (!setups.empty()) cfg = restrict_setups(cfg, setups);

    RunHandle handle;
    handle.dir = root + "/runs/" + name;
    handle.cfg = cfg;

    const fs::path done = fs::path(handle.dir) / "complete.txt";
    if (fs::exists(done) && fs::exists(fs::path(handle.dir) / "best.bin")) {
      return handle;
    }
    std::printf("    [training %s: %lld iterations, this takes a while]\n", name.c_str(),
                static_cast<long long>(cfg.trainer.total_iterations));
    std::fflush(stdout);
    const TrainOutcome outcome = run_training(cfg, assets, seed, handle.dir);
    std::ofstream marker(done);
    marker << outcome.summary.env_steps << "\n";
    return handle;
  }

  // best valid lap per setup across all in-training evaluation snapshots
  std::vector<double> best_laps_from_curves(const RunHandle& run) const {
    const CsvTable curves = read_csv(run.dir + "/curves.csv");
    std::vector<double> best(run.cfg.setups.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t s = 0; s < run.cfg.setups.size(); ++s) {
      const int col = curves.column_index("lap_" + run.cfg.setups[s].setup_id);
      if (col < 0) continue;
      for (const auto& row : curves.rows) {
        const double v = row[static_cast<std::size_t>(col)];
        if (std::isfinite(v) && (!std::isfinite(best[s]) || v < best[s])) best[s] = v;
      }
    }
    return best;
  }

  double final_eval_reward(const RunHandle& run, int tail = 3) const {
    const CsvTable curves = read_csv(run.dir + "/curves.csv");
    const int col = curves.column_index("eval_reward");
    if (col < 0 || curves.rows.empty()) return std::numeric_limits<double>::quiet_NaN();
    double acc = 0.0;
    int count = 0;
    for (int i = static_cast<int>(curves.rows.size()) - 1; i >= 0 && count < tail; --i, ++count) {
      acc += curves.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(col)];
    }
    return acc / std::max(count, 1);
  }

  Networks load_best(const RunHandle& run) const {
    return unpack_networks(load_checkpoint(run.dir + "/best.bin"));
  }

  EvalReport evaluate_run(const RunHandle& run, bool stochastic, int n_laps,
                          const DemoBuffer* demos, const PathStatistics* stats,
                          const std::string& telemetry_dir = "") const {
    const Networks nets = load_best(run);
    EvalOptions options;
    options.n_laps = n_laps;
    options.stochastic = stochastic;
    options.seed = 5;
    options.valid_margin = base_cfg.eval.lap_valid_margin;
    if (!telemetry_dir.empty()) {
      options.write_telemetry = true;
      options.telemetry_dir = telemetry_dir;
      options.telemetry_prefix = "";
    }
    return evaluate(nets.policy, make_env_spec(run.cfg, assets), base_cfg.setups, options, demos,
                    stats);
  }
};

double lap_or_inf(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::infinity(); }

double mean_avg_lap(const EvalReport& report) {
  double acc = 0.0;
  int n = 0;
  for (const SetupEval& ev : report.setups) {
    acc += lap_or_inf(ev.avg_lap);
    ++n;
  }
  return acc / std::max(n, 1);
}

double mean_path_dev(const EvalReport& report) {
  double acc = 0.0;
  int n = 0;
  for (const SetupEval& ev : report.setups) {
    if (std::isfinite(ev.path_deviation)) {
      acc += ev.path_deviation;
      ++n;
    }
  }
  return n > 0 ? acc / n : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

int main() {
  mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);

  std::printf("== fast criteria ==\n");
  report(1, "reward-engine exactness", reward_engine_exact(), "substitutions at 1e-9, lap sum at 1e-6");
  report(2, "quantile loss vs brute force", quantile_loss_vs_bruteforce(), "100 random cases at 1e-9");
  report(2, "gradients vs finite differences", gradients_match_finite_differences(),
         "relative 1e-4, h=1e-5");
  report(2, "checkpoint round trip", checkpoint_bit_exact(), "byte-identical re-save");
  report(3, "dynamics oracles", dynamics_oracles(),
         "yaw-rate closed form 2%, step halving 1e-3, exact grip scaling");

  std::printf("== trained-policy criteria ==\n");
  Harness h;
  const char* env_dir = std::getenv("APEX_ACCEPT_DIR");
  h.root = env_dir ? env_dir : "acceptance_runs";
  fs::create_directories(h.root);

  const std::string config_path = std::string(APEX_ASSET_DIR) + "/configs/desk.json";
  h.base_cfg = load_config(config_path);

  // demonstrations (generated once; used for thresholds, stats and metrics)
  const std::string demo_dir = h.root + "/demos";
  {
    ExperimentAssets probe = load_assets(h.base_cfg, fs::path(config_path).parent_path().string(),
                                         demo_dir);
    if (!probe.has_demos) {
      std::printf("    [generating demonstrations into %s]\n", demo_dir.c_str());
      std::fflush(stdout);
      generate_demo_dirs(h.base_cfg, *probe.track, demo_dir, 12, 0.35, 2024);
      probe = load_assets(h.base_cfg, fs::path(config_path).parent_path().string(), demo_dir);
    }
    h.assets = std::move(probe);
  }

  // the nine desk-scale runs
  const RunHandle rl_a = h.ensure_run("pure_rl_seed11", Variant::PureRl, Algorithm::DSAC, 11);
  const RunHandle rl_b = h.ensure_run("pure_rl_seed12", Variant::PureRl, Algorithm::DSAC, 12);
  const RunHandle single_a =
      h.ensure_run("single_baseline_seed11", Variant::PureRl, Algorithm::DSAC, 11, {"baseline"});
  const RunHandle sac_a = h.ensure_run("sac_seed11", Variant::PureRl, Algorithm::SAC, 11);
  const RunHandle sac_b = h.ensure_run("sac_seed12", Variant::PureRl, Algorithm::SAC, 12);
  const RunHandle shared_a =
      h.ensure_run("shared_and_reg_seed11", Variant::SharedAndReg, Algorithm::DSAC, 11);
  const RunHandle reg_a = h.ensure_run("reg_only_seed11", Variant::RegOnly, Algorithm::DSAC, 11);
  const RunHandle aug_a =
      h.ensure_run("augmented_only_seed11", Variant::AugmentedOnly, Algorithm::DSAC, 11);
  const RunHandle augreg_a =
      h.ensure_run("augmented_and_reg_seed11", Variant::AugmentedAndReg, Algorithm::DSAC, 11);

  // ---- criterion 4: setup ordering per seed
  {
    bool pass = true;
    std::string detail;
    for (const RunHandle* run : {&rl_a, &rl_b}) {
      const auto best = h.best_laps_from_curves(*run);
      // setups order: baseline, understeer, oversteer, faster
      const double tb = lap_or_inf(best[0]), tu = lap_or_inf(best[1]), to = lap_or_inf(best[2]),
                   tf = lap_or_inf(best[3]);
      const bool seed_ok = tf < tb && tb < tu && tb < to;
      pass = pass && seed_ok;
      detail += fs::path(run->dir).filename().string() + ": faster " + fmt(tf) + " < baseline " +
                fmt(tb) + " < {under " + fmt(tu) + ", over " + fmt(to) + "}  ";
    }
    report(4, "setup-ordering reproduction", pass, detail);
  }

  // ---- criterion 5: multi- vs single-setup ablation
  {
    const auto multi = h.best_laps_from_curves(rl_a);
    const auto single = h.best_laps_from_curves(single_a);
    const double t_multi = lap_or_inf(multi[0]);
    const double t_single = lap_or_inf(single[0]);
    const double rel = std::abs(t_multi - t_single) / t_single;
    report(5, "multi vs single-setup ablation", std::isfinite(t_single) && rel <= 0.01,
           "baseline best: multi " + fmt(t_multi) + " vs single " + fmt(t_single) +
               " (rel diff " + fmt(rel * 100.0, 3) + "%)");
  }

  // ---- criterion 6: DSAC vs SAC
  {
    const double dsac = 0.5 * (h.final_eval_reward(rl_a) + h.final_eval_reward(rl_b));
    const double sac = 0.5 * (h.final_eval_reward(sac_a) + h.final_eval_reward(sac_b));
    report(6, "DSAC vs SAC final reward", dsac >= sac,
           "DSAC " + fmt(dsac, 6) + " vs SAC " + fmt(sac, 6));
  }

  // ---- criterion 7: imitation effects
  {
    const DemoBuffer demo_buffer(h.assets.demo_ptrs(), *h.assets.track, h.base_cfg.vehicle,
                                 h.base_cfg.norm, h.assets.weights, nullptr,
                                 h.base_cfg.imitation.holdout_laps);
    const EvalReport ev_rl = h.evaluate_run(rl_a, false, 3, &demo_buffer, &h.assets.path_stats,
                                            h.root + "/telemetry/pure_rl");
    const EvalReport ev_shared =
        h.evaluate_run(shared_a, false, 3, &demo_buffer, &h.assets.path_stats);
    const EvalReport ev_reg = h.evaluate_run(reg_a, false, 3, &demo_buffer, &h.assets.path_stats);
    const EvalReport ev_aug = h.evaluate_run(aug_a, false, 3, &demo_buffer, &h.assets.path_stats);
    const EvalReport ev_augreg =
        h.evaluate_run(augreg_a, false, 3, &demo_buffer, &h.assets.path_stats);

    // (a) policy similarity
    {
      const double base_sim = ev_rl.policy_similarity;
      bool pass = true;
      std::string detail = "pure_rl " + fmt(base_sim, 4);
      for (const auto& [name, ev] : {std::pair<const char*, const EvalReport*>{"shared", &ev_shared},
                                     {"reg", &ev_reg},
                                     {"aug+reg", &ev_augreg}}) {
        pass = pass && (ev->policy_similarity >= base_sim + 3.0);
        detail += std::string(", ") + name + " " + fmt(ev->policy_similarity, 4);
      }
      report(7, "imitation: similarity +3 nats", pass, detail);
    }

    // (b) path deviation reduced 10x by the augmented reward
    {
      const double base_dev = mean_path_dev(ev_rl);
      const double aug_dev = mean_path_dev(ev_aug);
      const double augreg_dev = mean_path_dev(ev_augreg);
      const bool pass = aug_dev <= base_dev / 10.0 && augreg_dev <= base_dev / 10.0;
      report(7, "imitation: path deviation 10x", pass,
             "pure_rl " + fmt(base_dev, 5) + ", augmented " + fmt(aug_dev, 5) + ", aug+reg " +
                 fmt(augreg_dev, 5));
    }

    // (c) lap-time cost of imitation <= 1%
    {
      const double base_lap = mean_avg_lap(ev_rl);
      bool pass = std::isfinite(base_lap);
      std::string detail = "pure_rl " + fmt(base_lap, 5) + " s";
      for (const auto& [name, ev] :
           {std::pair<const char*, const EvalReport*>{"shared", &ev_shared},
            {"reg", &ev_reg},
            {"aug", &ev_aug},
            {"aug+reg", &ev_augreg}}) {
        const double lap = mean_avg_lap(*ev);
        pass = pass && (lap <= base_lap * 1.01);
        detail += std::string(", ") + name + " " + fmt(lap, 5);
      }
      report(7, "imitation: lap-time cost <= 1%", pass, detail);
    }

    // extra: brake-point trend on the corner after the longest straight
    {
      const auto rows_under =
          read_telemetry_csv(h.root + "/telemetry/pure_rl/understeer.csv");
      const auto rows_fast = read_telemetry_csv(h.root + "/telemetry/pure_rl/faster.csv");
      const auto bp_under = brake_point(rows_under, 120.0, 320.0);
      const auto bp_fast = brake_point(rows_fast, 120.0, 320.0);
      if (bp_under && bp_fast) {
        note("brake points into turn 1: understeer " + fmt(*bp_under, 5) + " m, faster " +
             fmt(*bp_fast, 5) + " m" + (*bp_under <= *bp_fast + 1e-9 ? " (expected trend)" : ""));
      } else {
        note("brake points into turn 1: not detected on both setups");
      }
    }
  }

  // ---- criterion 8: unseen-setup sweep
  {
    const Networks nets = h.load_best(rl_a);
    RngStream rng(7);
    const SweepResult sweep = sweep_unseen(nets.policy, make_env_spec(rl_a.cfg, h.assets),
                                           h.base_cfg.setups, 100, rng);
    sweep.write_csv(h.root + "/sweep.csv");
    const bool all_complete = sweep.completed == 100;
    const bool signs = sweep.fit.c1 < 0.0 && sweep.fit.c2 < 0.0;
    const bool mae_ok = sweep.fit.mae <= 0.05 * sweep.lap_time_range;
    report(8, "unseen-setup sweep", all_complete && signs && mae_ok,
           "completed " + std::to_string(sweep.completed) + "/100, fit " + fmt(sweep.fit.c0, 5) +
               " + " + fmt(sweep.fit.c1, 4) + "*muF + " + fmt(sweep.fit.c2, 4) +
               "*muR, MAE " + fmt(sweep.fit.mae, 3) + " s (range " + fmt(sweep.lap_time_range, 3) +
               " s), R2 " + fmt(sweep.fit.r2, 3));
  }

  // ---- criterion 9: deterministic vs stochastic evaluation
  {
    const EvalReport det = h.evaluate_run(rl_a, false, 3, nullptr, nullptr);
    const EvalReport stoch = h.evaluate_run(rl_a, true, 3, nullptr, nullptr);
    const double det_lap = mean_avg_lap(det);
    const double stoch_lap = mean_avg_lap(stoch);
    report(9, "stochastic >= deterministic laps", stoch_lap >= det_lap,
           "deterministic " + fmt(det_lap, 5) + " s vs stochastic " + fmt(stoch_lap, 5) + " s");
  }

  // extra: entropy tracks the target over the tail of training
  {
    const CsvTable curves = read_csv(rl_a.dir + "/curves.csv");
    const int col = curves.column_index("entropy");
    double acc = 0.0;
    int n = 0;
    for (std::size_t i = curves.rows.size() * 3 / 4; i < curves.rows.size(); ++i) {
      acc += curves.rows[i][static_cast<std::size_t>(col)];
      ++n;
    }
    const double tail = acc / std::max(n, 1);
    note("tail policy entropy " + fmt(tail, 4) + " (target " +
         fmt(h.base_cfg.trainer.entropy_target, 3) + ")");
  }

  std::printf("== %d checks, %d failures ==\n", g_checks, g_failures);
  return g_failures == 0 ? 0 : 1;
}
