#include "apex/trainer.hpp"

#include <malloc.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "apex/csv.hpp"
#include "apex/evalkit.hpp"

namespace apex {

void TrainerConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::runtime_error("trainer: gamma must be in (0,1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw std::runtime_error("trainer: tau must be in (0,1]");
  if (batch_size < 1 || replay_capacity == 0 || n_parallel_envs < 1 || quantiles < 1 ||
      total_iterations < 1 || hidden_width < 1 || hidden_layers < 1) {
    throw std::runtime_error("trainer: capacities and sizes must be positive");
  }
}

Networks Networks::create(int obs_dim, int act_dim, const TrainerConfig& cfg, RngStream& rng) {
  const int n_q = (cfg.algorithm == Algorithm::SAC) ? 1 : cfg.quantiles;
  Networks nets;
  nets.policy = PolicyNet::create(obs_dim, act_dim, cfg.hidden_width, cfg.hidden_layers, rng);
  nets.critic1 = CriticNet::create(obs_dim, act_dim, cfg.hidden_width, cfg.hidden_layers, n_q, rng);
  nets.critic2 = CriticNet::create(obs_dim, act_dim, cfg.hidden_width, cfg.hidden_layers, n_q, rng);
  nets.target1 = nets.critic1;
  nets.target2 = nets.critic2;
  nets.log_alpha = Matrix::Constant(1, 1, std::log(cfg.init_alpha));
  return nets;
}

Matrix critic_targets(const Batch& batch, const Networks& nets, double alpha, double gamma,
                      const Matrix& eps_next) {
  PolicyForward pf;
  policy_forward(nets.policy, batch.next_obs, pf);
  const PolicySample next = policy_sample_batch(pf, eps_next);

  CriticForward tf1, tf2;
  critic_forward(nets.target1, batch.next_obs, next.action, tf1);
  critic_forward(nets.target2, batch.next_obs, next.action, tf2);
  const Matrix zmin = tf1.quantiles.cwiseMin(tf2.quantiles);

  const int b = static_cast<int>(zmin.rows());
  const int n = static_cast<int>(zmin.cols());
  Matrix targets(b, n);
  for (int r = 0; r < b; ++r) {
    const double scale = gamma * (1.0 - batch.done[r]);
    targets.row(r) =
        (batch.reward[r] + scale * (zmin.row(r).array() - alpha * next.log_prob[r])).matrix();
  }
  return targets;
}

double policy_objective(const PolicyNet& policy, const CriticNet& critic1,
                        const CriticNet& critic2, const Matrix& obs, const Matrix& eps,
                        double alpha, PolicyGrads* grads, double* mean_log_prob) {
  const int b = static_cast<int>(obs.rows());
  const int a_dim = static_cast<int>(eps.cols());
  const int n_q = critic1.n_quantiles();

  PolicyForward pf;
  policy_forward(policy, obs, pf);
  const PolicySample sample = policy_sample_batch(pf, eps);
  if (mean_log_prob) *mean_log_prob = sample.log_prob.mean();

  CriticForward q1f, q2f;
  critic_forward(critic1, obs, sample.action, q1f);
  critic_forward(critic2, obs, sample.action, q2f);
  const Eigen::VectorXd q1 = q1f.quantiles.rowwise().mean();
  const Eigen::VectorXd q2 = q2f.quantiles.rowwise().mean();

  Matrix dq1 = Matrix::Zero(b, n_q);
  Matrix dq2 = Matrix::Zero(b, n_q);
  Eigen::VectorXd q_min(b);
  for (int r = 0; r < b; ++r) {
    if (q1[r] <= q2[r]) {
      dq1.row(r).setConstant(1.0 / n_q);
      q_min[r] = q1[r];
    } else {
      dq2.row(r).setConstant(1.0 / n_q);
      q_min[r] = q2[r];
    }
  }
  const double objective = (alpha * sample.log_prob.array() - q_min.array()).mean();

  if (grads != nullptr) {
    const Matrix din1 = critic_backward(critic1, q1f, dq1, nullptr);
    const Matrix din2 = critic_backward(critic2, q2f, dq2, nullptr);
    const Matrix dq_da = (din1 + din2).rightCols(a_dim);

    const double inv_b = 1.0 / b;
    const Matrix one_minus_a2 = (1.0 - sample.action.array().square()).matrix();
    const Matrix dj_da = -inv_b * dq_da;
    // log pi gradient through z: the tanh correction contributes 2a
    const Matrix dj_dz = (alpha * inv_b) * 2.0 * sample.action + dj_da.cwiseProduct(one_minus_a2);
    const Matrix d_mean = dj_dz;
    Matrix d_logstd = dj_dz.cwiseProduct(pf.std.cwiseProduct(eps)) +
                      Matrix::Constant(b, a_dim, -alpha * inv_b);
    for (int r = 0; r < b; ++r) {
      for (int d = 0; d < a_dim; ++d) {
        const double raw = pf.log_std_raw(r, d);
        if (raw <= kLogStdMin || raw >= kLogStdMax) d_logstd(r, d) = 0.0;
      }
    }
    policy_backward(policy, pf, d_mean, d_logstd, *grads);
  }
  return objective;
}

Trainer::Trainer(TrainerConfig cfg, EnvSpec spec, std::uint64_t master_seed,
                 const DemoBuffer* demos, ImitationConfig imitation)
    : cfg_(cfg),
      spec_(std::move(spec)),
      imitation_(imitation),
      demos_(demos),
      queue_(spec_.setups),
      buffer_(cfg.replay_capacity, kObsDim, kActDim),
      nets_(Networks{}),
      rng_env_(master_seed),
      rng_sample_(master_seed),
      rng_eps_(master_seed),
      rng_demo_(master_seed),
      rng_prefill_(master_seed) {
  cfg_.validate();
  imitation_.validate();
  // training churns through ~256 KB matrices; keep them on the heap free
  // list instead of round-tripping mmap
  mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
  if ((imitation_.shared_experience || imitation_.regularization) && demos_ == nullptr) {
    throw std::runtime_error("trainer: imitation modes require a demonstration buffer");
  }

  RngStream seeder(master_seed);
  rng_env_ = seeder.spawn(1);
  rng_sample_ = seeder.spawn(2);
  rng_eps_ = seeder.spawn(3);
  rng_demo_ = seeder.spawn(4);
  rng_prefill_ = seeder.spawn(5);
  RngStream rng_init = seeder.spawn(6);

  nets_ = Networks::create(kObsDim, kActDim, cfg_, rng_init);
  opt_policy_.lr = cfg_.learning_rate;
  opt_c1_.lr = cfg_.learning_rate;
  opt_c2_.lr = cfg_.learning_rate;
  opt_alpha_.lr = cfg_.learning_rate;
  opt_policy_.init(flatten(nets_.policy));
  opt_c1_.init(flatten(nets_.critic1));
  opt_c2_.init(flatten(nets_.critic2));
  std::vector<Matrix*> alpha_param{&nets_.log_alpha};
  opt_alpha_.init(alpha_param);

  for (int i = 0; i < cfg_.n_parallel_envs; ++i) {
    envs_.push_back(std::make_unique<Environment>(spec_.track, spec_.vehicle, spec_.episode,
                                                  spec_.weights, spec_.norm,
                                                  rng_env_.next_u64(), &queue_,
                                                  imitation_.augmented_reward ? spec_.path_stats
                                                                              : nullptr));
    env_obs_.push_back(envs_.back()->reset());
    env_episode_reward_.push_back(0.0);
  }
}

void Trainer::set_fixed_alpha(std::optional<double> alpha) {
  fixed_alpha_ = alpha;
  if (alpha) nets_.log_alpha(0, 0) = std::log(std::max(*alpha, 1e-12));
}

void Trainer::push_transition(const Eigen::VectorXd& obs, const Eigen::Vector2d& act,
                              double reward, const Eigen::VectorXd& next_obs, bool done) {
  buffer_.push(obs, act, reward, next_obs, done);
}

void Trainer::prefill() {
  while (buffer_.size() < static_cast<std::size_t>(cfg_.prefill_steps)) {
    for (int i = 0; i < cfg_.n_parallel_envs &&
                    buffer_.size() < static_cast<std::size_t>(cfg_.prefill_steps);
         ++i) {
      Eigen::Vector2d action(rng_prefill_.uniform(-1.0, 1.0), rng_prefill_.uniform(-1.0, 1.0));
      auto result = envs_[i]->step(action);
      buffer_.push(env_obs_[i], action, result.reward.total, result.obs, result.done);
      env_obs_[i] = result.done ? envs_[i]->reset() : result.obs;
    }
  }
}

void Trainer::collect_parallel_step() {
  // batched action selection across the parallel environments
  const int n = cfg_.n_parallel_envs;
  Matrix obs_batch(n, kObsDim);
  for (int i = 0; i < n; ++i) obs_batch.row(i) = env_obs_[i].transpose();

  PolicyForward pf;
  policy_forward(nets_.policy, obs_batch, pf);
  Matrix eps(n, kActDim);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < kActDim; ++d) eps(i, d) = rng_eps_.normal();
  }
  const PolicySample sample = policy_sample_batch(pf, eps);

  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d action(sample.action(i, 0), sample.action(i, 1));
    auto result = envs_[i]->step(action);
    buffer_.push(env_obs_[i], action, result.reward.total, result.obs, result.done);
    env_episode_reward_[i] += result.reward.total;
    ++env_steps_;
    if (result.done) {
      recent_episode_rewards_.push_back(env_episode_reward_[i]);
      if (recent_episode_rewards_.size() > 50) {
        recent_episode_rewards_.erase(recent_episode_rewards_.begin());
      }
      env_episode_reward_[i] = 0.0;
      env_obs_[i] = envs_[i]->reset();
    } else {
      env_obs_[i] = result.obs;
    }
  }
}

LossReport Trainer::update_step() {
  if (buffer_.size() < static_cast<std::size_t>(cfg_.batch_size)) {
    throw std::runtime_error("trainer: buffer smaller than batch size");
  }
  LossReport report;
  const double alpha = fixed_alpha_.value_or(nets_.alpha());
  report.alpha = alpha;

  Batch batch = buffer_.sample(cfg_.batch_size, rng_sample_);
  if (imitation_.shared_experience && demos_ != nullptr) {
    mix_batches(batch, *demos_, imitation_.demo_mix_fraction, rng_demo_);
  }
  const int b = static_cast<int>(batch.obs.rows());
  const int n_q = nets_.critic1.n_quantiles();

  // ---- critic update
  Matrix eps_next(b, kActDim);
  for (int r = 0; r < b; ++r) {
    for (int d = 0; d < kActDim; ++d) eps_next(r, d) = rng_eps_.normal();
  }
  const Matrix targets = critic_targets(batch, nets_, alpha, cfg_.gamma, eps_next);

  for (int k = 0; k < 2; ++k) {
    CriticNet& critic = (k == 0) ? nets_.critic1 : nets_.critic2;
    Adam& opt = (k == 0) ? opt_c1_ : opt_c2_;
    CriticForward fwd;
    critic_forward(critic, batch.obs, batch.action, fwd);
    Matrix d_pred;
    double loss;
    if (cfg_.algorithm == Algorithm::SAC) {
      loss = squared_error_loss_batch(fwd.quantiles, targets, &d_pred);
    } else {
      loss = quantile_huber_loss_batch(fwd.quantiles, targets, 1.0, &d_pred);
    }
    if (!std::isfinite(loss)) throw std::runtime_error("trainer: non-finite critic loss");
    CriticGrads grads = zeros_like(critic);
    critic_backward(critic, fwd, d_pred, &grads);
    auto params = flatten(critic);
    auto gptrs = flatten(grads);
    opt.step(params, gptrs);
    if (k == 0) {
      report.critic1 = loss;
    } else {
      report.critic2 = loss;
    }
  }

  // ---- policy update
  Matrix eps(b, kActDim);
  for (int r = 0; r < b; ++r) {
    for (int d = 0; d < kActDim; ++d) eps(r, d) = rng_eps_.normal();
  }
  double mean_log_prob = 0.0;
  PolicyGrads grads = zeros_like(nets_.policy);
  const double policy_loss =
      policy_objective(nets_.policy, nets_.critic1, nets_.critic2, batch.obs, eps, alpha,
                       policy_update_enabled_ ? &grads : nullptr, &mean_log_prob);
  report.policy = policy_loss;
  report.entropy_estimate = -mean_log_prob;
  if (!std::isfinite(policy_loss)) throw std::runtime_error("trainer: non-finite policy loss");

  if (policy_update_enabled_) {
    if (imitation_.regularization && demos_ != nullptr && imitation_.lambda_imi > 0.0) {
      Matrix demo_obs, demo_act;
      demos_->sample_pairs(imitation_.imitation_batch_size, rng_demo_, demo_obs, demo_act);
      report.j_imi = imitation_loss(nets_.policy, demo_obs, demo_act, &grads,
                                    imitation_.lambda_imi);
    }
    auto params = flatten(nets_.policy);
    auto gptrs = flatten(grads);
    opt_policy_.step(params, gptrs);
  }

  // ---- entropy temperature
  if (!fixed_alpha_) {
    const double ent_err = mean_log_prob + cfg_.entropy_target;
    report.alpha_loss = -nets_.log_alpha(0, 0) * ent_err;
    Matrix d_log_alpha = Matrix::Constant(1, 1, -ent_err);
    std::vector<Matrix*> p{&nets_.log_alpha};
    std::vector<Matrix*> g{&d_log_alpha};
    opt_alpha_.step(p, g);
  }

  // ---- target soft updates
  soft_update(nets_.target1, nets_.critic1, cfg_.tau);
  soft_update(nets_.target2, nets_.critic2, cfg_.tau);

  ++updates_;
  return report;
}

Trainer::EvalSnapshot Trainer::evaluate_snapshot() {
  EvalSnapshot snap;
  std::vector<double> rewards;
  std::vector<double> valid_laps;
  for (const VehicleSetup& setup : spec_.setups) {
    Environment env(spec_.track, spec_.vehicle, spec_.episode, spec_.weights, spec_.norm, 99,
                    nullptr, imitation_.augmented_reward ? spec_.path_stats : nullptr);
    env.set_setup(setup);
    RolloutOptions opt;
    opt.start_u = 0.0;
    opt.deterministic = true;
    opt.stop_after_laps = cfg_.eval_laps + 1;
    opt.max_steps = (cfg_.eval_laps + 2) * spec_.episode.max_steps;
    const RolloutResult rollout = rollout_policy(env, nets_.policy, opt);

    double window_reward = 0.0;
    const int window = std::min<int>(spec_.episode.max_steps, rollout.rows.size());
    for (int i = 0; i < window; ++i) window_reward += rollout.rows[i].total;
    rewards.push_back(window_reward);

    const auto laps = lap_split(rollout.rows, *spec_.track, 0.05);
    double best = std::numeric_limits<double>::quiet_NaN();
    for (const LapRecord& lap : laps) {
      if (lap.valid && (!std::isfinite(best) || lap.lap_time < best)) best = lap.lap_time;
    }
    snap.best_lap.push_back(best);
    if (std::isfinite(best)) valid_laps.push_back(best);
  }
  snap.mean_reward = rewards.empty()
                         ? 0.0
                         : std::accumulate(rewards.begin(), rewards.end(), 0.0) / rewards.size();
  if (valid_laps.size() == spec_.setups.size()) {
    snap.mean_valid_lap =
        std::accumulate(valid_laps.begin(), valid_laps.end(), 0.0) / valid_laps.size();
  }
  if (demos_ != nullptr && demos_->holdout_size() > 0) {
    snap.similarity = policy_similarity(nets_.policy, *demos_);
  }
  return snap;
}

Trainer::Summary Trainer::train(const std::string& run_dir, std::uint64_t config_hash) {
  namespace fs = std::filesystem;
  fs::create_directories(run_dir);

  std::vector<std::string> columns = {"iteration",   "env_steps",   "avg_ep_reward",
                                      "critic1_loss", "critic2_loss", "policy_loss",
                                      "alpha",        "entropy",      "j_imi",
                                      "eval_reward",  "similarity",   "mean_valid_lap"};
  for (const VehicleSetup& s : spec_.setups) columns.push_back("lap_" + s.setup_id);
  CsvWriter curves(run_dir + "/curves.csv", columns);

  prefill();

  Summary summary;
  double best_mean_lap = std::numeric_limits<double>::infinity();
  double last_eval_reward = 0.0;

  for (long iter = 1; iter <= cfg_.total_iterations; ++iter) {
    collect_parallel_step();
    LossReport report = update_step();

    if (iter % cfg_.eval_interval == 0 || iter == cfg_.total_iterations) {
      const EvalSnapshot snap = evaluate_snapshot();
      last_eval_reward = snap.mean_reward;

      const double avg_ep =
          recent_episode_rewards_.empty()
              ? 0.0
              : std::accumulate(recent_episode_rewards_.begin(), recent_episode_rewards_.end(),
                                0.0) /
                    recent_episode_rewards_.size();
      std::vector<double> row = {static_cast<double>(iter),
                                 static_cast<double>(env_steps_),
                                 avg_ep,
                                 report.critic1,
                                 report.critic2,
                                 report.policy,
                                 report.alpha,
                                 report.entropy_estimate,
                                 report.j_imi,
                                 snap.mean_reward,
                                 snap.similarity,
                                 snap.mean_valid_lap};
      for (double lap : snap.best_lap) row.push_back(lap);
      curves.write_row(row);
      curves.flush();

      const std::string ckpt_path = run_dir + "/ckpt_" + std::to_string(iter) + ".bin";
      Checkpoint ckpt = pack_networks(nets_, spec_.norm, cfg_);
      ckpt.config_hash = config_hash;
      ckpt.scalars["iteration"] = static_cast<double>(iter);
      ckpt.scalars["env_steps"] = static_cast<double>(env_steps_);
      auto add_opt = [&ckpt](const std::string& prefix, const Adam& opt) {
        for (std::size_t i = 0; i < opt.m.size(); ++i) {
          ckpt.add(prefix + "." + std::to_string(i) + ".m", opt.m[i]);
          ckpt.add(prefix + "." + std::to_string(i) + ".v", opt.v[i]);
        }
        ckpt.scalars[prefix + ".steps"] = static_cast<double>(opt.step_count);
      };
      add_opt("opt.policy", opt_policy_);
      add_opt("opt.critic1", opt_c1_);
      add_opt("opt.critic2", opt_c2_);
      add_opt("opt.alpha", opt_alpha_);
      save_checkpoint(ckpt_path, ckpt);
      summary.final_checkpoint = ckpt_path;

      if (std::isfinite(snap.mean_valid_lap) && snap.mean_valid_lap < best_mean_lap) {
        best_mean_lap = snap.mean_valid_lap;
        save_checkpoint(run_dir + "/best.bin", ckpt);
        summary.best_checkpoint = run_dir + "/best.bin";
      }
    }
  }

  curves.flush();
  summary.iterations = cfg_.total_iterations;
  summary.env_steps = env_steps_;
  summary.final_eval_reward = last_eval_reward;
  if (summary.best_checkpoint.empty()) summary.best_checkpoint = summary.final_checkpoint;
  return summary;
}

namespace {

void pack_mlp(Checkpoint& ckpt, const std::string& prefix, const Mlp& net) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    ckpt.add(prefix + "." + std::to_string(i) + ".W", net.layers[i].W);
    ckpt.add(prefix + "." + std::to_string(i) + ".b", net.layers[i].b);
  }
}

Mlp unpack_mlp(const Checkpoint& ckpt, const std::string& prefix, int depth) {
  Mlp net;
  for (int i = 0; i < depth; ++i) {
    Linear l;
    l.W = ckpt.tensor(prefix + "." + std::to_string(i) + ".W");
    l.b = ckpt.tensor(prefix + "." + std::to_string(i) + ".b");
    net.layers.push_back(std::move(l));
  }
  return net;
}

void pack_critic(Checkpoint& ckpt, const std::string& prefix, const CriticNet& net) {
  pack_mlp(ckpt, prefix + ".trunk", net.trunk);
  ckpt.add(prefix + ".out.W", net.out.W);
  ckpt.add(prefix + ".out.b", net.out.b);
}

CriticNet unpack_critic(const Checkpoint& ckpt, const std::string& prefix, int depth) {
  CriticNet net;
  net.trunk = unpack_mlp(ckpt, prefix + ".trunk", depth);
  net.out.W = ckpt.tensor(prefix + ".out.W");
  net.out.b = ckpt.tensor(prefix + ".out.b");
  return net;
}

}  // namespace

Checkpoint pack_networks(const Networks& nets, const NormTable& norm, const TrainerConfig& cfg) {
  Checkpoint ckpt;
  pack_mlp(ckpt, "policy.trunk", nets.policy.trunk);
  ckpt.add("policy.mean.W", nets.policy.mean_head.W);
  ckpt.add("policy.mean.b", nets.policy.mean_head.b);
  ckpt.add("policy.logstd.W", nets.policy.logstd_head.W);
  ckpt.add("policy.logstd.b", nets.policy.logstd_head.b);
  pack_critic(ckpt, "critic1", nets.critic1);
  pack_critic(ckpt, "critic2", nets.critic2);
  pack_critic(ckpt, "target1", nets.target1);
  pack_critic(ckpt, "target2", nets.target2);
  ckpt.add("log_alpha", nets.log_alpha);
  ckpt.add("norm_divisors", norm.divisors());
  ckpt.scalars["hidden_layers"] = cfg.hidden_layers;
  ckpt.scalars["hidden_width"] = cfg.hidden_width;
  ckpt.scalars["quantiles"] = cfg.quantiles;
  ckpt.scalars["algorithm"] = (cfg.algorithm == Algorithm::SAC) ? 1.0 : 0.0;
  ckpt.scalars["gamma"] = cfg.gamma;
  ckpt.scalars["tau"] = cfg.tau;
  ckpt.scalars["learning_rate"] = cfg.learning_rate;
  ckpt.scalars["entropy_target"] = cfg.entropy_target;
  return ckpt;
}

Networks unpack_networks(const Checkpoint& ckpt) {
  const int depth = static_cast<int>(ckpt.scalar("hidden_layers"));
  Networks nets;
  nets.policy.trunk = unpack_mlp(ckpt, "policy.trunk", depth);
  nets.policy.mean_head.W = ckpt.tensor("policy.mean.W");
  nets.policy.mean_head.b = ckpt.tensor("policy.mean.b");
  nets.policy.logstd_head.W = ckpt.tensor("policy.logstd.W");
  nets.policy.logstd_head.b = ckpt.tensor("policy.logstd.b");
  nets.critic1 = unpack_critic(ckpt, "critic1", depth);
  nets.critic2 = unpack_critic(ckpt, "critic2", depth);
  nets.target1 = unpack_critic(ckpt, "target1", depth);
  nets.target2 = unpack_critic(ckpt, "target2", depth);
  nets.log_alpha = ckpt.tensor("log_alpha");
  return nets;
}

TrainerConfig checkpoint_trainer_config(const Checkpoint& ckpt) {
  TrainerConfig cfg;
  cfg.hidden_layers = static_cast<int>(ckpt.scalar("hidden_layers"));
  cfg.hidden_width = static_cast<int>(ckpt.scalar("hidden_width"));
  cfg.quantiles = static_cast<int>(ckpt.scalar("quantiles"));
  cfg.algorithm = (ckpt.scalar("algorithm") > 0.5) ? Algorithm::SAC : Algorithm::DSAC;
  cfg.gamma = ckpt.scalar("gamma");
  cfg.tau = ckpt.scalar("tau");
  cfg.learning_rate = ckpt.scalar("learning_rate");
  cfg.entropy_target = ckpt.scalar("entropy_target");
  return cfg;
}

}  // namespace apex
