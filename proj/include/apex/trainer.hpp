#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "apex/checkpoint.hpp"
#include "apex/env.hpp"
#include "apex/imitation.hpp"
#include "apex/nn.hpp"
#include "apex/replay.hpp"

namespace apex {

enum class Algorithm { DSAC, SAC };

struct TrainerConfig {
  double gamma = 0.99;
  double tau = 0.005;
  int batch_size = 256;
  std::size_t replay_capacity = 1'000'000;
  int prefill_steps = 10'000;
  int n_parallel_envs = 8;
  int quantiles = 32;
  double learning_rate = 3e-4;
  double entropy_target = -2.0;
  double init_alpha = 0.2;
  Algorithm algorithm = Algorithm::DSAC;
  long total_iterations = 37'500;
  long eval_interval = 2'500;
  int hidden_width = 128;
  int hidden_layers = 3;
  int eval_laps = 2;

  void validate() const;
};

struct Networks {
  PolicyNet policy;
  CriticNet critic1, critic2;
  CriticNet target1, target2;
  Matrix log_alpha;  // 1x1

  double alpha() const { return std::exp(log_alpha(0, 0)); }
  static Networks create(int obs_dim, int act_dim, const TrainerConfig& cfg, RngStream& rng);
};

struct LossReport {
  double critic1 = 0.0;
  double critic2 = 0.0;
  double policy = 0.0;
  double alpha_loss = 0.0;
  double alpha = 0.0;
  double j_imi = 0.0;
  double entropy_estimate = 0.0;  // -mean log pi over the fresh sample
};

// Per-sample target quantile sets:
//   y_j = r + gamma * (1 - done) * (min_k z'_{k,j}(s', a') - alpha * log pi(a'|s'))
// with a' sampled from the current policy.
Matrix critic_targets(const Batch& batch, const Networks& nets, double alpha, double gamma,
                      const Matrix& eps_next);

// Policy objective E[alpha log pi(a|s) - mean-quantile of the min critic] on a
// fixed batch with reparameterized noise eps. Accumulates policy gradients
// when grads is given; critic parameters stay frozen.
double policy_objective(const PolicyNet& policy, const CriticNet& critic1,
                        const CriticNet& critic2, const Matrix& obs, const Matrix& eps,
                        double alpha, PolicyGrads* grads, double* mean_log_prob = nullptr);

// The DSAC training loop: twin quantile critics with per-quantile-index
// minimum targets, tanh-Gaussian policy, automatic entropy temperature and
// optional imitation extensions. SAC mode runs the same loop with
// single-value critics and a squared-error critic loss.
class Trainer {
 public:
  Trainer(TrainerConfig cfg, EnvSpec spec, std::uint64_t master_seed,
          const DemoBuffer* demos = nullptr, ImitationConfig imitation = {});

  struct Summary {
    long iterations = 0;
    long env_steps = 0;
    std::string best_checkpoint;
    std::string final_checkpoint;
    double final_eval_reward = 0.0;
  };

  // Prefills the buffer with random-policy steps, then alternates one step of
  // every parallel environment with one gradient update. Writes curves.csv
  // and checkpoints into run_dir.
  Summary train(const std::string& run_dir, std::uint64_t config_hash = 0);

  // One gradient update from the replay buffer (exposed for tests).
  LossReport update_step();

  ReplayBuffer& buffer() { return buffer_; }
  Networks& networks() { return nets_; }
  const TrainerConfig& config() const { return cfg_; }
  long env_steps() const { return env_steps_; }
  long updates() const { return updates_; }

  // direct access used by the toy-MDP critic-convergence test
  void push_transition(const Eigen::VectorXd& obs, const Eigen::Vector2d& act, double reward,
                       const Eigen::VectorXd& next_obs, bool done);
  void set_policy_update_enabled(bool enabled) { policy_update_enabled_ = enabled; }
  void set_fixed_alpha(std::optional<double> alpha);

 private:
  void prefill();
  void collect_parallel_step();
  struct EvalSnapshot {
    double mean_reward = 0.0;
    double similarity = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> best_lap;  // per setup, NaN when no valid lap
    double mean_valid_lap = std::numeric_limits<double>::quiet_NaN();
  };
  EvalSnapshot evaluate_snapshot();

  TrainerConfig cfg_;
  EnvSpec spec_;
  ImitationConfig imitation_;
  const DemoBuffer* demos_ = nullptr;

  SetupQueue queue_;
  std::vector<std::unique_ptr<Environment>> envs_;
  std::vector<Eigen::VectorXd> env_obs_;
  ReplayBuffer buffer_;
  Networks nets_;

  Adam opt_policy_, opt_c1_, opt_c2_, opt_alpha_;
  RngStream rng_env_, rng_sample_, rng_eps_, rng_demo_, rng_prefill_;

  bool policy_update_enabled_ = true;
  std::optional<double> fixed_alpha_;

  long env_steps_ = 0;
  long updates_ = 0;
  std::vector<double> recent_episode_rewards_;
  double episode_reward_acc_ = 0.0;
  std::vector<double> env_episode_reward_;
};

// checkpoint packing
Checkpoint pack_networks(const Networks& nets, const NormTable& norm, const TrainerConfig& cfg);
Networks unpack_networks(const Checkpoint& ckpt);
TrainerConfig checkpoint_trainer_config(const Checkpoint& ckpt);

}  // namespace apex
