#pragma once

#include <Eigen/Core>
#include <string>
#include <utility>
#include <vector>

#include "apex/rng.hpp"

namespace apex {

using Matrix = Eigen::MatrixXd;

// Linear layer, batch rows: Y = X * W + b. Bias kept as a 1 x out matrix so
// every parameter tensor has one type.
struct Linear {
  Matrix W;
  Matrix b;
};

// Fully-connected trunk with a smooth-rectifier (softplus) after every layer.
struct Mlp {
  std::vector<Linear> layers;

  static Mlp create(int input_dim, int width, int depth, RngStream& rng);
  int output_dim() const { return static_cast<int>(layers.back().W.cols()); }
};

struct MlpCache {
  std::vector<Matrix> inputs;   // input to each layer
  std::vector<Matrix> preact;   // z before the activation
  Matrix output;                // activation of the last layer
};

// stable softplus / its derivative
Matrix softplus(const Matrix& x);
Matrix softplus_grad(const Matrix& x);

Matrix mlp_forward(const Mlp& net, const Matrix& x, MlpCache* cache);
// Backpropagates d(output); accumulates parameter gradients and returns dx.
Matrix mlp_backward(const Mlp& net, const MlpCache& cache, const Matrix& d_out, Mlp& grads);

Mlp zeros_like(const Mlp& net);
Linear zeros_like(const Linear& l);

// ---------------------------------------------------------------------------
// Gaussian-tanh policy

constexpr double kLogStdMin = -20.0;
constexpr double kLogStdMax = 2.0;

struct PolicyNet {
  Mlp trunk;
  Linear mean_head;
  Linear logstd_head;

  static PolicyNet create(int obs_dim, int act_dim, int width, int depth, RngStream& rng);
  int act_dim() const { return static_cast<int>(mean_head.W.cols()); }
};

struct PolicyGrads {
  Mlp trunk;
  Linear mean_head;
  Linear logstd_head;
};
PolicyGrads zeros_like(const PolicyNet& net);

struct PolicyForward {
  MlpCache trunk_cache;
  Matrix mean;         // B x A
  Matrix log_std_raw;  // before the clamp
  Matrix log_std;      // clamped to [kLogStdMin, kLogStdMax]
  Matrix std;          // exp(log_std)
};
void policy_forward(const PolicyNet& net, const Matrix& obs, PolicyForward& fwd);

// Reparameterized sample: z = mean + std .* eps, action = tanh(z).
struct PolicySample {
  Matrix z;
  Matrix action;
  Eigen::VectorXd log_prob;  // per row
};
PolicySample policy_sample_batch(const PolicyForward& fwd, const Matrix& eps);

// Single-observation convenience op; deterministic mode returns tanh(mean)
// with the log-density of the mean point.
std::pair<Eigen::Vector2d, double> policy_sample(const PolicyNet& net,
                                                 const Eigen::VectorXd& observation,
                                                 RngStream& rng, bool deterministic);

// log pi(a|s) for given squashed actions; optionally returns the analytic
// gradients with respect to mean and (clamped) log-std entries.
Eigen::VectorXd policy_log_prob(const PolicyForward& fwd, const Matrix& actions,
                                Matrix* d_mean = nullptr, Matrix* d_logstd = nullptr);

// Backward through heads and trunk given gradients at mean / raw log-std.
void policy_backward(const PolicyNet& net, const PolicyForward& fwd, const Matrix& d_mean,
                     const Matrix& d_logstd_raw, PolicyGrads& grads);

// ---------------------------------------------------------------------------
// Quantile critic

struct CriticNet {
  Mlp trunk;   // on [obs, action]
  Linear out;  // width -> n_quantiles

  static CriticNet create(int obs_dim, int act_dim, int width, int depth, int n_quantiles,
                          RngStream& rng);
  int n_quantiles() const { return static_cast<int>(out.W.cols()); }
};

struct CriticGrads {
  Mlp trunk;
  Linear out;
};
CriticGrads zeros_like(const CriticNet& net);

struct CriticForward {
  Matrix input;  // [obs, action]
  MlpCache trunk_cache;
  Matrix quantiles;  // B x N
};
void critic_forward(const CriticNet& net, const Matrix& obs, const Matrix& act,
                    CriticForward& fwd);
// Returns the gradient with respect to the critic input (obs columns first,
// then action columns); accumulates parameter gradients when grads != nullptr.
Matrix critic_backward(const CriticNet& net, const CriticForward& fwd, const Matrix& d_quantiles,
                       CriticGrads* grads);

// ---------------------------------------------------------------------------
// Losses

// Quantile regression Huber loss with midpoints tau_i = (2i-1)/2N:
// mean over (i, j) of |tau_i - 1{u<0}| * Huber_kappa(u)/kappa, u = target_j - pred_i.
double quantile_huber_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& targets,
                           double kappa = 1.0);
// Batched version, additionally averaged over rows; d_pred filled when given.
double quantile_huber_loss_batch(const Matrix& pred, const Matrix& targets, double kappa,
                                 Matrix* d_pred);

// Plain squared-error loss used by the SAC baseline critics.
double squared_error_loss_batch(const Matrix& pred, const Matrix& targets, Matrix* d_pred);

// ---------------------------------------------------------------------------
// Optimizer

// First-order adaptive-moment method with bias correction.
struct Adam {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  void init(const std::vector<Matrix*>& params);
  void step(const std::vector<Matrix*>& params, const std::vector<Matrix*>& grads);
};

// Flattened parameter views in a stable order (used by the optimizer,
// checkpoints and the finite-difference tests).
std::vector<Matrix*> flatten(Mlp& net);
std::vector<Matrix*> flatten(PolicyNet& net);
std::vector<Matrix*> flatten(PolicyGrads& grads);
std::vector<Matrix*> flatten(CriticNet& net);
std::vector<Matrix*> flatten(CriticGrads& grads);

// target <- (1 - tau) * target + tau * online, elementwise
void soft_update(CriticNet& target, const CriticNet& online, double tau);

}  // namespace apex
