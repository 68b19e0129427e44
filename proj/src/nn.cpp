#include "apex/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace apex {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2*pi)

Linear init_linear(int in, int out, RngStream& rng, double scale = 1.0) {
  const double bound = scale / std::sqrt(static_cast<double>(in));
  Linear l;
  l.W = Matrix::NullaryExpr(in, out, [&]() { return rng.uniform(-bound, bound); });
  l.b = Matrix::NullaryExpr(1, out, [&]() { return rng.uniform(-bound, bound); });
  return l;
}

Matrix linear_forward(const Linear& l, const Matrix& x) {
  Matrix z = x * l.W;
  z.rowwise() += l.b.row(0);
  return z;
}

// accumulates into g, returns dx
Matrix linear_backward(const Linear& l, const Matrix& x, const Matrix& dz, Linear& g) {
  g.W.noalias() += x.transpose() * dz;
  g.b.row(0) += dz.colwise().sum();
  return dz * l.W.transpose();
}

Matrix linear_input_grad(const Linear& l, const Matrix& dz) { return dz * l.W.transpose(); }

// log(1 - tanh(z)^2), stable for large |z|
Matrix log_one_minus_tanh_sq(const Matrix& z) {
  // 2 * (log 2 - z - softplus(-2z))
  const Matrix sp = softplus(-2.0 * z);
  return 2.0 * ((std::log(2.0) - z.array()) - sp.array()).matrix();
}

}  // namespace

Matrix softplus(const Matrix& x) {
  // max(x,0) + log(1 + exp(-|x|)); the log/exp forms are SIMD-vectorized
  return (x.array().max(0.0) + (1.0 + (-x.array().abs()).exp()).log()).matrix();
}

Matrix softplus_grad(const Matrix& x) {
  // sigmoid(x)
  return (0.5 * (1.0 + (0.5 * x.array()).tanh())).matrix();
}

Mlp Mlp::create(int input_dim, int width, int depth, RngStream& rng) {
  Mlp net;
  int in = input_dim;
  for (int i = 0; i < depth; ++i) {
    net.layers.push_back(init_linear(in, width, rng));
    in = width;
  }
  return net;
}

Linear zeros_like(const Linear& l) {
  return Linear{Matrix::Zero(l.W.rows(), l.W.cols()), Matrix::Zero(1, l.b.cols())};
}

Mlp zeros_like(const Mlp& net) {
  Mlp g;
  g.layers.reserve(net.layers.size());
  for (const Linear& l : net.layers) g.layers.push_back(zeros_like(l));
  return g;
}

Matrix mlp_forward(const Mlp& net, const Matrix& x, MlpCache* cache) {
  if (cache == nullptr) {
    Matrix h = x;
    for (const Linear& l : net.layers) h = softplus(linear_forward(l, h));
    return h;
  }
  cache->inputs.clear();
  cache->preact.clear();
  Matrix h = x;
  for (const Linear& l : net.layers) {
    cache->inputs.push_back(std::move(h));
    cache->preact.push_back(linear_forward(l, cache->inputs.back()));
    h = softplus(cache->preact.back());
  }
  cache->output = std::move(h);
  return cache->output;
}

Matrix mlp_backward(const Mlp& net, const MlpCache& cache, const Matrix& d_out, Mlp& grads) {
  Matrix d = d_out;
  for (int i = static_cast<int>(net.layers.size()) - 1; i >= 0; --i) {
    const Matrix dz = d.cwiseProduct(softplus_grad(cache.preact[i]));
    d = linear_backward(net.layers[i], cache.inputs[i], dz, grads.layers[i]);
  }
  return d;
}

PolicyNet PolicyNet::create(int obs_dim, int act_dim, int width, int depth, RngStream& rng) {
  PolicyNet net;
  net.trunk = Mlp::create(obs_dim, width, depth, rng);
  // small output layers keep initial actions near zero
  net.mean_head = init_linear(width, act_dim, rng, 0.01);
  net.logstd_head = init_linear(width, act_dim, rng, 0.01);
  return net;
}

PolicyGrads zeros_like(const PolicyNet& net) {
  return PolicyGrads{zeros_like(net.trunk), zeros_like(net.mean_head),
                     zeros_like(net.logstd_head)};
}

void policy_forward(const PolicyNet& net, const Matrix& obs, PolicyForward& fwd) {
  mlp_forward(net.trunk, obs, &fwd.trunk_cache);
  fwd.mean = linear_forward(net.mean_head, fwd.trunk_cache.output);
  fwd.log_std_raw = linear_forward(net.logstd_head, fwd.trunk_cache.output);
  fwd.log_std = fwd.log_std_raw.array().max(kLogStdMin).min(kLogStdMax).matrix();
  fwd.std = fwd.log_std.array().exp().matrix();
}

PolicySample policy_sample_batch(const PolicyForward& fwd, const Matrix& eps) {
  PolicySample s;
  s.z = fwd.mean + fwd.std.cwiseProduct(eps);
  s.action = s.z.array().tanh().matrix();
  const Matrix gauss = (-0.5 * eps.array().square() - fwd.log_std.array() - kHalfLog2Pi).matrix();
  const Matrix corr = log_one_minus_tanh_sq(s.z);
  s.log_prob = (gauss - corr).rowwise().sum();
  return s;
}

std::pair<Eigen::Vector2d, double> policy_sample(const PolicyNet& net,
                                                 const Eigen::VectorXd& observation,
                                                 RngStream& rng, bool deterministic) {
  PolicyForward fwd;
  policy_forward(net, observation.transpose(), fwd);
  const int a_dim = net.act_dim();
  Matrix eps = Matrix::Zero(1, a_dim);
  if (!deterministic) {
    for (int d = 0; d < a_dim; ++d) eps(0, d) = rng.normal();
  }
  const PolicySample s = policy_sample_batch(fwd, eps);
  Eigen::Vector2d action;
  action[0] = s.action(0, 0);
  action[1] = s.action(0, 1);
  return {action, s.log_prob[0]};
}

Eigen::VectorXd policy_log_prob(const PolicyForward& fwd, const Matrix& actions, Matrix* d_mean,
                                Matrix* d_logstd) {
  // pre-image of the squashed action, clipped away from +-1
  const Matrix a = actions.array().min(1.0 - 1e-6).max(-1.0 + 1e-6).matrix();
  const Matrix z = a.array().atanh().matrix();
  const Matrix w = (z - fwd.mean).cwiseQuotient(fwd.std);

  const Matrix gauss = (-0.5 * w.array().square() - fwd.log_std.array() - kHalfLog2Pi).matrix();
  const Matrix corr = log_one_minus_tanh_sq(z);
  Eigen::VectorXd log_prob = (gauss - corr).rowwise().sum();

  if (d_mean) *d_mean = w.cwiseQuotient(fwd.std);
  if (d_logstd) *d_logstd = (w.array().square() - 1.0).matrix();
  return log_prob;
}

void policy_backward(const PolicyNet& net, const PolicyForward& fwd, const Matrix& d_mean,
                     const Matrix& d_logstd_raw, PolicyGrads& grads) {
  Matrix d_hidden =
      linear_backward(net.mean_head, fwd.trunk_cache.output, d_mean, grads.mean_head);
  d_hidden += linear_backward(net.logstd_head, fwd.trunk_cache.output, d_logstd_raw,
                              grads.logstd_head);
  mlp_backward(net.trunk, fwd.trunk_cache, d_hidden, grads.trunk);
}

CriticNet CriticNet::create(int obs_dim, int act_dim, int width, int depth, int n_quantiles,
                            RngStream& rng) {
  CriticNet net;
  net.trunk = Mlp::create(obs_dim + act_dim, width, depth, rng);
  net.out = init_linear(width, n_quantiles, rng);
  return net;
}

CriticGrads zeros_like(const CriticNet& net) {
  return CriticGrads{zeros_like(net.trunk), zeros_like(net.out)};
}

void critic_forward(const CriticNet& net, const Matrix& obs, const Matrix& act,
                    CriticForward& fwd) {
  fwd.input.resize(obs.rows(), obs.cols() + act.cols());
  fwd.input << obs, act;
  mlp_forward(net.trunk, fwd.input, &fwd.trunk_cache);
  fwd.quantiles = linear_forward(net.out, fwd.trunk_cache.output);
}

Matrix critic_backward(const CriticNet& net, const CriticForward& fwd, const Matrix& d_quantiles,
                       CriticGrads* grads) {
  if (grads != nullptr) {
    const Matrix d_hidden =
        linear_backward(net.out, fwd.trunk_cache.output, d_quantiles, grads->out);
    return mlp_backward(net.trunk, fwd.trunk_cache, d_hidden, grads->trunk);
  }
  // input gradient only (frozen parameters): skip the weight accumulations
  Matrix d = linear_input_grad(net.out, d_quantiles);
  for (int i = static_cast<int>(net.trunk.layers.size()) - 1; i >= 0; --i) {
    const Matrix dz = d.cwiseProduct(softplus_grad(fwd.trunk_cache.preact[i]));
    d = linear_input_grad(net.trunk.layers[i], dz);
  }
  return d;
}

double quantile_huber_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& targets,
                           double kappa) {
  const int n = static_cast<int>(pred.size());
  const int m = static_cast<int>(targets.size());
  if (n < 1 || m < 1) throw std::invalid_argument("quantile_huber_loss: empty inputs");
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double tau = (2.0 * i + 1.0) / (2.0 * n);
    for (int j = 0; j < m; ++j) {
      const double u = targets[j] - pred[i];
      const double huber =
          (std::abs(u) <= kappa) ? 0.5 * u * u : kappa * (std::abs(u) - 0.5 * kappa);
      const double weight = std::abs(tau - (u < 0.0 ? 1.0 : 0.0));
      acc += weight * huber / kappa;
    }
  }
  return acc / (n * m);
}

double quantile_huber_loss_batch(const Matrix& pred, const Matrix& targets, double kappa,
                                 Matrix* d_pred) {
  const int b = static_cast<int>(pred.rows());
  const int n = static_cast<int>(pred.cols());
  const int m = static_cast<int>(targets.cols());
  if (d_pred) *d_pred = Matrix::Zero(b, n);

  const double scale = 1.0 / (static_cast<double>(b) * n * m);
  double acc = 0.0;
  for (int r = 0; r < b; ++r) {
    for (int i = 0; i < n; ++i) {
      const double tau = (2.0 * i + 1.0) / (2.0 * n);
      const double p = pred(r, i);
      double dp = 0.0;
      for (int j = 0; j < m; ++j) {
        const double u = targets(r, j) - p;
        const double au = std::abs(u);
        const double weight = std::abs(tau - (u < 0.0 ? 1.0 : 0.0));
        if (au <= kappa) {
          acc += weight * 0.5 * u * u / kappa;
          dp += -weight * u / kappa;
        } else {
          acc += weight * (au - 0.5 * kappa);
          dp += -weight * (u > 0.0 ? 1.0 : -1.0);
        }
      }
      if (d_pred) (*d_pred)(r, i) = dp * scale;
    }
  }
  return acc * scale;
}

double squared_error_loss_batch(const Matrix& pred, const Matrix& targets, Matrix* d_pred) {
  const double count = static_cast<double>(pred.rows() * pred.cols());
  const Matrix diff = pred - targets;
  if (d_pred) *d_pred = 2.0 * diff / count;
  return diff.array().square().sum() / count;
}

void Adam::init(const std::vector<Matrix*>& params) {
  m.clear();
  v.clear();
  step_count = 0;
  for (const Matrix* p : params) {
    m.push_back(Matrix::Zero(p->rows(), p->cols()));
    v.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
}

void Adam::step(const std::vector<Matrix*>& params, const std::vector<Matrix*>& grads) {
  if (params.size() != m.size()) throw std::runtime_error("adam: parameter count changed");
  ++step_count;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = *grads[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * g.cwiseProduct(g);
    const Matrix m_hat = m[i] / bc1;
    const Matrix v_hat = v[i] / bc2;
    params[i]->array() -= lr * m_hat.array() / (v_hat.array().sqrt() + eps);
  }
}

std::vector<Matrix*> flatten(Mlp& net) {
  std::vector<Matrix*> out;
  for (Linear& l : net.layers) {
    out.push_back(&l.W);
    out.push_back(&l.b);
  }
  return out;
}

std::vector<Matrix*> flatten(PolicyNet& net) {
  std::vector<Matrix*> out = flatten(net.trunk);
  out.push_back(&net.mean_head.W);
  out.push_back(&net.mean_head.b);
  out.push_back(&net.logstd_head.W);
  out.push_back(&net.logstd_head.b);
  return out;
}

std::vector<Matrix*> flatten(PolicyGrads& grads) {
  std::vector<Matrix*> out = flatten(grads.trunk);
  out.push_back(&grads.mean_head.W);
  out.push_back(&grads.mean_head.b);
  out.push_back(&grads.logstd_head.W);
  out.push_back(&grads.logstd_head.b);
  return out;
}

std::vector<Matrix*> flatten(CriticNet& net) {
  std::vector<Matrix*> out = flatten(net.trunk);
  out.push_back(&net.out.W);
  out.push_back(&net.out.b);
  return out;
}

std::vector<Matrix*> flatten(CriticGrads& grads) {
  std::vector<Matrix*> out = flatten(grads.trunk);
  out.push_back(&grads.out.W);
  out.push_back(&grads.out.b);
  return out;
}

void soft_update(CriticNet& target, const CriticNet& online, double tau) {
  for (std::size_t i = 0; i < target.trunk.layers.size(); ++i) {
    target.trunk.layers[i].W =
        (1.0 - tau) * target.trunk.layers[i].W + tau * online.trunk.layers[i].W;
    target.trunk.layers[i].b =
        (1.0 - tau) * target.trunk.layers[i].b + tau * online.trunk.layers[i].b;
  }
  target.out.W = (1.0 - tau) * target.out.W + tau * online.out.W;
  target.out.b = (1.0 - tau) * target.out.b + tau * online.out.b;
}

}  // namespace apex
