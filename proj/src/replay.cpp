#include "apex/replay.hpp"

#include <stdexcept>

namespace apex {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int obs_dim, int act_dim)
    : capacity_(capacity), obs_dim_(obs_dim), act_dim_(act_dim) {
  if (capacity_ == 0) throw std::invalid_argument("replay capacity must be positive");
}

std::size_t ReplayBuffer::slot_for_push() {
  const std::size_t slot = cursor_;
  cursor_ = (cursor_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;

  const std::size_t chunk = slot / kChunk;
  while (obs_chunks_.size() <= chunk) {
    const std::size_t remaining = capacity_ - obs_chunks_.size() * kChunk;
    const std::size_t rows = std::min(kChunk, remaining);
    obs_chunks_.emplace_back(Eigen::MatrixXf::Zero(rows, obs_dim_));
    next_obs_chunks_.emplace_back(Eigen::MatrixXf::Zero(rows, obs_dim_));
    act_chunks_.emplace_back(Eigen::MatrixXf::Zero(rows, act_dim_));
    reward_chunks_.emplace_back(Eigen::VectorXf::Zero(rows));
    done_chunks_.emplace_back(rows, 0);
  }
  return slot;
}

void ReplayBuffer::push(const Eigen::VectorXd& obs, const Eigen::Vector2d& action, double reward,
                        const Eigen::VectorXd& next_obs, bool done) {
  const std::size_t slot = slot_for_push();
  const std::size_t c = slot / kChunk;
  const auto r = static_cast<Eigen::Index>(slot % kChunk);
  obs_chunks_[c].row(r) = obs.cast<float>().transpose();
  next_obs_chunks_[c].row(r) = next_obs.cast<float>().transpose();
  act_chunks_[c].row(r) = action.cast<float>().transpose();
  reward_chunks_[c][r] = static_cast<float>(reward);
  done_chunks_[c][static_cast<std::size_t>(r)] = done ? 1 : 0;
}

Batch ReplayBuffer::sample(int n, RngStream& rng) const {
  if (size_ == 0) throw std::runtime_error("cannot sample from an empty replay buffer");
  std::vector<std::size_t> idx(static_cast<std::size_t>(n));
  for (auto& i : idx) i = rng.uniform_index(size_);
  Batch batch;
  gather(idx, batch);
  return batch;
}

void ReplayBuffer::gather(const std::vector<std::size_t>& idx, Batch& out) const {
  const int n = static_cast<int>(idx.size());
  out.obs.resize(n, obs_dim_);
  out.next_obs.resize(n, obs_dim_);
  out.action.resize(n, act_dim_);
  out.reward.resize(n);
  out.done.resize(n);
  for (int k = 0; k < n; ++k) {
    const std::size_t slot = idx[static_cast<std::size_t>(k)];
    if (slot >= size_) throw std::out_of_range("replay index out of range");
    const std::size_t c = slot / kChunk;
    const auto r = static_cast<Eigen::Index>(slot % kChunk);
    out.obs.row(k) = obs_chunks_[c].row(r).cast<double>();
    out.next_obs.row(k) = next_obs_chunks_[c].row(r).cast<double>();
    out.action.row(k) = act_chunks_[c].row(r).cast<double>();
    out.reward[k] = static_cast<double>(reward_chunks_[c][r]);
    out.done[k] = static_cast<double>(done_chunks_[c][static_cast<std::size_t>(r)]);
  }
}

}  // namespace apex
