#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "apex/env.hpp"
#include "apex/nn.hpp"
#include "apex/rng.hpp"

namespace apex {

struct Batch {
  Matrix obs;       // B x obs_dim
  Matrix action;    // B x act_dim
  Eigen::VectorXd reward;
  Matrix next_obs;
  Eigen::VectorXd done;
};

// Ring buffer of transitions with uniform sampling (with replacement).
// Observations are stored in float32 blocks to keep a million-transition
// buffer affordable; storage grows on demand up to the capacity.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int obs_dim, int act_dim);

  void push(const Eigen::VectorXd& obs, const Eigen::Vector2d& action, double reward,
            const Eigen::VectorXd& next_obs, bool done);
  Batch sample(int n, RngStream& rng) const;
  // gather specific indices (used by batch mixing)
  void gather(const std::vector<std::size_t>& idx, Batch& out) const;

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t slot_for_push();

  std::size_t capacity_;
  int obs_dim_;
  int act_dim_;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;

  static constexpr std::size_t kChunk = 16384;
  // chunked column storage: chunk c holds transitions [c*kChunk, ...)
  std::vector<Eigen::MatrixXf> obs_chunks_;
  std::vector<Eigen::MatrixXf> next_obs_chunks_;
  std::vector<Eigen::MatrixXf> act_chunks_;
  std::vector<Eigen::VectorXf> reward_chunks_;
  std::vector<std::vector<std::uint8_t>> done_chunks_;
};

}  // namespace apex
