#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace apex {

// Versioned binary container of named tensors and scalars. Raw little-endian
// doubles, so save/load round trips are bit-exact.
struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;
  std::map<std::string, double> scalars;
  std::map<std::string, std::string> strings;

  void add(const std::string& name, const Eigen::MatrixXd& t) { tensors.emplace_back(name, t); }
  const Eigen::MatrixXd& tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const;
  double scalar(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace apex
