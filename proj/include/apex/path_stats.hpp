#pragma once

#include <vector>

namespace apex {

// Per-station statistics of demonstrated lateral position: mean and standard
// deviation of v in 1 m arc-length bins over [0, total_length). Immutable
// after construction.
struct PathStatistics {
  double bin_width = 1.0;
  double total_length = 0.0;
  int lap_count = 0;
  std::vector<double> mu;     // mean lateral offset per bin
  std::vector<double> sigma;  // standard deviation per bin

  int bin_of(double u) const;
  double mu_at(double u) const;
  double sigma_at(double u) const;

  // Squared deviation kernel of the path-tracking penalty:
  //   (v - mu(u))^2 / max(sigma(u), sigma_min)^2
  double deviation(double u, double v, double sigma_min) const;
};

}  // namespace apex
