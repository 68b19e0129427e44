#include "apex/speed_profile.hpp"

#include <algorithm>
#include <cmath>

namespace apex {

double power_limited_speed(const VehicleParams& params) {
  // solve drag*v^3 + roll*v = P by bisection
  double lo = 1.0, hi = 200.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double demand = params.drag_coeff * mid * mid * mid + params.rolling_resist * mid;
    if (demand < params.max_engine_power) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<double> quasi_steady_speed_profile(const std::vector<double>& s,
                                               const std::vector<double>& curvature,
                                               double total_length,
                                               const VehicleParams& params,
                                               const VehicleSetup& setup,
                                               double grip_margin) {
  const int n = static_cast<int>(s.size());
  const double mu_eff = params.base_mu *
                        std::min(setup.mu_front_scale, setup.mu_rear_scale) * grip_margin;
  const double a_lat_max = mu_eff * kGravity;
  const double v_cap = power_limited_speed(params);

  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) {
    const double k = std::max(std::abs(curvature[i]), 1e-6);
    v[i] = std::min(std::sqrt(a_lat_max / k), v_cap);
  }

  auto ds_between = [&](int i) {
    const int j = (i + 1) % n;
    double ds = s[j] - s[i];
    if (ds <= 0.0) ds += total_length;
    return ds;
  };

  // alternate forward (acceleration) and backward (braking) passes; two
  // wrapped sweeps each are enough for the monotone fixed point
  for (int pass = 0; pass < 3; ++pass) {
    for (int rep = 0; rep < 2; ++rep) {
      for (int i = 0; i < n; ++i) {
        const int j = (i + 1) % n;
        const double k = std::max(std::abs(curvature[i]), 1e-6);
        const double a_lat = k * v[i] * v[i];
        const double circle = std::sqrt(std::max(0.0, a_lat_max * a_lat_max - a_lat * a_lat));
        const double f_drive = std::min(params.max_drive_force,
                                        params.max_engine_power / std::max(v[i], 1.0));
        const double a_engine =
            (f_drive - params.drag_coeff * v[i] * v[i] - params.rolling_resist) / params.mass;
        const double a_acc = std::max(0.0, std::min(circle, a_engine));
        v[j] = std::min(v[j], std::sqrt(v[i] * v[i] + 2.0 * a_acc * ds_between(i)));
      }
    }
    for (int rep = 0; rep < 2; ++rep) {
      for (int i = n - 1; i >= 0; --i) {
        const int j = (i + 1) % n;
        const double k = std::max(std::abs(curvature[j]), 1e-6);
        const double a_lat = k * v[j] * v[j];
        const double circle = std::sqrt(std::max(0.0, a_lat_max * a_lat_max - a_lat * a_lat));
        const double a_brk =
            circle + (params.drag_coeff * v[j] * v[j] + params.rolling_resist) / params.mass;
        v[i] = std::min(v[i], std::sqrt(v[j] * v[j] + 2.0 * a_brk * ds_between(i)));
      }
    }
  }
  return v;
}

double profile_lap_time(const std::vector<double>& s, const std::vector<double>& v,
                        double total_length) {
  const int n = static_cast<int>(s.size());
  double t = 0.0;
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    double ds = s[j] - s[i];
    if (ds <= 0.0) ds += total_length;
    t += ds * 0.5 * (1.0 / std::max(v[i], 0.1) + 1.0 / std::max(v[j], 0.1));
  }
  return t;
}

}  // namespace apex
