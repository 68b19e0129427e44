#pragma once

#include <vector>

#include "apex/vehicle.hpp"

namespace apex {

// Quasi-steady speed profile over a closed path sampled at arc positions s
// (strictly increasing, wrapping at total_length). Lateral grip is limited by
// the weaker axle, longitudinal capability by the remaining friction circle,
// the power envelope and (for braking) drag. grip_margin < 1 leaves headroom
// the way a careful driver would.
std::vector<double> quasi_steady_speed_profile(const std::vector<double>& s,
                                               const std::vector<double>& curvature,
                                               double total_length,
                                               const VehicleParams& params,
                                               const VehicleSetup& setup,
                                               double grip_margin = 0.95);

// top speed from the power/drag equilibrium
double power_limited_speed(const VehicleParams& params);

// lap time implied by a speed profile (trapezoidal in 1/v)
double profile_lap_time(const std::vector<double>& s, const std::vector<double>& v,
                        double total_length);

}  // namespace apex
