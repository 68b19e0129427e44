#pragma once

#include <Eigen/Core>
#include <string>

namespace apex {

constexpr double kGravity = 9.81;    // m/s^2
constexpr double kAgentPeriod = 0.1; // s, 10 Hz agent interaction
constexpr int kSubsteps = 20;        // 200 Hz integration under the agent period

// Tire friction scale factors defining one test condition.
struct VehicleSetup {
  double mu_front_scale = 1.0;
  double mu_rear_scale = 1.0;
  std::string setup_id = "baseline";
};

struct VehicleParams {
  double mass = 0.0;               // kg
  double yaw_inertia = 0.0;        // kg m^2
  double cg_to_front_axle = 0.0;   // m
  double cg_to_rear_axle = 0.0;    // m
  double base_mu = 0.0;
  double cornering_stiffness_front = 0.0;  // N/rad
  double cornering_stiffness_rear = 0.0;   // N/rad
  double peak_slip_front = 0.0;    // rad, slip angle of peak lateral force
  double peak_slip_rear = 0.0;     // rad
  double max_engine_power = 0.0;   // W
  double max_drive_force = 0.0;    // N
  double max_brake_force = 0.0;    // N
  double max_steer_angle = 0.0;    // rad
  double steer_rate_limit = 0.0;   // rad/s
  double drag_coeff = 0.0;         // N/(m/s)^2
  double rolling_resist = 0.0;     // N

  double wheelbase() const { return cg_to_front_axle + cg_to_rear_axle; }
  double static_load_front() const {
    return mass * kGravity * cg_to_rear_axle / wheelbase();
  }
  double static_load_rear() const {
    return mass * kGravity * cg_to_front_axle / wheelbase();
  }
  // linear-regime understeer gradient, rad s^2/m
  double understeer_gradient() const {
    return mass / wheelbase() *
           (cg_to_rear_axle / cornering_stiffness_front -
            cg_to_front_axle / cornering_stiffness_rear);
  }
  void validate() const;  // throws on invalid values
};

struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double vx = 0.0;        // longitudinal speed, m/s (>= 0)
  double vy = 0.0;        // lateral speed, m/s
  double yaw_rate = 0.0;  // rad/s
  double steer_angle = 0.0;
  double throttle = 0.0;
  double brake = 0.0;
  double ax = 0.0;        // last-step body accelerations
  double ay = 0.0;
  double yaw_accel = 0.0;

  double speed() const { return std::hypot(vx, vy); }
  bool all_finite() const;
};

struct TireReport {
  double alpha_front = 0.0;
  double alpha_rear = 0.0;
  double alpha_front_excess = 0.0;
  double alpha_rear_excess = 0.0;
  bool front_sat = false;
  bool rear_sat = false;
};

struct ActuatorCommand {
  double target_steer = 0.0;  // rad
  double throttle = 0.0;      // [0,1]
  double brake = 0.0;         // [0,1]
};

struct AxleForces {
  double fy_front = 0.0;  // N
  double fy_rear = 0.0;
  double fx_front = 0.0;  // braking only
  double fx_rear = 0.0;   // drive minus rear brake share
  TireReport report;
};

// Maps the normalized agent action (steer_cmd, long_cmd), each in [-1,1],
// onto actuator targets. long_cmd = 0.5 already means full throttle, and the
// agent can never apply throttle and brake together.
ActuatorCommand map_action(const Eigen::Vector2d& action, const VehicleParams& params);

// Saturating brush-type lateral force curve and its inverse on the monotone
// branch (force in [0, f_max] maps back to a slip angle).
double brush_lateral(double alpha, double stiffness, double f_max);
double brush_inverse(double force, double stiffness, double f_max);

// Axle forces from a saturating brush-type lateral curve with independently
// scaled peak grip, and friction-ellipse clamped longitudinal forces (the
// clamp stands in for ABS/TC). Brake force splits 60/40 front/rear.
AxleForces tire_forces(const VehicleState& state, const VehicleSetup& setup,
                       const VehicleParams& params, double drive_force, double brake_force);

struct StepOutput {
  VehicleState state;
  TireReport report;  // from the final substep
};

// Advances the single-track model by one agent period: applies the action
// map, slews the steering angle at the rate limit, and integrates the planar
// rigid-body equations with RK4 substeps.
StepOutput step(const VehicleState& state, const VehicleSetup& setup, const VehicleParams& params,
                const Eigen::Vector2d& action, double dt_agent = kAgentPeriod,
                int substeps = kSubsteps);

}  // namespace apex
