#include "apex/vehicle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace apex {

// brush-type lateral force: monotone up to full saturation at 3*Fmax/C
double brush_lateral(double alpha, double stiffness, double f_max) {
  const double phi = stiffness * alpha;
  const double cap = 3.0 * f_max;
  if (std::abs(phi) >= cap) return f_max * ((phi >= 0.0) ? 1.0 : -1.0);
  const double a = std::abs(phi);
  return phi * (1.0 - a / cap + (a * a) / (cap * cap * 3.0));
}

double brush_inverse(double force, double stiffness, double f_max) {
  const double target = std::clamp(force, 0.0, f_max * (1.0 - 1e-9));
  double lo = 0.0;
  double hi = 3.0 * f_max / stiffness;  // slip angle of peak force
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (brush_lateral(mid, stiffness, f_max) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

namespace {

double ellipse_limit(double fy, double f_max) {
  const double ratio = std::min(std::abs(fy) / f_max, 1.0);
  return f_max * std::sqrt(std::max(0.0, 1.0 - ratio * ratio));
}

struct Derivative {
  double dx, dy, dheading, dvx, dvy, dyaw_rate;
  double ax_body, ay_body, yaw_acc;
  TireReport report;
};

Derivative dynamics(const VehicleState& s, const VehicleSetup& setup, const VehicleParams& p,
                    double steer, double throttle, double brake) {
  VehicleState local = s;
  local.steer_angle = steer;

  const double drive = throttle * std::min(p.max_drive_force,
                                           p.max_engine_power / std::max(s.vx, 1.0));
  const double brk = brake * p.max_brake_force;

  const AxleForces f = tire_forces(local, setup, p, drive, brk);

  const double drag = p.drag_coeff * s.vx * s.vx;
  const double roll = (s.vx > 1e-3) ? p.rolling_resist : 0.0;
  const double fx_total = f.fx_front + f.fx_rear - drag - roll;

  Derivative d;
  d.dx = s.vx * std::cos(s.heading) - s.vy * std::sin(s.heading);
  d.dy = s.vx * std::sin(s.heading) + s.vy * std::cos(s.heading);
  d.dheading = s.yaw_rate;
  d.dvx = fx_total / p.mass + s.yaw_rate * s.vy;
  d.dvy = (f.fy_front + f.fy_rear) / p.mass - s.yaw_rate * s.vx;
  d.dyaw_rate = (p.cg_to_front_axle * f.fy_front - p.cg_to_rear_axle * f.fy_rear) / p.yaw_inertia;
  d.ax_body = fx_total / p.mass;
  d.ay_body = (f.fy_front + f.fy_rear) / p.mass;
  d.yaw_acc = d.dyaw_rate;
  d.report = f.report;
  return d;
}

}  // namespace

bool VehicleState::all_finite() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(heading) && std::isfinite(vx) &&
         std::isfinite(vy) && std::isfinite(yaw_rate) && std::isfinite(steer_angle) &&
         std::isfinite(ax) && std::isfinite(ay) && std::isfinite(yaw_accel);
}

void VehicleParams::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0)) throw std::runtime_error(std::string("vehicle: ") + what + " must be positive");
  };
  positive(mass, "mass");
  positive(yaw_inertia, "yaw_inertia");
  positive(cg_to_front_axle, "cg_to_front_axle");
  positive(cg_to_rear_axle, "cg_to_rear_axle");
  positive(base_mu, "base_mu");
  positive(cornering_stiffness_front, "cornering_stiffness_front");
  positive(cornering_stiffness_rear, "cornering_stiffness_rear");
  positive(max_engine_power, "max_engine_power");
  positive(max_drive_force, "max_drive_force");
  positive(max_brake_force, "max_brake_force");
  positive(max_steer_angle, "max_steer_angle");
  positive(steer_rate_limit, "steer_rate_limit");
  positive(drag_coeff, "drag_coeff");
  positive(rolling_resist, "rolling_resist");
  if (!(peak_slip_front > 0.02 && peak_slip_front < 0.3) ||
      !(peak_slip_rear > 0.02 && peak_slip_rear < 0.3)) {
    throw std::runtime_error("vehicle: peak slip angles must lie in (0.02, 0.3) rad");
  }
}

ActuatorCommand map_action(const Eigen::Vector2d& action, const VehicleParams& params) {
  const double steer_cmd = std::clamp(action[0], -1.0, 1.0);
  const double long_cmd = std::clamp(action[1], -1.0, 1.0);
  ActuatorCommand cmd;
  cmd.target_steer = steer_cmd * params.max_steer_angle;
  cmd.throttle = std::clamp(long_cmd / 0.5, 0.0, 1.0);
  cmd.brake = std::clamp(-long_cmd, 0.0, 1.0);
  return cmd;
}

AxleForces tire_forces(const VehicleState& state, const VehicleSetup& setup,
                       const VehicleParams& params, double drive_force, double brake_force) {
  const double vx = std::max(state.vx, 0.1);
  const double a = params.cg_to_front_axle;
  const double b = params.cg_to_rear_axle;

  AxleForces out;
  out.report.alpha_front =
      state.steer_angle - std::atan((state.vy + a * state.yaw_rate) / vx);
  out.report.alpha_rear = -std::atan((state.vy - b * state.yaw_rate) / vx);

  const double fmax_f = setup.mu_front_scale * params.base_mu * params.static_load_front();
  const double fmax_r = setup.mu_rear_scale * params.base_mu * params.static_load_rear();

  out.fy_front = brush_lateral(out.report.alpha_front, params.cornering_stiffness_front, fmax_f);
  out.fy_rear = brush_lateral(out.report.alpha_rear, params.cornering_stiffness_rear, fmax_r);

  out.report.front_sat =
      std::abs(params.cornering_stiffness_front * out.report.alpha_front) >= 3.0 * fmax_f;
  out.report.rear_sat =
      std::abs(params.cornering_stiffness_rear * out.report.alpha_rear) >= 3.0 * fmax_r;

  // slip thresholds sit slightly above the peak-force slip angle per axle
  const double thr_f = 1.1 * params.peak_slip_front;
  const double thr_r = 1.1 * params.peak_slip_rear;
  out.report.alpha_front_excess = std::max(std::abs(out.report.alpha_front) - thr_f, 0.0);
  out.report.alpha_rear_excess = std::max(std::abs(out.report.alpha_rear) - thr_r, 0.0);

  // friction-ellipse clamp on longitudinal forces (stands in for ABS/TC);
  // braking splits 60/40 front/rear, drive is rear only
  const double brake_front = 0.6 * brake_force;
  const double brake_rear = 0.4 * brake_force;
  out.fx_front = -std::min(brake_front, ellipse_limit(out.fy_front, fmax_f));
  const double rear_request = drive_force - brake_rear;
  const double rear_cap = ellipse_limit(out.fy_rear, fmax_r);
  out.fx_rear = std::clamp(rear_request, -rear_cap, rear_cap);
  return out;
}

StepOutput step(const VehicleState& state, const VehicleSetup& setup, const VehicleParams& params,
                const Eigen::Vector2d& action, double dt_agent, int substeps) {
  const ActuatorCommand cmd = map_action(action, params);
  const double dt = dt_agent / substeps;

  VehicleState s = state;
  s.throttle = cmd.throttle;
  s.brake = cmd.brake;

  TireReport last_report;
  for (int k = 0; k < substeps; ++k) {
    const double d_steer = std::clamp(cmd.target_steer - s.steer_angle,
                                      -params.steer_rate_limit * dt, params.steer_rate_limit * dt);
    s.steer_angle += d_steer;

    // RK4 on (x, y, heading, vx, vy, yaw_rate) with steering fixed
    auto eval = [&](const VehicleState& base, const Derivative& d, double h) {
      VehicleState n = base;
      n.x += d.dx * h;
      n.y += d.dy * h;
      n.heading += d.dheading * h;
      n.vx += d.dvx * h;
      n.vy += d.dvy * h;
      n.yaw_rate += d.dyaw_rate * h;
      return n;
    };
    const Derivative k1 = dynamics(s, setup, params, s.steer_angle, s.throttle, s.brake);
    const Derivative k2 =
        dynamics(eval(s, k1, 0.5 * dt), setup, params, s.steer_angle, s.throttle, s.brake);
    const Derivative k3 =
        dynamics(eval(s, k2, 0.5 * dt), setup, params, s.steer_angle, s.throttle, s.brake);
    const Derivative k4 = dynamics(eval(s, k3, dt), setup, params, s.steer_angle, s.throttle, s.brake);

    s.x += dt / 6.0 * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
    s.y += dt / 6.0 * (k1.dy + 2.0 * k2.dy + 2.0 * k3.dy + k4.dy);
    s.heading += dt / 6.0 * (k1.dheading + 2.0 * k2.dheading + 2.0 * k3.dheading + k4.dheading);
    s.vx += dt / 6.0 * (k1.dvx + 2.0 * k2.dvx + 2.0 * k3.dvx + k4.dvx);
    s.vy += dt / 6.0 * (k1.dvy + 2.0 * k2.dvy + 2.0 * k3.dvy + k4.dvy);
    s.yaw_rate +=
        dt / 6.0 * (k1.dyaw_rate + 2.0 * k2.dyaw_rate + 2.0 * k3.dyaw_rate + k4.dyaw_rate);
    s.vx = std::max(s.vx, 0.0);

    if (k == substeps - 1) {
      const Derivative fin = dynamics(s, setup, params, s.steer_angle, s.throttle, s.brake);
      s.ax = fin.ax_body;
      s.ay = fin.ay_body;
      s.yaw_accel = fin.yaw_acc;
      last_report = fin.report;
    }
  }
  return {s, last_report};
}

}  // namespace apex
