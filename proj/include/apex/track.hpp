#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

namespace apex {

enum class Side { Left, Right };

struct TrackStation {
  double s = 0.0;  // arc length from start/finish, m
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // centerline tangent, rad
  double half_width_left = 0.0;
  double half_width_right = 0.0;
};

// Position of a vehicle in track-relative (curvilinear) coordinates.
// e_norm is the lateral offset scaled so that +1/-1 are the left/right edges.
struct CurvilinearPose {
  double u = 0.0;             // arc length along centerline, wrapped to [0, L)
  double v = 0.0;             // signed lateral offset, positive left
  double e_norm = 0.0;        // v / half width on the matching side
  double heading_error = 0.0; // vehicle heading minus centerline tangent, (-pi, pi]
};

// Closed circuit centerline with per-station half widths. The centerline is a
// closed Catmull-Rom spline through the input points, parameterized by arc
// length, which makes curvilinear projection an exact inverse of position_of
// inside the tubular neighbourhood of the track. Immutable after construction.
class TrackModel {
 public:
  static constexpr int kEdgePoints = 15;
  static constexpr double kForwardHorizonSeconds = 5.0;
  static constexpr double kMinViewSpeed = 10.0;  // m/s floor for edge spacing
  static constexpr double kHintWindow = 50.0;    // m, projection continuity window
  static constexpr double kMaxStationSpacing = 5.0;

  static TrackModel from_points(std::string name,
                                std::vector<Eigen::Vector2d> points,
                                std::vector<double> half_width_left,
                                std::vector<double> half_width_right);

  const std::string& name() const { return name_; }
  double total_length() const { return total_length_; }
  const std::vector<TrackStation>& stations() const { return stations_; }

  double wrap(double u) const;                 // into [0, L)
  double wrap_delta(double du) const;          // into [-L/2, L/2)

  Eigen::Vector2d position(double u) const;    // centerline point
  Eigen::Vector2d tangent(double u) const;     // unit tangent
  double heading(double u) const;
  double curvature(double u) const;            // station-heading finite differences
  double half_width(double u, Side side) const;

  // centerline point offset by v along the left normal
  Eigen::Vector2d position_of(double u, double v) const;

  // Nearest-point projection onto the centerline. Returns nullopt when the
  // point lies farther than 3x the local track width from the centerline.
  std::optional<CurvilinearPose> project(double x, double y, double vehicle_heading,
                                         std::optional<double> hint_u = std::nullopt) const;

  struct EdgeView {
    // edge points in the vehicle body frame (x forward, y left)
    std::vector<Eigen::Vector2d> left;
    std::vector<Eigen::Vector2d> right;
  };
  EdgeView edge_points(const CurvilinearPose& pose, double vehicle_heading, double speed) const;

 private:
  TrackModel() = default;

  struct Segment {
    // cubic coefficients: C(t) = c0 + c1 t + c2 t^2 + c3 t^3, t in [0,1]
    Eigen::Vector2d c0, c1, c2, c3;
    double s_begin = 0.0;  // arc length at t=0
    double length = 0.0;
  };

  Eigen::Vector2d seg_point(const Segment& g, double t) const {
    return g.c0 + t * (g.c1 + t * (g.c2 + t * g.c3));
  }
  Eigen::Vector2d seg_deriv(const Segment& g, double t) const {
    return g.c1 + t * (2.0 * g.c2 + t * 3.0 * g.c3);
  }
  Eigen::Vector2d seg_deriv2(const Segment& g, double t) const {
    return 2.0 * g.c2 + t * 6.0 * g.c3;
  }
  double seg_arc(const Segment& g, double t) const;       // arc length from 0 to t
  double seg_param_at(const Segment& g, double ds) const; // t with seg_arc(t)=ds

  // (segment index, local t) at arc length u
  std::pair<int, double> locate(double u) const;

  std::string name_;
  std::vector<TrackStation> stations_;
  std::vector<Segment> segments_;
  std::vector<double> station_curvature_;
  double total_length_ = 0.0;
};

// Loads and validates a track JSON document:
//   {"name": ..., "closed": true,
//    "points": [{"x":..,"y":..,"half_width_left":..,"half_width_right":..}, ...],
//    "total_length": optional}
// Throws std::runtime_error on parse/validation failure.
TrackModel load_track(const std::string& path);

double wrap_to_pi(double angle);

}  // namespace apex
