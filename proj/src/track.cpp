#include "apex/track.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace apex {

namespace {

// 8-point Gauss-Legendre nodes/weights on [0,1]
constexpr int kGaussN = 8;
constexpr double kGaussX[kGaussN] = {
    0.01985507175123188, 0.10166676129318664, 0.2372337950418355, 0.40828267875217511,
    0.59171732124782489, 0.7627662049581645,  0.89833323870681336, 0.98014492824876812};
constexpr double kGaussW[kGaussN] = {
    0.05061426814518813, 0.11119051722668724, 0.15685332293894364, 0.18134189168918099,
    0.18134189168918099, 0.15685332293894364, 0.11119051722668724, 0.05061426814518813};

}  // namespace

double wrap_to_pi(double angle) {
  double a = std::fmod(angle + M_PI, 2.0 * M_PI);
  if (a < 0.0) a += 2.0 * M_PI;
  return a - M_PI;
}

double TrackModel::wrap(double u) const {
  double w = std::fmod(u, total_length_);
  if (w < 0.0) w += total_length_;
  return w;
}

double TrackModel::wrap_delta(double du) const {
  double w = std::fmod(du + 0.5 * total_length_, total_length_);
  if (w < 0.0) w += total_length_;
  return w - 0.5 * total_length_;
}

double TrackModel::seg_arc(const Segment& g, double t) const {
  double acc = 0.0;
  for (int i = 0; i < kGaussN; ++i) {
    acc += kGaussW[i] * seg_deriv(g, t * kGaussX[i]).norm();
  }
  return acc * t;
}

double TrackModel::seg_param_at(const Segment& g, double ds) const {
  if (ds <= 0.0) return 0.0;
  if (ds >= g.length) return 1.0;
  double t = ds / g.length;  // chord-speed initial guess
  for (int iter = 0; iter < 16; ++iter) {
    const double err = seg_arc(g, t) - ds;
    const double speed = seg_deriv(g, t).norm();
    const double dt = err / speed;
    t -= dt;
    t = std::clamp(t, 0.0, 1.0);
    if (std::abs(dt) * speed < 1e-12) break;
  }
  return t;
}

std::pair<int, double> TrackModel::locate(double u) const {
  const double uw = wrap(u);
  // binary search over segment start arcs
  int lo = 0;
  int hi = static_cast<int>(segments_.size()) - 1;
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    if (segments_[mid].s_begin <= uw) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  const Segment& g = segments_[lo];
  return {lo, seg_param_at(g, uw - g.s_begin)};
}

Eigen::Vector2d TrackModel::position(double u) const {
  auto [i, t] = locate(u);
  return seg_point(segments_[i], t);
}

Eigen::Vector2d TrackModel::tangent(double u) const {
  auto [i, t] = locate(u);
  return seg_deriv(segments_[i], t).normalized();
}

double TrackModel::heading(double u) const {
  const Eigen::Vector2d d = tangent(u);
  return std::atan2(d.y(), d.x());
}

double TrackModel::curvature(double u) const {
  const double uw = wrap(u);
  const int n = static_cast<int>(stations_.size());
  // station s values are segment starts; reuse the binary search
  int lo = 0;
  int hi = n - 1;
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    if (stations_[mid].s <= uw) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  const int i0 = lo;
  const int i1 = (lo + 1) % n;
  const double s0 = stations_[i0].s;
  double s1 = (i1 == 0) ? total_length_ : stations_[i1].s;
  const double f = (s1 > s0) ? (uw - s0) / (s1 - s0) : 0.0;
  return (1.0 - f) * station_curvature_[i0] + f * station_curvature_[i1];
}

double TrackModel::half_width(double u, Side side) const {
  const double uw = wrap(u);
  const int n = static_cast<int>(stations_.size());
  int lo = 0;
  int hi = n - 1;
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    if (stations_[mid].s <= uw) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  const int i1 = (lo + 1) % n;
  const double s0 = stations_[lo].s;
  double s1 = (i1 == 0) ? total_length_ : stations_[i1].s;
  const double f = (s1 > s0) ? (uw - s0) / (s1 - s0) : 0.0;
  const double w0 = (side == Side::Left) ? stations_[lo].half_width_left : stations_[lo].half_width_right;
  const double w1 = (side == Side::Left) ? stations_[i1].half_width_left : stations_[i1].half_width_right;
  return (1.0 - f) * w0 + f * w1;
}

Eigen::Vector2d TrackModel::position_of(double u, double v) const {
  auto [i, t] = locate(u);
  const Segment& g = segments_[i];
  const Eigen::Vector2d p = seg_point(g, t);
  const Eigen::Vector2d d = seg_deriv(g, t).normalized();
  const Eigen::Vector2d left_normal(-d.y(), d.x());
  return p + v * left_normal;
}

std::optional<CurvilinearPose> TrackModel::project(double x, double y, double vehicle_heading,
                                                   std::optional<double> hint_u) const {
  const Eigen::Vector2d p(x, y);
  const int n_seg = static_cast<int>(segments_.size());

  // candidate segments: all, or those within the hint window
  std::vector<int> candidates;
  if (hint_u.has_value()) {
    const double h = wrap(*hint_u);
    for (int i = 0; i < n_seg; ++i) {
      const Segment& g = segments_[i];
      const double mid = g.s_begin + 0.5 * g.length;
      if (std::abs(wrap_delta(mid - h)) <= kHintWindow + g.length) candidates.push_back(i);
    }
  } else {
    candidates.resize(n_seg);
    for (int i = 0; i < n_seg; ++i) candidates[i] = i;
  }

  // coarse scan
  int best_seg = -1;
  double best_t = 0.0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int i : candidates) {
    const Segment& g = segments_[i];
    for (int k = 0; k <= 4; ++k) {
      const double t = 0.25 * k;
      const double d2 = (p - seg_point(g, t)).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best_seg = i;
        best_t = t;
      }
    }
  }
  if (best_seg < 0) return std::nullopt;

  // Newton refinement over the best segment and its neighbours
  double refined_d2 = std::numeric_limits<double>::infinity();
  int refined_seg = best_seg;
  double refined_t = best_t;
  for (int off = -1; off <= 1; ++off) {
    const int i = (best_seg + off + n_seg) % n_seg;
    const Segment& g = segments_[i];
    double t = (off == 0) ? best_t : 0.5;
    for (int iter = 0; iter < 40; ++iter) {
      const Eigen::Vector2d c = seg_point(g, t);
      const Eigen::Vector2d d1 = seg_deriv(g, t);
      const Eigen::Vector2d d2v = seg_deriv2(g, t);
      const Eigen::Vector2d r = p - c;
      const double f1 = -r.dot(d1);
      const double f2 = d1.dot(d1) - r.dot(d2v);
      if (f2 <= 0.0) break;
      double step = f1 / f2;
      const double t_new = std::clamp(t - step, 0.0, 1.0);
      if (std::abs(t_new - t) < 1e-14) {
        t = t_new;
        break;
      }
      t = t_new;
    }
    const double d2 = (p - seg_point(g, t)).squaredNorm();
    if (d2 < refined_d2) {
      refined_d2 = d2;
      refined_seg = i;
      refined_t = t;
    }
  }

  const Segment& g = segments_[refined_seg];
  const Eigen::Vector2d c = seg_point(g, refined_t);
  const Eigen::Vector2d d = seg_deriv(g, refined_t).normalized();
  const Eigen::Vector2d left_normal(-d.y(), d.x());

  CurvilinearPose pose;
  pose.u = wrap(g.s_begin + seg_arc(g, refined_t));
  pose.v = left_normal.dot(p - c);

  const double track_width = half_width(pose.u, Side::Left) + half_width(pose.u, Side::Right);
  if ((p - c).norm() > 3.0 * track_width) return std::nullopt;

  pose.e_norm = (pose.v >= 0.0) ? pose.v / half_width(pose.u, Side::Left)
                                : pose.v / half_width(pose.u, Side::Right);
  pose.heading_error = wrap_to_pi(vehicle_heading - std::atan2(d.y(), d.x()));
  return pose;
}

TrackModel::EdgeView TrackModel::edge_points(const CurvilinearPose& pose, double vehicle_heading,
                                             double speed) const {
  const double d = std::max(speed, kMinViewSpeed) * kForwardHorizonSeconds / kEdgePoints;
  const Eigen::Vector2d origin = position_of(pose.u, pose.v);
  const double c = std::cos(vehicle_heading);
  const double s = std::sin(vehicle_heading);

  EdgeView view;
  view.left.reserve(kEdgePoints);
  view.right.reserve(kEdgePoints);
  for (int k = 1; k <= kEdgePoints; ++k) {
    const double uk = wrap(pose.u + k * d);
    const Eigen::Vector2d lw = position_of(uk, half_width(uk, Side::Left));
    const Eigen::Vector2d rw = position_of(uk, -half_width(uk, Side::Right));
    const Eigen::Vector2d dl = lw - origin;
    const Eigen::Vector2d dr = rw - origin;
    // world -> body: x forward, y left
    view.left.emplace_back(c * dl.x() + s * dl.y(), -s * dl.x() + c * dl.y());
    view.right.emplace_back(c * dr.x() + s * dr.y(), -s * dr.x() + c * dr.y());
  }
  return view;
}

TrackModel TrackModel::from_points(std::string name, std::vector<Eigen::Vector2d> points,
                                   std::vector<double> half_width_left,
                                   std::vector<double> half_width_right) {
  if (points.size() != half_width_left.size() || points.size() != half_width_right.size()) {
    throw std::runtime_error("track: point/width count mismatch");
  }
  // drop an explicit closing point
  if (points.size() >= 2 && (points.front() - points.back()).norm() < 1e-6) {
    points.pop_back();
    half_width_left.pop_back();
    half_width_right.pop_back();
  }
  const int n = static_cast<int>(points.size());
  if (n < 4) throw std::runtime_error("track: need at least 4 points");
  for (int i = 0; i < n; ++i) {
    if (half_width_left[i] <= 0.0 || half_width_right[i] <= 0.0) {
      throw std::runtime_error("track: non-positive width at point " + std::to_string(i));
    }
  }

  TrackModel track;
  track.name_ = std::move(name);

  // closed Catmull-Rom segments between consecutive points
  track.segments_.resize(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d& pm = points[(i - 1 + n) % n];
    const Eigen::Vector2d& p0 = points[i];
    const Eigen::Vector2d& p1 = points[(i + 1) % n];
    const Eigen::Vector2d& p2 = points[(i + 2) % n];
    Segment g;
    g.c0 = p0;
    g.c1 = 0.5 * (p1 - pm);
    g.c2 = 0.5 * (2.0 * pm - 5.0 * p0 + 4.0 * p1 - p2);
    g.c3 = 0.5 * (-pm + 3.0 * p0 - 3.0 * p1 + p2);
    track.segments_[i] = g;
  }
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    Segment& g = track.segments_[i];
    g.s_begin = s;
    g.length = track.seg_arc(g, 1.0);
    if (g.length <= 0.0) throw std::runtime_error("track: degenerate segment");
    if (g.length > kMaxStationSpacing) {
      throw std::runtime_error("track: station spacing " + std::to_string(g.length) +
                               " m exceeds 5 m at point " + std::to_string(i));
    }
    s += g.length;
  }
  track.total_length_ = s;

  // stations at segment starts, plus the closing duplicate of the first
  track.stations_.resize(n + 1);
  for (int i = 0; i < n; ++i) {
    TrackStation& st = track.stations_[i];
    st.s = track.segments_[i].s_begin;
    st.x = points[i].x();
    st.y = points[i].y();
    const Eigen::Vector2d d = track.seg_deriv(track.segments_[i], 0.0).normalized();
    st.heading = std::atan2(d.y(), d.x());
    st.half_width_left = half_width_left[i];
    st.half_width_right = half_width_right[i];
  }
  track.stations_[n] = track.stations_[0];
  track.stations_[n].s = track.total_length_;

  // curvature by central finite differences of station headings
  track.station_curvature_.resize(n + 1);
  for (int i = 0; i < n; ++i) {
    const int im = (i - 1 + n) % n;
    const int ip = (i + 1) % n;
    const double dh = wrap_to_pi(track.stations_[ip].heading - track.stations_[im].heading);
    double ds = track.segments_[im].length + track.segments_[i].length;
    track.station_curvature_[i] = dh / ds;
  }
  track.station_curvature_[n] = track.station_curvature_[0];

  // interior station list uses the segment-start subset; drop the duplicate for
  // interpolation lookups but keep it in the public stations() view
  return track;
}

TrackModel load_track(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("track: cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("track: parse failure: ") + e.what());
  }

  if (!doc.contains("closed") || !doc["closed"].get<bool>()) {
    throw std::runtime_error("track: open (non-closed) centerline");
  }
  const std::string name = doc.value("name", std::string("unnamed"));
  if (!doc.contains("points") || !doc["points"].is_array()) {
    throw std::runtime_error("track: missing points array");
  }

  std::vector<Eigen::Vector2d> pts;
  std::vector<double> hwl, hwr;
  for (const auto& jp : doc["points"]) {
    pts.emplace_back(jp.at("x").get<double>(), jp.at("y").get<double>());
    hwl.push_back(jp.at("half_width_left").get<double>());
    hwr.push_back(jp.at("half_width_right").get<double>());
  }

  TrackModel track = TrackModel::from_points(name, std::move(pts), std::move(hwl), std::move(hwr));

  if (doc.contains("total_length")) {
    const double declared = doc["total_length"].get<double>();
    if (std::abs(declared - track.total_length()) > 1e-3) {
      throw std::runtime_error("track: declared total_length " + std::to_string(declared) +
                               " differs from recomputed " + std::to_string(track.total_length()));
    }
  }
  return track;
}

}  // namespace apex
