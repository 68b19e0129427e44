#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "apex/evalkit.hpp"
#include "apex/trainer.hpp"

using namespace apex;

namespace {

std::shared_ptr<TrackModel> oval_track() {
  std::vector<Eigen::Vector2d> pts;
  std::vector<double> hwl, hwr;
  const double straight = 186.0, radius = 100.0;
  const double perimeter = 2.0 * straight + 2.0 * M_PI * radius;
  const int n = static_cast<int>(std::ceil(perimeter / 2.0));
  for (int i = 0; i < n; ++i) {
    const double s = perimeter * i / n;
    double x, y;
    if (s < straight) {
      x = s;
      y = 0.0;
    } else if (s < straight + M_PI * radius) {
      const double a = (s - straight) / radius;
      x = straight + radius * std::sin(a);
      y = radius * (1.0 - std::cos(a));
    } else if (s < 2.0 * straight + M_PI * radius) {
      x = straight - (s - straight - M_PI * radius);
      y = 2.0 * radius;
    } else {
      const double a = (s - 2.0 * straight - M_PI * radius) / radius;
      x = -radius * std::sin(a);
      y = 2.0 * radius - radius * (1.0 - std::cos(a));
    }
    pts.emplace_back(x, y);
    hwl.push_back(6.0);
    hwr.push_back(6.0);
  }
  return std::make_shared<TrackModel>(TrackModel::from_points("oval", pts, hwl, hwr));
}

VehicleParams gt_params() {
  VehicleParams p;
  p.mass = 1300.0;
  p.yaw_inertia = 1700.0;
  p.cg_to_front_axle = 1.30;
  p.cg_to_rear_axle = 1.40;
  p.base_mu = 1.4;
  p.cornering_stiffness_front = 230000.0;
  p.cornering_stiffness_rear = 250000.0;
  p.peak_slip_front = 0.121;
  p.peak_slip_rear = 0.104;
  p.max_engine_power = 375000.0;
  p.max_drive_force = 10000.0;
  p.max_brake_force = 18000.0;
  p.max_steer_angle = 0.40;
  p.steer_rate_limit = 1.0;
  p.drag_coeff = 1.1;
  p.rolling_resist = 300.0;
  return p;
}

// telemetry stream lapping at constant speed: one row per 0.1 s
std::vector<TelemetryRow> constant_lap_stream(const TrackModel& track, double lap_seconds,
                                              int n_laps, double partial = 0.3) {
  std::vector<TelemetryRow> rows;
  const double speed_u = track.total_length() / lap_seconds;
  const int steps = static_cast<int>(lap_seconds * (n_laps + partial) * 10.0);
  for (int k = 1; k <= steps; ++k) {
    const double t = 0.1 * k;
    TelemetryRow r;
    r.t = t;
    r.setup_id = "baseline";
    r.u = std::fmod(speed_u * t, track.total_length());
    r.vx = speed_u;
    r.e_norm = 0.1;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST_CASE("lap_split on a constructed stream") {
  auto track = oval_track();

  SUBCASE("three full laps of 60 s each") {
    const auto rows = constant_lap_stream(*track, 60.0, 4, 0.1);
    const auto laps = lap_split(rows, *track);
    REQUIRE(laps.size() == 3);
    for (const LapRecord& lap : laps) {
      CHECK(lap.lap_time == doctest::Approx(60.0).epsilon(0.002));
      CHECK(lap.valid);
      CHECK(lap.setup_id == "baseline");
    }
  }

  SUBCASE("a stream ending mid-lap discards the partial") {
    const auto rows = constant_lap_stream(*track, 60.0, 2, 0.5);
    const auto laps = lap_split(rows, *track);
    CHECK(laps.size() == 1);
  }

  SUBCASE("reverse progress across the line does not count") {
    std::vector<TelemetryRow> rows;
    const double total = track->total_length();
    // forward over the line, then a spin pushes u backwards across it, then forward again
    const std::vector<double> us = {total - 3.0, total - 1.0, 1.0,  3.0, 1.5,
                                    total - 1.5,  1.0,         3.0, 5.0};
    double t = 0.0;
    for (double u : us) {
      TelemetryRow r;
      r.t = (t += 0.1);
      r.u = u;
      r.vx = 20.0;
      rows.push_back(r);
    }
    // crossings: forward, backward (ignored), forward -> exactly one lap between
    // the two forward crossings is wrong here because the backward crossing
    // cancels the progress; the splitter sees two forward crossings
    const auto laps = lap_split(rows, *track);
    CHECK(laps.size() <= 1);
  }

  SUBCASE("laps with excursions beyond the margin are flagged invalid") {
    auto rows = constant_lap_stream(*track, 50.0, 3, 0.0);
    for (auto& r : rows) {
      if (r.t > 55.0 && r.t < 58.0) r.e_norm = 1.2;  // second lap runs wide
    }
    const auto laps = lap_split(rows, *track, 0.05);
    REQUIRE(laps.size() == 2);
    CHECK_FALSE(laps[0].valid);  // the excursion falls between the first two crossings
    CHECK(laps[0].max_abs_e_norm == doctest::Approx(1.2));
    CHECK(laps[1].valid);
  }
}

TEST_CASE("brake point detection") {
  std::vector<TelemetryRow> rows;
  // full throttle from u=700, brake step at u=850
  for (double u = 700.0; u <= 900.0; u += 5.0) {
    TelemetryRow r;
    r.u = u;
    r.throttle = (u < 850.0) ? 1.0 : 0.0;
    r.brake = (u >= 850.0) ? 0.8 : 0.0;
    r.t = u;
    rows.push_back(r);
  }
  SUBCASE("finds the first application after a full-throttle stretch") {
    const auto bp = brake_point(rows, 800.0, 880.0, 0.1);
    REQUIRE(bp.has_value());
    CHECK(*bp == doctest::Approx(850.0));
  }
  SUBCASE("unattainable threshold yields no result") {
    CHECK_FALSE(brake_point(rows, 800.0, 880.0, 1.1).has_value());
  }
  SUBCASE("no braking in the window yields no result") {
    CHECK_FALSE(brake_point(rows, 700.0, 840.0, 0.1).has_value());
  }
}

TEST_CASE("linear fit") {
  SUBCASE("noiseless plane is recovered to 1e-9") {
    std::vector<Eigen::Vector3d> pts;
    std::uint64_t state = 9;
    auto next = [&]() {
      state = state * 6364136223846793005ULL + 1442695040888963407ULL;
      return static_cast<double>(state >> 11) * 0x1.0p-53;
    };
    for (int i = 0; i < 10; ++i) {
      const double x1 = next() * 2.0, x2 = next() * 2.0;
      pts.emplace_back(x1, x2, 2.0 + 3.0 * x1 - x2);
    }
    const LinearFit fit = linear_fit(pts);
    CHECK(fit.c0 == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(fit.c1 == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(fit.c2 == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(fit.mae == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("identical points are rank deficient") {
    std::vector<Eigen::Vector3d> pts(5, Eigen::Vector3d(1.0, 2.0, 3.0));
    CHECK_THROWS_AS(linear_fit(pts), std::runtime_error);
  }

  SUBCASE("MAE estimates the mean absolute noise") {
    std::uint64_t state = 77;
    auto next = [&]() {
      state = state * 6364136223846793005ULL + 1442695040888963407ULL;
      return static_cast<double>(state >> 11) * 0x1.0p-53;
    };
    std::vector<Eigen::Vector3d> pts;
    const double eps_scale = 0.2;  // uniform(-0.2, 0.2): E|eps| = 0.1
    for (int i = 0; i < 4000; ++i) {
      const double x1 = next() * 2.0, x2 = next() * 2.0;
      const double noise = (next() * 2.0 - 1.0) * eps_scale;
      pts.emplace_back(x1, x2, 1.0 + 0.5 * x1 + 2.0 * x2 + noise);
    }
    const LinearFit fit = linear_fit(pts);
    CHECK(fit.mae == doctest::Approx(0.1).epsilon(0.05));
  }
}

TEST_CASE("convex hull sampling maps weights onto setups") {
  std::vector<VehicleSetup> vertices(4);
  vertices[0] = {1.0, 1.0, "baseline"};
  vertices[1] = {0.9, 1.0, "understeer"};
  vertices[2] = {1.0, 0.9, "oversteer"};
  vertices[3] = {1.1, 1.1, "faster"};

  SUBCASE("corner weights reproduce the vertices exactly") {
    for (std::size_t k = 0; k < 4; ++k) {
      std::vector<double> w(4, 0.0);
      w[k] = 1.0;
      const VehicleSetup s = hull_setup(vertices, w);
      CHECK(s.mu_front_scale == doctest::Approx(vertices[k].mu_front_scale));
      CHECK(s.mu_rear_scale == doctest::Approx(vertices[k].mu_rear_scale));
    }
  }

  SUBCASE("uniform weights give the centroid") {
    const VehicleSetup s = hull_setup(vertices, {0.25, 0.25, 0.25, 0.25});
    CHECK(s.mu_front_scale == doctest::Approx(1.0));
    CHECK(s.mu_rear_scale == doctest::Approx(1.0));
  }

  SUBCASE("samples satisfy the hull's bounding constraints") {
    RngStream rng(3);
    for (int i = 0; i < 200; ++i) {
      std::vector<double> w(4);
      double sum = 0.0;
      for (double& wi : w) {
        wi = -std::log(std::max(rng.uniform(), 1e-12));
        sum += wi;
      }
      for (double& wi : w) wi /= sum;
      const VehicleSetup s = hull_setup(vertices, w);
      CHECK(s.mu_front_scale >= 0.9 - 1e-12);
      CHECK(s.mu_front_scale <= 1.1 + 1e-12);
      CHECK(s.mu_rear_scale >= 0.9 - 1e-12);
      CHECK(s.mu_rear_scale <= 1.1 + 1e-12);
    }
  }
}

TEST_CASE("path deviation parity between the reward engine and the eval kit") {
  auto track = oval_track();
  const double total = track->total_length();

  PathStatistics stats;
  stats.bin_width = 1.0;
  stats.total_length = total;
  stats.lap_count = 2;
  const int n_bins = static_cast<int>(std::ceil(total));
  stats.mu.resize(n_bins);
  stats.sigma.resize(n_bins);
  for (int b = 0; b < n_bins; ++b) {
    stats.mu[b] = 2.0 * std::sin(b * 0.013);
    stats.sigma[b] = 0.4 + 0.3 * std::abs(std::cos(b * 0.007));
  }

  RewardWeights weights;
  weights.steer_rate_threshold = 4.0;
  weights.pedal_rate_threshold = 4.0;
  weights.path_dev_w = 0.1;
  weights.sigma_min = 1.0;
  EpisodeConfig episode;
  episode.max_steps = 4000;

  Environment env(track, gt_params(), episode, weights, NormTable{}, 3, nullptr, &stats);
  env.reset_fixed(0.0);

  double sum_r_imi = 0.0;
  double sum_kernel = 0.0;
  int lapped = 0;
  for (int i = 0; i < 3000; ++i) {
    const double e = env.pose().e_norm;
    const double he = env.pose().heading_error;
    const double steer = std::clamp(-0.8 * e - 2.0 * he, -1.0, 1.0);
    const double long_cmd = std::clamp(0.25 * (18.0 - env.state().vx), -1.0, 0.5);
    const auto r = env.step({steer, long_cmd});
    REQUIRE_FALSE(r.done);
    sum_r_imi += r.reward.r_imi;
    sum_kernel += stats.deviation(r.info.pose.u, r.info.pose.v, weights.sigma_min);
    if (r.info.lap_crossings >= 1) {
      lapped = 1;
      break;
    }
  }
  REQUIRE(lapped == 1);
  CHECK(sum_kernel == doctest::Approx(-sum_r_imi / weights.path_dev_w).epsilon(1e-9));
  CHECK(sum_kernel > 0.0);
}

TEST_CASE("evaluating an untrained policy reports non-completion without crashing") {
  auto track = oval_track();
  EnvSpec spec;
  spec.track = track;
  spec.vehicle = gt_params();
  spec.episode.max_steps = 300;
  spec.weights.steer_rate_threshold = 4.0;
  spec.weights.pedal_rate_threshold = 4.0;
  spec.setups.resize(2);
  spec.setups[0].setup_id = "baseline";
  spec.setups[1] = {0.9, 1.0, "understeer"};

  RngStream rng(5);
  PolicyNet policy = PolicyNet::create(kObsDim, kActDim, 16, 2, rng);

  EvalOptions options;
  options.n_laps = 1;
  const EvalReport report = evaluate(policy, spec, spec.setups, options);
  REQUIRE(report.setups.size() == 2);
  for (const SetupEval& ev : report.setups) {
    CHECK(ev.laps_valid == 0);
    CHECK_FALSE(std::isfinite(ev.best_lap));
  }
  CHECK(!report.to_json().empty());
}
