#include "plots.hpp"

#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "apex/csv.hpp"
#include "apex/track.hpp"
#include "svg.hpp"

namespace apex::plots {

namespace {

std::string series_label(const std::string& path) {
  std::filesystem::path p(path);
  return p.stem().string();
}

void telemetry_chart(const std::vector<std::string>& csvs, const char* value_col,
                     const char* title, const char* y_label, const std::string& out_path,
                     double u1 = 0.0, double u2 = -1.0) {
  svg::LineChart chart(title, "arc position u [m]", y_label);
  int idx = 0;
  for (const std::string& path : csvs) {
    const CsvTable table = read_csv(path);
    const int cu = table.column_index("u");
    const int cv = table.column_index(value_col);
    if (cu < 0 || cv < 0) throw std::runtime_error("missing columns in " + path);
    svg::Series series;
    series.label = series_label(path);
    series.color = svg::LineChart::palette(idx++);
    double last_u = -1.0;
    for (const auto& row : table.rows) {
      const double u = row[static_cast<std::size_t>(cu)];
      if (u2 > u1 && (u < u1 || u > u2)) continue;
      if (u < last_u) {  // lap wrap: break the polyline
        series.x.push_back(std::nan(""));
        series.y.push_back(std::nan(""));
      }
      last_u = u;
      series.x.push_back(u);
      series.y.push_back(row[static_cast<std::size_t>(cv)]);
    }
    chart.add(std::move(series));
  }
  chart.write(out_path);
}

}  // namespace

void plot_speed(const std::vector<std::string>& csvs, const std::string& out_path) {
  telemetry_chart(csvs, "vx", "Speed over the lap", "vx [m/s]", out_path);
}

void plot_steer(const std::vector<std::string>& csvs, const std::string& out_path) {
  telemetry_chart(csvs, "steer", "Steering angle over the lap", "steer [rad]", out_path);
}

void plot_brake(const std::vector<std::string>& csvs, double u1, double u2,
                const std::string& out_path) {
  telemetry_chart(csvs, "brake", "Brake application", "brake fraction", out_path, u1, u2);
}

void plot_line(const std::string& track_json, const std::vector<std::string>& csvs,
               const std::string& out_path) {
  svg::LineChart chart("Driven lines", "x [m]", "y [m]");
  chart.equal_axes(true);

  const TrackModel track = load_track(track_json);
  svg::Series left, right;
  left.label = "track edge";
  left.color = "#999999";
  right.label = "";
  right.color = "#999999";
  const double step = 4.0;
  for (double u = 0.0; u <= track.total_length(); u += step) {
    const Eigen::Vector2d l = track.position_of(u, track.half_width(u, Side::Left));
    const Eigen::Vector2d r = track.position_of(u, -track.half_width(u, Side::Right));
    left.x.push_back(l.x());
    left.y.push_back(l.y());
    right.x.push_back(r.x());
    right.y.push_back(r.y());
  }
  chart.add(std::move(left));
  chart.add(std::move(right));

  int idx = 1;
  for (const std::string& path : csvs) {
    const CsvTable table = read_csv(path);
    const int cx = table.column_index("x");
    const int cy = table.column_index("y");
    if (cx < 0 || cy < 0) throw std::runtime_error("missing columns in " + path);
    svg::Series series;
    series.label = series_label(path);
    series.color = svg::LineChart::palette(idx++);
    for (const auto& row : table.rows) {
      series.x.push_back(row[static_cast<std::size_t>(cx)]);
      series.y.push_back(row[static_cast<std::size_t>(cy)]);
    }
    chart.add(std::move(series));
  }
  chart.write(out_path);
}

void plot_curves(const std::vector<std::string>& csvs, const std::string& out_path) {
  svg::LineChart reward_chart("Training reward", "iteration", "eval reward");
  svg::LineChart lap_chart("Lap time during training", "iteration", "best lap [s]");
  int idx = 0;
  for (const std::string& path : csvs) {
    const CsvTable table = read_csv(path);
    const int ci = table.column_index("iteration");
    const int cr = table.column_index("eval_reward");
    if (ci < 0 || cr < 0) throw std::runtime_error("missing columns in " + path);
    svg::Series series;
    series.label = series_label(path);
    series.color = svg::LineChart::palette(idx);
    for (const auto& row : table.rows) {
      series.x.push_back(row[static_cast<std::size_t>(ci)]);
      series.y.push_back(row[static_cast<std::size_t>(cr)]);
    }
    reward_chart.add(series);

    // every per-setup lap column
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      if (table.columns[c].rfind("lap_", 0) != 0) continue;
      svg::Series laps;
      laps.label = series_label(path) + ":" + table.columns[c];
      laps.color = svg::LineChart::palette(idx++);
      for (const auto& row : table.rows) {
        laps.x.push_back(row[static_cast<std::size_t>(ci)]);
        laps.y.push_back(row[c]);
      }
      lap_chart.add(std::move(laps));
    }
    ++idx;
  }

  const std::filesystem::path base(out_path);
  const std::string stem = (base.parent_path() / base.stem()).string();
  reward_chart.write(stem + "_reward.svg");
  lap_chart.write(stem + "_laps.svg");
}

}  // namespace apex::plots
