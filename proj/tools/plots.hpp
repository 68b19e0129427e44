#pragma once

#include <string>
#include <vector>

namespace apex::plots {

// telemetry-derived charts, one series per input CSV
void plot_speed(const std::vector<std::string>& telemetry_csvs, const std::string& out_path);
void plot_steer(const std::vector<std::string>& telemetry_csvs, const std::string& out_path);
void plot_brake(const std::vector<std::string>& telemetry_csvs, double u1, double u2,
                const std::string& out_path);
void plot_line(const std::string& track_json, const std::vector<std::string>& telemetry_csvs,
               const std::string& out_path);
void plot_curves(const std::vector<std::string>& curves_csvs, const std::string& out_path);

}  // namespace apex::plots
