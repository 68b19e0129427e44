#include "apex/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace apex {

namespace {

const char* kTelemetryHeader =
    "t,setup_id,u,v,e_norm,x,y,heading,vx,vy,yaw_rate,steer,throttle,brake,ax,ay,"
    "r_s,r_edge,r_slip,r_steer,r_pedals,r_imi,total,done";

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

void write_telemetry_csv(const std::string& path, const std::vector<TelemetryRow>& rows,
                         bool include_actions) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << kTelemetryHeader;
  if (include_actions) out << ",a_steer,a_long";
  out << "\n";
  for (const TelemetryRow& r : rows) {
    out << format_double(r.t) << ',' << r.setup_id << ',' << format_double(r.u) << ','
        << format_double(r.v) << ',' << format_double(r.e_norm) << ',' << format_double(r.x)
        << ',' << format_double(r.y) << ',' << format_double(r.heading) << ','
        << format_double(r.vx) << ',' << format_double(r.vy) << ',' << format_double(r.yaw_rate)
        << ',' << format_double(r.steer) << ',' << format_double(r.throttle) << ','
        << format_double(r.brake) << ',' << format_double(r.ax) << ',' << format_double(r.ay)
        << ',' << format_double(r.r_s) << ',' << format_double(r.r_edge) << ','
        << format_double(r.r_slip) << ',' << format_double(r.r_steer) << ','
        << format_double(r.r_pedals) << ',' << format_double(r.r_imi) << ','
        << format_double(r.total) << ',' << r.done;
    if (include_actions) out << ',' << format_double(r.a_steer) << ',' << format_double(r.a_long);
    out << "\n";
  }
}

std::vector<TelemetryRow> read_telemetry_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty telemetry file " + path);

  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  const bool with_actions = cols.size() >= 26;
  if (cols.size() != 24 && cols.size() != 26) {
    throw std::runtime_error("unexpected telemetry column count in " + path);
  }

  std::vector<TelemetryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != cols.size()) throw std::runtime_error("ragged telemetry row in " + path);
    TelemetryRow r;
    int i = 0;
    r.t = std::stod(cells[i++]);
    r.setup_id = cells[i++];
    r.u = std::stod(cells[i++]);
    r.v = std::stod(cells[i++]);
    r.e_norm = std::stod(cells[i++]);
    r.x = std::stod(cells[i++]);
    r.y = std::stod(cells[i++]);
    r.heading = std::stod(cells[i++]);
    r.vx = std::stod(cells[i++]);
    r.vy = std::stod(cells[i++]);
    r.yaw_rate = std::stod(cells[i++]);
    r.steer = std::stod(cells[i++]);
    r.throttle = std::stod(cells[i++]);
    r.brake = std::stod(cells[i++]);
    r.ax = std::stod(cells[i++]);
    r.ay = std::stod(cells[i++]);
    r.r_s = std::stod(cells[i++]);
    r.r_edge = std::stod(cells[i++]);
    r.r_slip = std::stod(cells[i++]);
    r.r_steer = std::stod(cells[i++]);
    r.r_pedals = std::stod(cells[i++]);
    r.r_imi = std::stod(cells[i++]);
    r.total = std::stod(cells[i++]);
    r.done = static_cast<int>(std::stod(cells[i++]));
    if (with_actions) {
      r.a_steer = std::stod(cells[i++]);
      r.a_long = std::stod(cells[i++]);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

int CsvTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return static_cast<int>(i);
  }
  return -1;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) return table;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) table.columns.push_back(c);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (...) {
        row.push_back(std::nan(""));
      }
    }
    row.resize(table.columns.size(), std::nan(""));
    table.rows.push_back(std::move(row));
  }
  return table;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& columns)
    : path_(path), n_cols_(columns.size()) {
  std::ofstream out(path_);
  if (!out) throw std::runtime_error("cannot open " + path_ + " for writing");
  for (std::size_t i = 0; i < columns.size(); ++i) {
    out << columns[i] << (i + 1 < columns.size() ? "," : "\n");
  }
}

void CsvWriter::write_row(const std::vector<double>& values) {
  if (values.size() != n_cols_) throw std::runtime_error("csv row width mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    buffer_ += format_double(values[i]);
    buffer_ += (i + 1 < values.size()) ? ',' : '\n';
  }
  if (buffer_.size() > 1 << 16) flush();
}

void CsvWriter::flush() {
  if (buffer_.empty()) return;
  std::ofstream out(path_, std::ios::app);
  out << buffer_;
  buffer_.clear();
}

}  // namespace apex
