#pragma once

#include <string>
#include <vector>

#include "apex/env.hpp"

namespace apex {

// Telemetry CSV, one row per agent step. Demonstration files append the two
// action columns.
void write_telemetry_csv(const std::string& path, const std::vector<TelemetryRow>& rows,
                         bool include_actions);
std::vector<TelemetryRow> read_telemetry_csv(const std::string& path);

// Minimal generic CSV table used by the plot tool and training curves.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;  // numeric cells; NaN for non-numeric

  int column_index(const std::string& name) const;  // -1 when missing
};
CsvTable read_csv(const std::string& path);

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns);
  void write_row(const std::vector<double>& values);
  void flush();

 private:
  std::string path_;
  std::size_t n_cols_;
  std::string buffer_;
};

}  // namespace apex
