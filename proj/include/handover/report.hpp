#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "handover/study.hpp"

namespace handover {

enum class ReportFormat { Json, Csv };
ReportFormat parse_report_format(std::string_view text);

/// One aggregated statistic. `section` is "cell" (per cell and mode),
/// "paired" (per cell, reactive minus preemptive) or "overall".
struct ReportRow {
  std::string section;
  std::optional<Cell> cell;
  std::string mode;    // "reactive", "preemptive" or empty
  std::string metric;  // response_time, start_to_grab, error_grids, response_gain, grab_gain, grab_win
  Summary stats;
  std::optional<double> p_value;
  int failures = 0;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

/// Flattened aggregate table in a fixed order.
std::vector<ReportRow> report_rows(const StudyReport& report);

/// CSV header: section,cell_x,cell_y,mode,metric,count,mean,median,q1,q3,min,max,p_value,failures
std::string report_csv(const StudyReport& report);
/// {"config": {...}, "rows": [...], "trials": [...]}
std::string report_json(const StudyReport& report);

/// Throws IoFailure.
void export_report(const StudyReport& report, const std::filesystem::path& path, ReportFormat format);

/// Reads the rows back from either format. Throws IoFailure, ParseError.
std::vector<ReportRow> read_report_rows(const std::filesystem::path& path, ReportFormat format);
std::vector<ReportRow> parse_report_csv(const std::string& text);
std::vector<ReportRow> parse_report_json(const std::string& text);

}  // namespace handover
