#include "handover/report.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace handover {

using nlohmann::json;

ReportFormat parse_report_format(std::string_view text) {
  if (text == "json") return ReportFormat::Json;
  if (text == "csv") return ReportFormat::Csv;
  throw Error(ErrorCode::InvalidConfig, "report format must be json or csv");
}

namespace {

constexpr const char* kCsvHeader =
    "section,cell_x,cell_y,mode,metric,count,mean,median,q1,q3,min,max,p_value,failures";

ReportRow row(std::string section, std::optional<Cell> cell, std::string mode, std::string metric,
              const Summary& stats, std::optional<double> p = std::nullopt, int failures = 0) {
  return {std::move(section), cell, std::move(mode), std::move(metric), stats, p, failures};
}

void add_comparison(std::vector<ReportRow>& rows, const char* section, const PairedComparison& c) {
  rows.push_back(row(section, c.cell, "", "response_gain", c.response_gain, c.p_response));
  rows.push_back(row(section, c.cell, "", "grab_gain", c.grab_gain, c.p_grab));
  rows.push_back(row(section, c.cell, "", "grab_win", c.grab_win));
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& field) {
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (field.empty() || end != field.c_str() + field.size()) {
    throw Error(ErrorCode::ParseError, "bad number '" + field + "'");
  }
  return v;
}

int parse_int(const std::string& field) {
  const double v = parse_double(field);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v) throw Error(ErrorCode::ParseError, "bad integer '" + field + "'");
  return i;
}

json summary_json(const Summary& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"q1", s.q1},
          {"q3", s.q3},       {"min", s.min},   {"max", s.max}};
}

Summary summary_from(const json& j) {
  Summary s;
  s.count = j.at("count").get<std::size_t>();
  s.mean = j.at("mean").get<double>();
  s.median = j.at("median").get<double>();
  s.q1 = j.at("q1").get<double>();
  s.q3 = j.at("q3").get<double>();
  s.min = j.at("min").get<double>();
  s.max = j.at("max").get<double>();
  return s;
}

json trial_json(const StudyTrial& t) {
  const auto& r = t.result;
  json err = nullptr;
  if (r.prediction_error) {
    err = {{"dx", r.prediction_error->dx},
           {"dy", r.prediction_error->dy},
           {"euclid", r.prediction_error->euclid},
           {"meters", r.prediction_error->meters}};
  }
  return {{"cell_index", t.cell_index},
          {"trial_index", t.trial_index},
          {"mode", std::string(to_string(r.mode))},
          {"seed", r.seed},
          {"target_cell", json::array({r.target_cell.x, r.target_cell.y})},
          {"response_time", r.response_time},
          {"start_to_grab", r.start_to_grab},
          {"prediction_error", err},
          {"preempts", r.preempts},
          {"predictive_launches", r.predictive_launches},
          {"error", r.error}};
}

}  // namespace

std::vector<ReportRow> report_rows(const StudyReport& report) {
  std::vector<ReportRow> rows;
  for (const auto& s : report.summaries) {
    const std::string mode(to_string(s.mode));
    rows.push_back(row("cell", s.cell, mode, "response_time", s.response_time, std::nullopt, s.failures));
    rows.push_back(row("cell", s.cell, mode, "start_to_grab", s.start_to_grab, std::nullopt, s.failures));
    rows.push_back(row("cell", s.cell, mode, "error_grids", s.error_grids, std::nullopt, s.failures));
  }
  for (const auto& c : report.cells) add_comparison(rows, "paired", c);
  if (report.overall) add_comparison(rows, "overall", *report.overall);
  return rows;
}

std::string report_csv(const StudyReport& report) {
  std::ostringstream os;
  os << kCsvHeader << '\n';
  for (const auto& r : report_rows(report)) {
    os << r.section << ',';
    if (r.cell) {
      os << r.cell->x << ',' << r.cell->y << ',';
    } else {
      os << ",,";
    }
    os << r.mode << ',' << r.metric << ',' << r.stats.count << ',' << fmt(r.stats.mean) << ','
       << fmt(r.stats.median) << ',' << fmt(r.stats.q1) << ',' << fmt(r.stats.q3) << ','
       << fmt(r.stats.min) << ',' << fmt(r.stats.max) << ',';
    if (r.p_value) os << fmt(*r.p_value);
    os << ',' << r.failures << '\n';
  }
  return os.str();
}

std::string report_json(const StudyReport& report) {
  json rows = json::array();
  for (const auto& r : report_rows(report)) {
    rows.push_back({{"section", r.section},
                    {"cell", r.cell ? json::array({r.cell->x, r.cell->y}) : json(nullptr)},
                    {"mode", r.mode},
                    {"metric", r.metric},
                    {"stats", summary_json(r.stats)},
                    {"p_value", r.p_value ? json(*r.p_value) : json(nullptr)},
                    {"failures", r.failures}});
  }
  json trials = json::array();
  for (const auto& t : report.trials) trials.push_back(trial_json(t));
  json config = report.config_snapshot.empty() ? json::object() : json::parse(report.config_snapshot);
  json out = {{"config", config}, {"rows", rows}, {"trials", trials}};
  return out.dump(2) + "\n";
}

void export_report(const StudyReport& report, const std::filesystem::path& path, ReportFormat format) {
  const std::string text = format == ReportFormat::Json ? report_json(report) : report_csv(report);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  os << text;
  if (!os) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

std::vector<ReportRow> parse_report_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) {
    throw Error(ErrorCode::ParseError, "unexpected report CSV header");
  }
  std::vector<ReportRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != 14) throw Error(ErrorCode::ParseError, "report CSV row needs 14 fields");
    ReportRow r;
    r.section = f[0];
    if (!f[1].empty() || !f[2].empty()) r.cell = Cell{parse_int(f[1]), parse_int(f[2])};
    r.mode = f[3];
    r.metric = f[4];
    r.stats.count = static_cast<std::size_t>(parse_int(f[5]));
    r.stats.mean = parse_double(f[6]);
    r.stats.median = parse_double(f[7]);
    r.stats.q1 = parse_double(f[8]);
    r.stats.q3 = parse_double(f[9]);
    r.stats.min = parse_double(f[10]);
    r.stats.max = parse_double(f[11]);
    if (!f[12].empty()) r.p_value = parse_double(f[12]);
    r.failures = parse_int(f[13]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ReportRow> parse_report_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    std::vector<ReportRow> rows;
    for (const auto& jr : j.at("rows")) {
      ReportRow r;
      r.section = jr.at("section").get<std::string>();
      if (!jr.at("cell").is_null()) r.cell = Cell{jr["cell"][0].get<int>(), jr["cell"][1].get<int>()};
      r.mode = jr.at("mode").get<std::string>();
      r.metric = jr.at("metric").get<std::string>();
      r.stats = summary_from(jr.at("stats"));
      if (!jr.at("p_value").is_null()) r.p_value = jr["p_value"].get<double>();
      r.failures = jr.at("failures").get<int>();
      rows.push_back(std::move(r));
    }
    return rows;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

std::vector<ReportRow> read_report_rows(const std::filesystem::path& path, ReportFormat format) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return format == ReportFormat::Json ? parse_report_json(ss.str()) : parse_report_csv(ss.str());
}

}  // namespace handover
