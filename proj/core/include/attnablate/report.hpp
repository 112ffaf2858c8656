#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "attnablate/runner.hpp"

namespace attnablate {

enum class ReportFormat { json, csv, plotdata };
ReportFormat parse_report_format(std::string_view s);
std::string file_name(ReportFormat f);

nlohmann::json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& doc);

// Columns: point_label, rep_index, num_true, num_all, acc, mean_acc, delta_vs_zo.
std::string report_to_csv(const ExperimentReport& report);
// Per point {label, mean_acc, zo_line}, ready for a bar chart.
nlohmann::json report_to_plotdata(const ExperimentReport& report);

// Serialized text for one format; JSON is pretty-printed with a trailing newline.
std::string render_report(const ExperimentReport& report, ReportFormat format);

// Writes the chosen formats into `dir`, returning the files written.
std::vector<std::filesystem::path> emit_report(const ExperimentReport& report,
                                               const std::vector<ReportFormat>& formats,
                                               const std::filesystem::path& dir);

struct CsvRow {
  std::string point_label;
  std::size_t rep_index = 0;
  std::size_t num_true = 0;
  std::size_t num_all = 0;
  double acc = 0.0;
  double mean_acc = 0.0;
  double delta_vs_zo = 0.0;
};
std::vector<CsvRow> parse_report_csv(std::istream& in);

// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

}  // namespace attnablate
