#include "attnablate/report.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "attnablate/error.hpp"

namespace attnablate {

using json = nlohmann::json;

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

template <typename T>
T parse_number(const std::string& s) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw InputError("report csv: bad number '" + s + "'");
  return v;
}

json labels_json(const std::vector<Label>& labels) {
  json out = json::array();
  for (auto l : labels) out.push_back(to_string(l));
  return out;
}

Label parse_label(const std::string& s) {
  if (s == "correct") return Label::correct;
  if (s == "incorrect") return Label::incorrect;
  throw InputError("report: unknown verdict label '" + s + "'");
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("format_double failed");
  return std::string(buf, ptr);
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  if (s == "plotdata") return ReportFormat::plotdata;
  throw InputError("unknown report format '" + std::string(s) + "' (json, csv, plotdata)");
}

std::string file_name(ReportFormat f) {
  switch (f) {
    case ReportFormat::json: return "report.json";
    case ReportFormat::csv: return "report.csv";
    case ReportFormat::plotdata: return "plotdata.json";
  }
  return "report";
}

json report_to_json(const ExperimentReport& r) {
  json doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["tool"] = "attnablate";
  doc["tool_version"] = r.tool_version;
  doc["config"] = r.config;
  doc["protocol"] = r.protocol;
  doc["dataset"] = {{"name", r.dataset_name}, {"size", r.dataset_size}, {"evaluated", r.questions_evaluated}};
  doc["points"] = json::array();
  for (const auto& p : r.points) {
    json runs = json::array();
    for (std::size_t i = 0; i < p.accuracy.runs.size(); ++i) {
      const auto& run = p.accuracy.runs[i];
      runs.push_back({{"rep_index", i}, {"num_true", run.num_true}, {"num_all", run.num_all}, {"acc", run.acc}});
    }
    doc["points"].push_back({{"label", p.label},
                             {"layers", p.layers},
                             {"multi_layer", p.layers.size() > 1},
                             {"runs", runs},
                             {"mean_acc", p.accuracy.mean},
                             {"delta_vs_zo", p.delta_vs_zo}});
  }
  doc["transcripts"] = json::array();
  for (const auto& t : r.transcripts) {
    json pts = json::array();
    for (const auto& a : t.points) {
      json e{{"label", a.label}, {"answer", a.answer}, {"verdicts", labels_json(a.verdicts)}};
      if (a.rationale) e["rationale"] = *a.rationale;
      pts.push_back(std::move(e));
    }
    doc["transcripts"].push_back({{"item_id", t.item_id}, {"question", t.question}, {"points", pts}});
  }
  return doc;
}

ExperimentReport report_from_json(const json& doc) {
  ExperimentReport r;
  try {
    if (doc.at("schema_version").get<int>() != kReportSchemaVersion)
      throw InputError("unsupported report schema_version");
    r.tool_version = doc.at("tool_version").get<std::string>();
    r.config = doc.at("config");
    r.protocol = doc.at("protocol");
    r.dataset_name = doc.at("dataset").at("name").get<std::string>();
    r.dataset_size = doc.at("dataset").at("size").get<std::size_t>();
    r.questions_evaluated = doc.at("dataset").at("evaluated").get<std::size_t>();
    for (const auto& p : doc.at("points")) {
      PointResult pr;
      pr.label = p.at("label").get<std::string>();
      pr.layers = p.at("layers").get<std::vector<std::size_t>>();
      for (const auto& run : p.at("runs")) {
        pr.accuracy.runs.push_back(
            {run.at("num_true").get<std::size_t>(), run.at("num_all").get<std::size_t>(), run.at("acc").get<double>()});
      }
      pr.accuracy.mean = p.at("mean_acc").get<double>();
      pr.delta_vs_zo = p.at("delta_vs_zo").get<double>();
      r.points.push_back(std::move(pr));
    }
    for (const auto& t : doc.at("transcripts")) {
      Transcript tr;
      tr.item_id = t.at("item_id").get<std::string>();
      tr.question = t.at("question").get<std::string>();
      for (const auto& a : t.at("points")) {
        PointAnswer pa;
        pa.label = a.at("label").get<std::string>();
        pa.answer = a.at("answer").get<std::string>();
        for (const auto& v : a.at("verdicts")) pa.verdicts.push_back(parse_label(v.get<std::string>()));
        if (a.contains("rationale")) pa.rationale = a.at("rationale").get<std::string>();
        tr.points.push_back(std::move(pa));
      }
      r.transcripts.push_back(std::move(tr));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("report: ") + e.what());
  }
  return r;
}

std::string report_to_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << "point_label,rep_index,num_true,num_all,acc,mean_acc,delta_vs_zo\n";
  for (const auto& p : r.points) {
    for (std::size_t i = 0; i < p.accuracy.runs.size(); ++i) {
      const auto& run = p.accuracy.runs[i];
      out << csv_field(p.label) << ',' << i << ',' << run.num_true << ',' << run.num_all << ','
          << format_double(run.acc) << ',' << format_double(p.accuracy.mean) << ',' << format_double(p.delta_vs_zo)
          << '\n';
    }
  }
  return out.str();
}

json report_to_plotdata(const ExperimentReport& r) {
  double zo_line = 0.0;
  for (const auto& p : r.points)
    if (p.label == "z_o") {
      zo_line = p.accuracy.mean;
      break;
    }
  json out = json::array();
  for (const auto& p : r.points) out.push_back({{"label", p.label}, {"mean_acc", p.accuracy.mean}, {"zo_line", zo_line}});
  return out;
}

std::string render_report(const ExperimentReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::json: return report_to_json(report).dump(2) + "\n";
    case ReportFormat::csv: return report_to_csv(report);
    case ReportFormat::plotdata: return report_to_plotdata(report).dump(2) + "\n";
  }
  return {};
}

std::vector<std::filesystem::path> emit_report(const ExperimentReport& report,
                                               const std::vector<ReportFormat>& formats,
                                               const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  for (auto f : formats) {
    const auto path = dir / file_name(f);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << render_report(report, f);
    if (!out) throw Error("short write to " + path.string());
    written.push_back(path);
  }
  return written;
}

std::vector<CsvRow> parse_report_csv(std::istream& in) {
  std::vector<CsvRow> rows;
  std::string line;
  if (!std::getline(in, line)) throw InputError("report csv: missing header");
  if (split_csv_line(line).size() != 7) throw InputError("report csv: unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw InputError("report csv: expected 7 columns");
    rows.push_back({f[0], parse_number<std::size_t>(f[1]), parse_number<std::size_t>(f[2]),
                    parse_number<std::size_t>(f[3]), parse_number<double>(f[4]), parse_number<double>(f[5]),
                    parse_number<double>(f[6])});
  }
  return rows;
}

}  // namespace attnablate
