#include <doctest.h>

#include <atomic>
#include <fstream>
#include <sstream>

#include "attnablate/error.hpp"
#include "attnablate/report.hpp"
#include "attnablate/runner.hpp"
#include "fixtures.hpp"
#include "mock_judge.hpp"

using namespace attnablate;
namespace ts = testing_support;
using json = nlohmann::json;

namespace {

ExperimentConfig tiny_config(const ts::TempDir& dir) {
  ExperimentConfig c = ExperimentConfig::from_file(ts::fixture("experiment-tiny.json"));
  c.output_dir = dir / "out";
  return c;
}

const PointResult& point(const ExperimentReport& r, const std::string& label) {
  for (const auto& p : r.points)
    if (p.label == label) return p;
  throw std::runtime_error("no point " + label);
}

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig c = ExperimentConfig::from_file(ts::fixture("experiment-tiny.json"));
  CHECK(c.model_path == ts::fixture("tiny-4L.bin"));
  CHECK(c.benchmark_path == ts::fixture("rigged-20.jsonl"));
  CHECK(c.sweep == std::vector<std::string>{"z_o", "z_1", "z_2", "z_3", "z_4"});
  CHECK(c.effective_repetitions() == 5);
  CHECK(c.seed == 7);

  json doc = json::parse(ts::read_file(ts::fixture("experiment-tiny.json")));
  SUBCASE("unknown key") {
    doc["temperature"] = 0.7;
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(doc), "config: unknown key 'temperature' in config", InputError);
  }
  SUBCASE("unknown nested key") {
    doc["judge"]["kindness"] = 1;
    CHECK_THROWS_AS(ExperimentConfig::from_json(doc), InputError);
  }
  SUBCASE("schema version") {
    doc["schema_version"] = 2;
    CHECK_THROWS_AS(ExperimentConfig::from_json(doc), InputError);
  }
  SUBCASE("format default repetitions") {
    doc.erase("repetitions");
    doc["benchmark"]["format"] = "halueval";
    CHECK(ExperimentConfig::from_json(doc).effective_repetitions() == 2);
  }
  SUBCASE("sweep must start with z_o") {
    doc["sweep"] = {"z_1", "z_o"};
    CHECK_THROWS_AS(ExperimentConfig::from_json(doc).validate(), InputError);
  }
  SUBCASE("repetitions must be positive") {
    doc["repetitions"] = 0;
    CHECK_THROWS_AS(ExperimentConfig::from_json(doc), InputError);
  }
  SUBCASE("round trip through to_json") {
    const auto c1 = ExperimentConfig::from_json(doc, ts::fixture_dir());
    const auto c2 = ExperimentConfig::from_json(c1.to_json());
    CHECK(c1.to_json() == c2.to_json());
  }
  CHECK_THROWS_WITH_AS(ExperimentConfig::from_file("/nonexistent/x.json"), "config not found: /nonexistent/x.json",
                       InputError);
}

TEST_CASE("end-to-end run on the rigged fixture") {
  ts::TempDir dir("run");
  const ExperimentConfig c = tiny_config(dir);
  const ExperimentReport r = run_experiment(c);

  REQUIRE(r.points.size() == 5);
  CHECK(point(r, "z_o").delta_vs_zo == 0.0);
  CHECK(point(r, "z_2").delta_vs_zo == 0.15);
  for (const auto& p : r.points) {
    CHECK(p.accuracy.runs.size() == 5);
    for (const auto& run : p.accuracy.runs) {
      CHECK(run.acc >= 0.0);
      CHECK(run.acc <= 1.0);
      CHECK(run.num_all == 20);
    }
  }
  CHECK(r.dataset_size == 20);
  CHECK(r.questions_evaluated == 20);
  REQUIRE(r.transcripts.size() == 20);
  CHECK(r.transcripts[0].points.size() == 5);
  CHECK(r.transcripts[0].points[2].label == "z_2");
  CHECK(r.transcripts[0].points[2].verdicts.size() == 5);
  CHECK(r.protocol.at("repetitions") == 5);

  const ExperimentReport again = run_experiment(c);
  CHECK(render_report(r, ReportFormat::json) == render_report(again, ReportFormat::json));
  CHECK(render_report(r, ReportFormat::csv) == render_report(again, ReportFormat::csv));

  ExperimentConfig one_worker = c;
  one_worker.workers = 1;
  CHECK(render_report(run_experiment(one_worker), ReportFormat::csv) == render_report(r, ReportFormat::csv));
}

TEST_CASE("a repeated point gives identical accuracies") {
  ts::TempDir dir("dup");
  ExperimentConfig c = tiny_config(dir);
  c.sweep = {"z_o", "z_o"};
  c.repetitions = 1;
  const auto r = run_experiment(c);
  REQUIRE(r.points.size() == 2);
  CHECK(r.points[0].accuracy.mean == r.points[1].accuracy.mean);
  CHECK(r.points[1].delta_vs_zo == 0.0);
}

TEST_CASE("sampled runs record the sampler") {
  ts::TempDir dir("sample");
  ExperimentConfig c = tiny_config(dir);
  c.sample_size = 8;
  c.repetitions = 1;
  const auto r = run_experiment(c);
  CHECK(r.questions_evaluated == 8);
  CHECK(r.points[0].accuracy.runs[0].num_all == 8);
  CHECK(r.protocol.at("sample").at("algorithm") == std::string(kSamplerName));
  c.sample_size = 21;
  CHECK_THROWS_AS(run_experiment(c), InputError);
}

TEST_CASE("report formats") {
  ts::TempDir dir("formats");
  ExperimentConfig c = tiny_config(dir);
  c.sweep = {"z_o", "z_2"};
  const auto r = run_experiment(c);

  const std::string csv = report_to_csv(r);
  std::istringstream in(csv);
  const auto rows = parse_report_csv(in);
  REQUIRE(rows.size() == 2 * 5);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& p = r.points[i / 5];
    CHECK(rows[i].point_label == p.label);
    CHECK(rows[i].rep_index == i % 5);
    CHECK(rows[i].num_true == p.accuracy.runs[i % 5].num_true);
    CHECK(rows[i].acc == p.accuracy.runs[i % 5].acc);
    CHECK(rows[i].mean_acc == p.accuracy.mean);
    CHECK(rows[i].delta_vs_zo == p.delta_vs_zo);
  }

  const json plot = report_to_plotdata(r);
  REQUIRE(plot.size() == 2);
  for (const auto& rec : plot) CHECK(rec.at("zo_line").get<double>() == r.points[0].accuracy.mean);

  const json doc = report_to_json(r);
  CHECK(doc.at("schema_version") == 1);
  CHECK(doc.at("points").at(1).at("delta_vs_zo").get<double>() == 0.15);
  CHECK(render_report(report_from_json(doc), ReportFormat::json) == render_report(r, ReportFormat::json));

  const auto written = emit_report(r, {ReportFormat::json, ReportFormat::csv, ReportFormat::plotdata}, dir / "emit");
  CHECK(written.size() == 3);
  CHECK(ts::read_file(dir / "emit" / "report.csv") == csv);
  CHECK_THROWS_AS(parse_report_format("xml"), InputError);
}

TEST_CASE("format_double is shortest round-trip") {
  CHECK(format_double(0.15) == "0.15");
  CHECK(format_double(0.45) == "0.45");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.0) == "0");
  CHECK(format_double(1.0 / 3) == "0.3333333333333333");
}

TEST_CASE("remote-judged run and partial report on failure") {
  ts::TempDir dir("partial");
  std::atomic<int> served{0};
  // Enough good replies for z_o (20 questions x 1 repetition), then errors.
  mock::JudgeServer server([&](const httplib::Request&, httplib::Response& res) {
    if (++served <= 20) {
      res.set_content(mock::completion("VERDICT: correct"), "application/json");
    } else {
      res.status = 500;
    }
  });
  ExperimentConfig c = tiny_config(dir);
  c.sweep = {"z_o", "z_2"};
  c.repetitions = 1;
  c.workers = 1;
  c.judge.kind = JudgeKind::remote;
  c.judge.remote.endpoint = server.endpoint();
  c.judge.remote.max_attempts = 1;
  try {
    run_experiment(c);
    FAIL("expected ExperimentError");
  } catch (const ExperimentError& e) {
    CHECK(std::string(e.what()).rfind("sweep point z_2: ", 0) == 0);
  }
  const json partial = json::parse(ts::read_file(dir / "out" / "partial_report.json"));
  REQUIRE(partial.at("points").size() == 1);
  CHECK(partial.at("points").at(0).at("label") == "z_o");
  CHECK(partial.at("points").at(0).at("mean_acc").get<double>() == 1.0);
}

TEST_CASE("bridge targets are rejected by the native runner") {
  ts::TempDir dir("bridge");
  json doc = json::parse(ts::read_file(ts::fixture("experiment-tiny.json")));
  doc["model"] = {{"bridge", {{"checkpoint", "google/gemma-2b-it"}, {"dtype", "bfloat16"}}}};
  const auto c = ExperimentConfig::from_json(doc, ts::fixture_dir());
  CHECK_THROWS_AS(run_experiment(c), InputError);
}
