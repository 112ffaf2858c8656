#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "attnablate/error.hpp"
#include "attnablate/judge.hpp"
#include "attnablate/qa.hpp"

namespace attnablate {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kReportSchemaVersion = 1;
inline constexpr std::string_view kDefaultQuestionTemplate = "Q: {question}\nA:";

struct JudgeSettings {
  JudgeKind kind = JudgeKind::reference;
  RemoteJudgeConfig remote;
  std::optional<std::filesystem::path> prompt_path;  // default: built-in template
};

struct ExperimentConfig {
  std::filesystem::path model_path;
  std::optional<nlohmann::json> bridge_target;  // handled by the Python bridge only
  std::filesystem::path benchmark_path;
  QaFormat benchmark_format = QaFormat::truthfulqa;
  std::vector<std::string> sweep;
  std::size_t repetitions = 0;  // 0 = format default (5 truthfulqa, 2 halueval)
  std::optional<std::size_t> sample_size;
  std::uint64_t seed = 0;
  JudgeSettings judge;
  std::size_t max_new_tokens = 16;
  std::string question_template{kDefaultQuestionTemplate};
  std::filesystem::path output_dir = "out";
  std::size_t workers = 0;  // 0 = hardware concurrency

  std::size_t effective_repetitions() const {
    return repetitions == 0 ? default_repetitions(benchmark_format) : repetitions;
  }

  // Parses the versioned JSON config. Unknown keys are rejected; relative
  // paths resolve against `base_dir`.
  static ExperimentConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
  static ExperimentConfig from_file(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  // repetitions >= 1, sweep non-empty starting with z_o, labels well formed.
  void validate() const;
};

struct PointResult {
  std::string label;
  std::vector<std::size_t> layers;
  AggregateAccuracy accuracy;
  double delta_vs_zo = 0.0;
};

struct PointAnswer {
  std::string label;
  std::string answer;
  std::vector<Label> verdicts;  // one per repetition
  std::optional<std::string> rationale;  // first repetition's judge reply
};

struct Transcript {
  std::string item_id;
  std::string question;
  std::vector<PointAnswer> points;  // sweep order
};

struct ExperimentReport {
  nlohmann::json config;  // echo of the effective config
  std::string tool_version;
  std::string dataset_name;
  std::size_t dataset_size = 0;
  std::size_t questions_evaluated = 0;
  std::vector<PointResult> points;
  std::vector<Transcript> transcripts;
  nlohmann::json protocol;  // decoding / sampling / repetition choices
};

// Error raised by run_experiment; the message names the sweep point.
class ExperimentError : public Error {
 public:
  using Error::Error;
};

// For each sweep point and repetition: decode answers greedily under the
// point's ablation, judge them, and compute ACC; then average and take deltas
// against z_o. Deterministic for the reference judge and a fixed seed. On
// failure, completed points are written to output_dir/partial_report.json.
ExperimentReport run_experiment(const ExperimentConfig& config);

std::string tool_version();

}  // namespace attnablate
