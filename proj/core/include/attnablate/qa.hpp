#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace attnablate {

enum class QaFormat { truthfulqa, halueval };

std::string to_string(QaFormat f);
QaFormat parse_qa_format(std::string_view s);

// Repetitions per intervention setting: 5 for TruthfulQA, 2 for HaluEval.
std::size_t default_repetitions(QaFormat f);

struct QaItem {
  std::string id;
  std::string question;
  std::vector<std::string> correct_refs;
  std::vector<std::string> incorrect_refs;
};

struct QaSet {
  std::string name;
  QaFormat format = QaFormat::truthfulqa;
  std::vector<QaItem> items;

  std::size_t size() const noexcept { return items.size(); }
};

// JSON Lines, one {"id", "question", "correct_refs", "incorrect_refs"} per
// line. Blank lines are skipped. Errors carry the 1-based line number.
QaSet load_qaset(const std::filesystem::path& path, QaFormat format);
QaSet parse_qaset(std::istream& in, QaFormat format, std::string name);
void write_qaset(const QaSet& set, std::ostream& out);

// Upstream converters. TruthfulQA: the published CSV (Question, Best Answer,
// Correct Answers, Incorrect Answers; answer lists split on ';').
// HaluEval QA: JSON lines or array of {question, right_answer,
// hallucinated_answer}.
QaSet import_truthfulqa_csv(std::istream& in);
QaSet import_halueval_json(std::istream& in);

// Name of the sampling algorithm, recorded in reports.
inline constexpr std::string_view kSamplerName = "mt19937_64+selection-sampling/v1";

// Uniform sample of n items without replacement, survivors in original order.
// Deterministic for a given seed on every platform.
QaSet sample_questions(const QaSet& set, std::size_t n, std::uint64_t seed);

enum class Label { correct, incorrect };
std::string to_string(Label l);

struct RunAccuracy {
  std::size_t num_true = 0;
  std::size_t num_all = 0;
  double acc = 0.0;

  friend bool operator==(const RunAccuracy&, const RunAccuracy&) = default;
};

// ACC = NumTrue / NumAll. Throws InputError on an empty list.
RunAccuracy accuracy(const std::vector<Label>& verdicts);

struct AggregateAccuracy {
  double mean = 0.0;
  std::vector<RunAccuracy> runs;

  std::size_t total_true() const;
  std::size_t total_all() const;
};

// Mean accuracy over repetitions. All runs must share num_all (ProtocolError
// otherwise); the mean is computed as sum(num_true) / sum(num_all), which is
// the arithmetic mean of the per-run ACC values.
AggregateAccuracy aggregate_runs(const std::vector<RunAccuracy>& runs);

}  // namespace attnablate
