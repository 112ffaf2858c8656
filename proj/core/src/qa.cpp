#include "attnablate/qa.hpp"

#include <fstream>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "attnablate/error.hpp"

namespace attnablate {

using json = nlohmann::json;

std::string to_string(QaFormat f) { return f == QaFormat::truthfulqa ? "truthfulqa" : "halueval"; }

QaFormat parse_qa_format(std::string_view s) {
  if (s == "truthfulqa") return QaFormat::truthfulqa;
  if (s == "halueval") return QaFormat::halueval;
  throw InputError("unknown dataset format '" + std::string(s) + "' (expected truthfulqa or halueval)");
}

std::size_t default_repetitions(QaFormat f) { return f == QaFormat::truthfulqa ? 5 : 2; }

std::string to_string(Label l) { return l == Label::correct ? "correct" : "incorrect"; }

QaSet parse_qaset(std::istream& in, QaFormat format, std::string name) {
  QaSet set;
  set.name = std::move(name);
  set.format = format;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw InputError(where + "invalid JSON (" + e.what() + ")");
    }
    if (!rec.is_object()) throw InputError(where + "record must be a JSON object");
    QaItem item;
    try {
      if (!rec.contains("id")) throw InputError(where + "missing id");
      if (!rec.contains("question")) throw InputError(where + "missing question");
      if (!rec.contains("correct_refs")) throw InputError(where + "missing correct_refs");
      item.id = rec["id"].is_string() ? rec["id"].get<std::string>() : rec["id"].dump();
      item.question = rec["question"].get<std::string>();
      item.correct_refs = rec["correct_refs"].get<std::vector<std::string>>();
      if (rec.contains("incorrect_refs"))
        item.incorrect_refs = rec["incorrect_refs"].get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw InputError(where + "schema violation (" + e.what() + ")");
    }
    if (item.question.empty()) throw InputError(where + "empty question");
    if (item.correct_refs.empty()) throw InputError(where + "correct_refs must be non-empty");
    if (!ids.insert(item.id).second) throw InputError(where + "duplicate id '" + item.id + "'");
    set.items.push_back(std::move(item));
  }
  if (set.items.empty()) throw InputError("dataset '" + set.name + "' is empty");
  return set;
}

QaSet load_qaset(const std::filesystem::path& path, QaFormat format) {
  std::ifstream in(path);
  if (!in) throw InputError("dataset not found: " + path.string());
  return parse_qaset(in, format, path.stem().string());
}

void write_qaset(const QaSet& set, std::ostream& out) {
  for (const auto& item : set.items) {
    json rec;
    rec["id"] = item.id;
    rec["question"] = item.question;
    rec["correct_refs"] = item.correct_refs;
    rec["incorrect_refs"] = item.incorrect_refs;
    out << rec.dump() << '\n';
  }
}

QaSet sample_questions(const QaSet& set, std::size_t n, std::uint64_t seed) {
  const std::size_t total = set.items.size();
  if (n < 1 || n > total) {
    throw InputError("sample size " + std::to_string(n) + " out of range [1, " + std::to_string(total) + "]");
  }
  // Knuth's selection sampling (Algorithm S): item t is kept with
  // probability (n - selected) / (total - t).
  std::mt19937_64 rng(seed);
  QaSet out;
  out.name = set.name;
  out.format = set.format;
  out.items.reserve(n);
  std::size_t selected = 0;
  for (std::size_t t = 0; t < total && selected < n; ++t) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    if (static_cast<double>(total - t) * u < static_cast<double>(n - selected)) {
      out.items.push_back(set.items[t]);
      ++selected;
    }
  }
  return out;
}

RunAccuracy accuracy(const std::vector<Label>& verdicts) {
  if (verdicts.empty()) throw InputError("accuracy of an empty verdict list");
  RunAccuracy r;
  r.num_all = verdicts.size();
  for (auto v : verdicts)
    if (v == Label::correct) ++r.num_true;
  r.acc = static_cast<double>(r.num_true) / static_cast<double>(r.num_all);
  return r;
}

std::size_t AggregateAccuracy::total_true() const {
  std::size_t n = 0;
  for (const auto& r : runs) n += r.num_true;
  return n;
}

std::size_t AggregateAccuracy::total_all() const {
  std::size_t n = 0;
  for (const auto& r : runs) n += r.num_all;
  return n;
}

AggregateAccuracy aggregate_runs(const std::vector<RunAccuracy>& runs) {
  if (runs.empty()) throw InputError("aggregate of zero runs");
  for (const auto& r : runs) {
    if (r.num_all != runs.front().num_all) {
      throw ProtocolError("repetitions answered different numbers of questions (" +
                          std::to_string(runs.front().num_all) + " vs " + std::to_string(r.num_all) + ")");
    }
    if (r.num_all == 0 || r.num_true > r.num_all) throw ProtocolError("invalid run accuracy record");
  }
  AggregateAccuracy agg;
  agg.runs = runs;
  agg.mean = static_cast<double>(agg.total_true()) / static_cast<double>(agg.total_all());
  return agg;
}

}  // namespace attnablate
