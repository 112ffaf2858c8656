#include <algorithm>
#include <iterator>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "attnablate/error.hpp"
#include "attnablate/qa.hpp"

namespace attnablate {
namespace {

// RFC 4180 records: quoted fields may contain commas, doubled quotes and newlines.
std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        any = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        if (any || !field.empty()) {
          row.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        row.clear();
        field.clear();
        any = false;
        break;
      default:
        field.push_back(c);
        any = true;
    }
  }
  if (quoted) throw InputError("csv: unterminated quoted field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_answers(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto semi = s.find(';', start);
    std::string part = trim(std::string_view(s).substr(start, semi == std::string::npos ? std::string::npos : semi - start));
    if (!part.empty() && std::find(out.begin(), out.end(), part) == out.end()) out.push_back(std::move(part));
    if (semi == std::string::npos) break;
    start = semi + 1;
  }
  return out;
}

}  // namespace

QaSet import_truthfulqa_csv(std::istream& in) {
  const auto rows = parse_csv(in);
  if (rows.empty()) throw InputError("truthfulqa csv: no header row");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].size(); ++i) col[trim(rows[0][i])] = i;
  for (const char* needed : {"Question", "Best Answer", "Correct Answers", "Incorrect Answers"})
    if (!col.count(needed)) throw InputError(std::string("truthfulqa csv: missing column '") + needed + "'");

  QaSet set;
  set.name = "truthfulqa";
  set.format = QaFormat::truthfulqa;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto get = [&](const char* name) {
      const auto i = col.at(name);
      return i < row.size() ? row[i] : std::string();
    };
    QaItem item;
    item.id = "tqa-" + std::to_string(r);
    item.question = trim(get("Question"));
    if (item.question.empty()) throw InputError("truthfulqa csv: row " + std::to_string(r + 1) + " has no question");
    item.correct_refs = split_answers(get("Best Answer"));
    for (auto& a : split_answers(get("Correct Answers")))
      if (std::find(item.correct_refs.begin(), item.correct_refs.end(), a) == item.correct_refs.end())
        item.correct_refs.push_back(std::move(a));
    item.incorrect_refs = split_answers(get("Incorrect Answers"));
    if (item.correct_refs.empty())
      throw InputError("truthfulqa csv: row " + std::to_string(r + 1) + " has no correct answer");
    set.items.push_back(std::move(item));
  }
  if (set.items.empty()) throw InputError("truthfulqa csv: no records");
  return set;
}

QaSet import_halueval_json(std::istream& in) {
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<nlohmann::json> records;
  const auto first = text.find_first_not_of(" \t\r\n");
  try {
    if (first != std::string::npos && text[first] == '[') {
      for (auto& r : nlohmann::json::parse(text)) records.push_back(r);
    } else {
      std::istringstream lines(text);
      std::string line;
      while (std::getline(lines, line))
        if (line.find_first_not_of(" \t\r") != std::string::npos) records.push_back(nlohmann::json::parse(line));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("halueval json: ") + e.what());
  }

  QaSet set;
  set.name = "halueval";
  set.format = QaFormat::halueval;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    const std::string where = "halueval record " + std::to_string(i + 1) + ": ";
    QaItem item;
    item.id = "halueval-" + std::to_string(i + 1);
    try {
      item.question = trim(rec.at("question").get<std::string>());
      item.correct_refs = {trim(rec.at("right_answer").get<std::string>())};
      if (rec.contains("hallucinated_answer"))
        item.incorrect_refs = {trim(rec["hallucinated_answer"].get<std::string>())};
    } catch (const nlohmann::json::exception& e) {
      throw InputError(where + e.what());
    }
    if (item.question.empty() || item.correct_refs.front().empty())
      throw InputError(where + "empty question or right_answer");
    set.items.push_back(std::move(item));
  }
  if (set.items.empty()) throw InputError("halueval json: no records");
  return set;
}

}  // namespace attnablate
