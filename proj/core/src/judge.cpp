#include "attnablate/judge.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>

#include "attnablate/error.hpp"

namespace attnablate {

namespace embedded {
extern const std::string_view judge_prompt;
}

namespace {

constexpr std::string_view kPlaceholders[] = {"{question}", "{answer}", "{correct_refs}",
                                              "{incorrect_refs}"};

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos; pos = text.find(needle, pos + needle.size()))
    ++n;
  return n;
}

std::string join_refs(const std::vector<std::string>& refs) {
  std::string out;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (i > 0) out += "; ";
    out += refs[i];
  }
  return out;
}

std::string lower_trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(b, e - b + 1));
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::string to_string(JudgeKind k) { return k == JudgeKind::reference ? "reference" : "remote"; }

std::string normalize_answer(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  while (!out.empty()) {
    const char last = out.back();
    if (last == '.' || last == '!' || last == '?' || last == ',' || last == ';' || last == ':') {
      out.pop_back();
    } else if (last == ' ') {
      out.pop_back();
    } else {
      break;
    }
  }
  return out;
}

Verdict judge_reference(std::string_view answer, const QaItem& item) {
  const std::string norm = normalize_answer(answer);
  auto matches = [&](const std::vector<std::string>& refs) {
    return std::any_of(refs.begin(), refs.end(), [&](const std::string& r) { return normalize_answer(r) == norm; });
  };
  Verdict v;
  v.item_id = item.id;
  v.answer_text = std::string(answer);
  v.judge_kind = JudgeKind::reference;
  v.label = (matches(item.correct_refs) && !matches(item.incorrect_refs)) ? Label::correct : Label::incorrect;
  return v;
}

JudgePrompt::JudgePrompt(std::string text) : text_(std::move(text)) {
  for (auto ph : kPlaceholders) {
    const auto n = count_occurrences(text_, ph);
    if (n != 1) {
      throw InputError("judge prompt template must contain " + std::string(ph) + " exactly once (found " +
                       std::to_string(n) + ")");
    }
  }
}

JudgePrompt JudgePrompt::builtin() { return JudgePrompt(std::string(embedded::judge_prompt)); }

JudgePrompt JudgePrompt::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("judge prompt not found: " + path.string());
  return JudgePrompt(std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
}

std::string render_prompt(const JudgePrompt& prompt, const QaItem& item, std::string_view answer) {
  const std::pair<std::string_view, std::string> subs[] = {
      {"{question}", item.question},
      {"{answer}", std::string(answer)},
      {"{correct_refs}", join_refs(item.correct_refs)},
      {"{incorrect_refs}", join_refs(item.incorrect_refs)},
  };
  // Single left-to-right pass so substituted text is never re-scanned.
  const std::string& t = prompt.text();
  std::string out;
  std::size_t pos = 0;
  while (pos < t.size()) {
    std::size_t best = std::string::npos;
    const std::pair<std::string_view, std::string>* hit = nullptr;
    for (const auto& s : subs) {
      const auto p = t.find(s.first, pos);
      if (p < best) {
        best = p;
        hit = &s;
      }
    }
    if (hit == nullptr) {
      out.append(t, pos, std::string::npos);
      break;
    }
    out.append(t, pos, best - pos);
    out += hit->second;
    pos = best + hit->first.size();
  }
  return out;
}

Label parse_judge_reply(std::string_view reply) {
  std::optional<Label> found;
  std::istringstream lines{std::string(reply)};
  std::string line;
  while (std::getline(lines, line)) {
    const std::string l = lower_trim(line);
    if (l.rfind("verdict:", 0) != 0) continue;
    const std::string value = lower_trim(std::string_view(l).substr(8));
    std::optional<Label> label;
    if (value == "correct") label = Label::correct;
    if (value == "incorrect") label = Label::incorrect;
    if (!label || found) throw JudgeParseError("judge reply unparseable", std::string(reply));
    found = label;
  }
  if (!found) throw JudgeParseError("judge reply unparseable", std::string(reply));
  return *found;
}

}  // namespace attnablate
