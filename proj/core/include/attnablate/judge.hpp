#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "attnablate/qa.hpp"

namespace attnablate {

enum class JudgeKind { reference, remote };
std::string to_string(JudgeKind k);

struct Verdict {
  std::string item_id;
  std::string answer_text;
  Label label = Label::incorrect;
  JudgeKind judge_kind = JudgeKind::reference;
  std::optional<std::string> rationale;
};

// Lowercase, trim, collapse internal whitespace, strip trailing . ! ? , ; :
std::string normalize_answer(std::string_view text);

// Correct iff the normalized answer equals some correct ref and no incorrect
// ref. Total and deterministic.
Verdict judge_reference(std::string_view answer, const QaItem& item);

// Judge instruction with {question}, {answer}, {correct_refs} and
// {incorrect_refs}, each present exactly once (checked on construction).
class JudgePrompt {
 public:
  explicit JudgePrompt(std::string text);
  static JudgePrompt builtin();
  static JudgePrompt from_file(const std::filesystem::path& path);

  const std::string& text() const noexcept { return text_; }

 private:
  std::string text_;
};

// Reference lists are joined with "; " in declared order.
std::string render_prompt(const JudgePrompt& prompt, const QaItem& item, std::string_view answer);

// Marker convention: exactly one line "VERDICT: correct" or
// "VERDICT: incorrect" (case-insensitive, surrounding whitespace ignored).
// Anything else throws JudgeParseError carrying the raw reply.
Label parse_judge_reply(std::string_view reply);

struct RemoteJudgeConfig {
  // Full chat-completion URL, e.g. https://api.openai.com/v1/chat/completions
  std::string endpoint;
  std::string model = "gpt-3.5-turbo";
  std::string api_key_env = "OPENAI_API_KEY";
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds max_backoff{8000};
  std::chrono::seconds timeout{60};
  std::size_t max_in_flight = 4;
  std::optional<std::filesystem::path> cache_dir;
};

// Content-addressed reply store; safe for concurrent readers and writers.
class ReplyCache {
 public:
  explicit ReplyCache(std::filesystem::path dir);

  static std::string key(std::string_view model, std::string_view prompt);
  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const std::string& reply) const;

 private:
  std::filesystem::path dir_;
};

std::string sha256_hex(std::string_view data);

// Temperature-0 chat-completion client with bounded exponential backoff.
class RemoteJudgeClient {
 public:
  explicit RemoteJudgeClient(RemoteJudgeConfig config);

  const RemoteJudgeConfig& config() const noexcept { return config_; }

  // Returns the assistant message content, from the cache when present.
  // Throws TransportError once retries are exhausted.
  std::string complete(const std::string& prompt) const;

  // Request body sent for `prompt` (exposed for inspection and logs).
  std::string request_body(const std::string& prompt) const;

 private:
  std::string fetch(const std::string& prompt) const;

  RemoteJudgeConfig config_;
  std::string scheme_host_;
  std::string path_;
  std::optional<ReplyCache> cache_;
};

Verdict judge_remote(const RemoteJudgeClient& client, std::string_view answer, const QaItem& item,
                     const JudgePrompt& prompt);

struct JudgeRequest {
  const QaItem* item = nullptr;
  std::string answer;
};

// Judges a batch with at most config().max_in_flight concurrent requests.
// Results keep the input order; the first failure is rethrown.
std::vector<Verdict> judge_remote_batch(const RemoteJudgeClient& client,
                                        const std::vector<JudgeRequest>& requests,
                                        const JudgePrompt& prompt);

}  // namespace attnablate
