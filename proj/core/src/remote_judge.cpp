#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iterator>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "attnablate/error.hpp"
#include "attnablate/judge.hpp"

namespace attnablate {
namespace {

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

ReplyCache::ReplyCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error("cannot create judge cache directory " + dir_.string() + ": " + ec.message());
}

std::string ReplyCache::key(std::string_view model, std::string_view prompt) {
  std::string material(model);
  material.push_back('\n');
  material.append(prompt);
  return sha256_hex(material);
}

std::optional<std::string> ReplyCache::get(const std::string& key) const {
  std::ifstream in(dir_ / (key + ".txt"), std::ios::binary);
  if (!in) return std::nullopt;
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void ReplyCache::put(const std::string& key, const std::string& reply) const {
  static std::atomic<unsigned long long> counter{0};
  std::ostringstream tmp_name;
  tmp_name << key << ".tmp." << std::this_thread::get_id() << "." << counter++;
  const auto tmp = dir_ / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write judge cache entry " + tmp.string());
    out << reply;
  }
  std::error_code ec;
  std::filesystem::rename(tmp, dir_ / (key + ".txt"), ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error("cannot publish judge cache entry for " + key);
  }
}

RemoteJudgeClient::RemoteJudgeClient(RemoteJudgeConfig config) : config_(std::move(config)) {
  const auto scheme_end = config_.endpoint.find("://");
  if (scheme_end == std::string::npos) throw InputError("judge endpoint must be an http(s) URL");
  const auto path_start = config_.endpoint.find('/', scheme_end + 3);
  scheme_host_ = config_.endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
  if (config_.max_attempts < 1) throw InputError("judge max_attempts must be >= 1");
  if (config_.max_in_flight < 1) throw InputError("judge max_in_flight must be >= 1");
  if (config_.cache_dir) cache_.emplace(*config_.cache_dir);
}

std::string RemoteJudgeClient::request_body(const std::string& prompt) const {
  nlohmann::json body;
  body["model"] = config_.model;
  body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = 0;
  return body.dump();
}

std::string RemoteJudgeClient::fetch(const std::string& prompt) const {
  httplib::Client cli(scheme_host_);
  cli.set_connection_timeout(config_.timeout);
  cli.set_read_timeout(config_.timeout);
  cli.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0')
    headers.emplace("Authorization", std::string("Bearer ") + key);
  const std::string body = request_body(prompt);

  auto backoff = config_.initial_backoff;
  std::string last_failure;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    auto res = cli.Post(path_, headers, body, "application/json");
    if (res && res->status == 200) {
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(res->body);
        return doc.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const nlohmann::json::exception&) {
        throw JudgeParseError("judge reply unparseable", res->body);
      }
    }
    if (res && !transient_status(res->status)) {
      throw TransportError("judge endpoint returned HTTP " + std::to_string(res->status));
    }
    last_failure = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
    if (attempt < config_.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff = std::min(backoff * 2, config_.max_backoff);
    }
  }
  throw TransportError("judge request failed after " + std::to_string(config_.max_attempts) +
                       " attempts (last: " + last_failure + ")");
}

std::string RemoteJudgeClient::complete(const std::string& prompt) const {
  std::string key;
  if (cache_) {
    key = ReplyCache::key(config_.model, prompt);
    if (auto hit = cache_->get(key)) return *hit;
  }
  std::string reply = fetch(prompt);
  if (cache_) cache_->put(key, reply);
  return reply;
}

Verdict judge_remote(const RemoteJudgeClient& client, std::string_view answer, const QaItem& item,
                     const JudgePrompt& prompt) {
  const std::string reply = client.complete(render_prompt(prompt, item, answer));
  Verdict v;
  v.item_id = item.id;
  v.answer_text = std::string(answer);
  v.judge_kind = JudgeKind::remote;
  v.label = parse_judge_reply(reply);
  v.rationale = reply;
  return v;
}

std::vector<Verdict> judge_remote_batch(const RemoteJudgeClient& client,
                                        const std::vector<JudgeRequest>& requests,
                                        const JudgePrompt& prompt) {
  std::vector<Verdict> out(requests.size());
  std::vector<std::exception_ptr> errors(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < requests.size(); i = next++) {
      try {
        out[i] = judge_remote(client, requests[i].answer, *requests[i].item, prompt);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::min(client.config().max_in_flight, requests.size());
  std::vector<std::jthread> pool;
  for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  pool.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace attnablate
