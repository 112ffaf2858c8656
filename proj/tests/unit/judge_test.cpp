#include <doctest.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <nlohmann/json.hpp>

#include "attnablate/error.hpp"
#include "attnablate/judge.hpp"
#include "fixtures.hpp"
#include "mock_judge.hpp"

using namespace attnablate;
namespace ts = testing_support;
using namespace std::chrono_literals;

namespace {

QaItem paris() { return {"q1", "What is the capital of France?", {"paris", "Paris, France"}, {"Lyon"}}; }

RemoteJudgeConfig fast_config(const std::string& endpoint) {
  RemoteJudgeConfig c;
  c.endpoint = endpoint;
  c.initial_backoff = 1ms;
  c.max_backoff = 4ms;
  c.timeout = 2s;
  return c;
}

}  // namespace

TEST_CASE("normalize_answer") {
  CHECK(normalize_answer("  Paris.  ") == "paris");
  CHECK(normalize_answer("The\t Eiffel\n\nTower!?") == "the eiffel tower");
  CHECK(normalize_answer("a,b;:") == "a,b");
  CHECK(normalize_answer("") == "");
}

TEST_CASE("reference judge examples") {
  const QaItem item = paris();
  CHECK(judge_reference("Paris.", item).label == Label::correct);
  CHECK(judge_reference("Lyon", item).label == Label::incorrect);
  CHECK(judge_reference("Marseille", item).label == Label::incorrect);
  CHECK(judge_reference("paris, france", item).label == Label::correct);

  QaItem both{"q2", "?", {"yes"}, {"Yes!"}};
  CHECK(judge_reference("yes", both).label == Label::incorrect);

  const Verdict v = judge_reference("Paris", item);
  CHECK(v.item_id == "q1");
  CHECK(v.answer_text == "Paris");
  CHECK(v.judge_kind == JudgeKind::reference);
  CHECK_FALSE(v.rationale.has_value());
}

TEST_CASE("render_prompt substitutes exactly") {
  const JudgePrompt p("Q:{question} A:{answer} REF:{correct_refs} BAD:{incorrect_refs}");
  const QaItem item{"i", "why?", {"one", "two"}, {"three"}};
  const std::string a = render_prompt(p, item, "because {question}");
  CHECK(a == "Q:why? A:because {question} REF:one; two BAD:three");
  CHECK(render_prompt(p, item, "because {question}") == a);

  CHECK_THROWS_AS(JudgePrompt("Q:{question} A:{answer} REF:{correct_refs}"), InputError);
  CHECK_THROWS_AS(JudgePrompt("{question}{question}{answer}{correct_refs}{incorrect_refs}"), InputError);
  CHECK_NOTHROW(JudgePrompt::builtin());
  CHECK(JudgePrompt::builtin().text().find("VERDICT: correct") != std::string::npos);
}

TEST_CASE("parse_judge_reply marker convention") {
  CHECK(parse_judge_reply("The answer matches.\nVERDICT: correct") == Label::correct);
  CHECK(parse_judge_reply("  verdict: INCORRECT  \n") == Label::incorrect);
  for (const char* bad : {"", "correct", "VERDICT: maybe", "VERDICT: correct\nVERDICT: incorrect",
                          "VERDICT: correct because"}) {
    CAPTURE(bad);
    try {
      parse_judge_reply(bad);
      FAIL("expected JudgeParseError");
    } catch (const JudgeParseError& e) {
      CHECK(std::string(e.what()) == "judge reply unparseable");
      CHECK(e.raw_reply() == bad);
    }
  }
}

TEST_CASE("sha256 and cache keys") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(ReplyCache::key("m", "p") == sha256_hex("m\np"));
  CHECK(ReplyCache::key("m", "p") != ReplyCache::key("m2", "p"));
}

TEST_CASE("remote judge against a mock server") {
  SUBCASE("marker reply and temperature 0") {
    mock::JudgeServer server(mock::JudgeServer::fixed(200, mock::completion("Looks right.\nVERDICT: correct")));
    const RemoteJudgeClient client(fast_config(server.endpoint()));
    const Verdict v = judge_remote(client, "Paris", paris(), JudgePrompt::builtin());
    CHECK(v.label == Label::correct);
    CHECK(v.judge_kind == JudgeKind::remote);
    CHECK(v.rationale == "Looks right.\nVERDICT: correct");
    REQUIRE(server.bodies().size() == 1);
    const auto body = nlohmann::json::parse(server.bodies()[0]);
    CHECK(body.at("temperature") == 0);
    CHECK(body.at("model") == "gpt-3.5-turbo");
    CHECK(body.at("messages").at(0).at("role") == "user");
    CHECK(body.at("messages").at(0).at("content") == render_prompt(JudgePrompt::builtin(), paris(), "Paris"));
  }
  SUBCASE("HTTP 500 five times is a transport error after 5 attempts") {
    mock::JudgeServer server(mock::JudgeServer::fixed(500, "oops"));
    const RemoteJudgeClient client(fast_config(server.endpoint()));
    CHECK_THROWS_AS(judge_remote(client, "Paris", paris(), JudgePrompt::builtin()), TransportError);
    CHECK(server.hits() == 5);
  }
  SUBCASE("transient failures are retried then succeed") {
    std::atomic<int> calls{0};
    mock::JudgeServer server([&](const httplib::Request&, httplib::Response& res) {
      if (++calls <= 2) {
        res.status = 429;
        return;
      }
      res.set_content(mock::completion("VERDICT: incorrect"), "application/json");
    });
    const RemoteJudgeClient client(fast_config(server.endpoint()));
    CHECK(judge_remote(client, "Lyon", paris(), JudgePrompt::builtin()).label == Label::incorrect);
    CHECK(server.hits() == 3);
  }
  SUBCASE("client errors are not retried") {
    mock::JudgeServer server(mock::JudgeServer::fixed(401, "{}"));
    const RemoteJudgeClient client(fast_config(server.endpoint()));
    CHECK_THROWS_AS(client.complete("x"), TransportError);
    CHECK(server.hits() == 1);
  }
  SUBCASE("backoff grows between attempts") {
    mock::JudgeServer server(mock::JudgeServer::fixed(503, ""));
    auto cfg = fast_config(server.endpoint());
    cfg.max_attempts = 4;
    cfg.initial_backoff = 20ms;
    cfg.max_backoff = 40ms;
    const RemoteJudgeClient client(cfg);
    const auto start = std::chrono::steady_clock::now();
    CHECK_THROWS_AS(client.complete("x"), TransportError);
    CHECK(std::chrono::steady_clock::now() - start >= 100ms);  // 20 + 40 + 40
    CHECK(server.hits() == 4);
  }
  SUBCASE("unparseable replies surface as errors") {
    mock::JudgeServer server(mock::JudgeServer::fixed(200, mock::completion("I think it is fine")));
    const RemoteJudgeClient client(fast_config(server.endpoint()));
    try {
      judge_remote(client, "Paris", paris(), JudgePrompt::builtin());
      FAIL("expected JudgeParseError");
    } catch (const JudgeParseError& e) {
      CHECK(e.raw_reply() == "I think it is fine");
    }
    mock::JudgeServer garbage(mock::JudgeServer::fixed(200, "<html>"));
    const RemoteJudgeClient c2(fast_config(garbage.endpoint()));
    CHECK_THROWS_AS(c2.complete("x"), JudgeParseError);
  }
  SUBCASE("unreachable endpoint") {
    std::string endpoint;
    {
      mock::JudgeServer gone(mock::JudgeServer::fixed(200, ""));
      endpoint = gone.endpoint();
    }
    auto cfg = fast_config(endpoint);
    cfg.max_attempts = 2;
    CHECK_THROWS_AS(RemoteJudgeClient(cfg).complete("x"), TransportError);
  }
  SUBCASE("cache hits skip the network") {
    ts::TempDir dir("cache");
    mock::JudgeServer server(mock::JudgeServer::fixed(200, mock::completion("VERDICT: correct")));
    auto cfg = fast_config(server.endpoint());
    cfg.cache_dir = dir.path() / "replies";
    const RemoteJudgeClient client(cfg);
    CHECK(client.complete("same prompt") == "VERDICT: correct");
    CHECK(client.complete("same prompt") == "VERDICT: correct");
    CHECK(server.hits() == 1);
    CHECK(std::filesystem::exists(dir.path() / "replies" / (ReplyCache::key("gpt-3.5-turbo", "same prompt") + ".txt")));
  }
  SUBCASE("batch judging keeps order and bounds concurrency") {
    std::atomic<int> in_flight{0}, peak{0};
    mock::JudgeServer server([&](const httplib::Request& req, httplib::Response& res) {
      const int now = ++in_flight;
      int p = peak.load();
      while (now > p && !peak.compare_exchange_weak(p, now)) {
      }
      std::this_thread::sleep_for(5ms);
      const auto body = nlohmann::json::parse(req.body);
      const std::string prompt = body["messages"][0]["content"];
      const bool good = prompt.find("Answer: Paris") != std::string::npos;
      res.set_content(mock::completion(good ? "VERDICT: correct" : "VERDICT: incorrect"), "application/json");
      --in_flight;
    });
    auto cfg = fast_config(server.endpoint());
    cfg.max_in_flight = 2;
    const RemoteJudgeClient client(cfg);
    const QaItem item = paris();
    std::vector<JudgeRequest> reqs;
    for (int i = 0; i < 10; ++i) reqs.push_back({&item, i % 3 == 0 ? "Paris" : "Lyon " + std::to_string(i)});
    const auto verdicts = judge_remote_batch(client, reqs, JudgePrompt("Question: {question}\nAnswer: {answer}\n{correct_refs}|{incorrect_refs}"));
    REQUIRE(verdicts.size() == 10);
    for (int i = 0; i < 10; ++i) {
      CHECK(verdicts[i].answer_text == reqs[i].answer);
      CHECK(verdicts[i].label == (i % 3 == 0 ? Label::correct : Label::incorrect));
    }
    CHECK(peak.load() <= 2);
    CHECK(server.hits() == 10);
  }
}

TEST_CASE("remote client configuration errors") {
  RemoteJudgeConfig c;
  c.endpoint = "not a url";
  CHECK_THROWS_AS(RemoteJudgeClient{c}, InputError);
  c.endpoint = "http://127.0.0.1:1/x";
  c.max_attempts = 0;
  CHECK_THROWS_AS(RemoteJudgeClient{c}, InputError);
}
