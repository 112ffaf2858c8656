#include "attnablate/runner.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <set>
#include <thread>

#include "attnablate/error.hpp"
#include "attnablate/intervention.hpp"
#include "attnablate/model.hpp"
#include "attnablate/report.hpp"

namespace attnablate {

using json = nlohmann::json;

std::string tool_version() { return ATTNABLATE_VERSION; }

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw InputError("config: unknown key '" + key + "' in " + where);
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

std::string render_question(const std::string& tmpl, const std::string& question) {
  const auto pos = tmpl.find("{question}");
  if (pos == std::string::npos) return tmpl;
  return tmpl.substr(0, pos) + question + tmpl.substr(pos + 10);
}

struct PointOutcome {
  PointResult result;
  std::vector<PointAnswer> answers;  // per item
};

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw InputError("config must be a JSON object");
  reject_unknown(doc,
                 {"schema_version", "model", "benchmark", "sweep", "repetitions", "sample_size", "seed", "judge",
                  "max_new_tokens", "question_template", "output_dir", "workers"},
                 "config");
  ExperimentConfig c;
  try {
    if (!doc.contains("schema_version") || doc.at("schema_version").get<int>() != kConfigSchemaVersion)
      throw InputError("config: schema_version must be " + std::to_string(kConfigSchemaVersion));

    const json& model = doc.at("model");
    reject_unknown(model, {"path", "bridge"}, "model");
    if (model.contains("bridge")) c.bridge_target = model.at("bridge");
    if (model.contains("path")) c.model_path = resolve(base_dir, model.at("path").get<std::string>());
    if (!model.contains("path") && !model.contains("bridge"))
      throw InputError("config: model needs 'path' or 'bridge'");

    const json& bench = doc.at("benchmark");
    reject_unknown(bench, {"path", "format"}, "benchmark");
    c.benchmark_path = resolve(base_dir, bench.at("path").get<std::string>());
    c.benchmark_format = parse_qa_format(bench.at("format").get<std::string>());

    c.sweep = doc.at("sweep").get<std::vector<std::string>>();
    if (doc.contains("repetitions")) {
      c.repetitions = doc.at("repetitions").get<std::size_t>();
      if (c.repetitions < 1) throw InputError("config: repetitions must be >= 1");
    }
    if (doc.contains("sample_size") && !doc.at("sample_size").is_null())
      c.sample_size = doc.at("sample_size").get<std::size_t>();
    if (doc.contains("seed")) c.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("max_new_tokens")) c.max_new_tokens = doc.at("max_new_tokens").get<std::size_t>();
    if (doc.contains("question_template")) c.question_template = doc.at("question_template").get<std::string>();
    if (doc.contains("output_dir")) c.output_dir = resolve(base_dir, doc.at("output_dir").get<std::string>());
    if (doc.contains("workers")) c.workers = doc.at("workers").get<std::size_t>();

    if (doc.contains("judge")) {
      const json& j = doc.at("judge");
      reject_unknown(j,
                     {"kind", "endpoint", "model", "api_key_env", "prompt", "cache_dir", "max_in_flight",
                      "max_attempts", "initial_backoff_ms", "timeout_s"},
                     "judge");
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "reference") {
        c.judge.kind = JudgeKind::reference;
      } else if (kind == "remote") {
        c.judge.kind = JudgeKind::remote;
        auto& r = c.judge.remote;
        r.endpoint = j.at("endpoint").get<std::string>();
        if (j.contains("model")) r.model = j.at("model").get<std::string>();
        if (j.contains("api_key_env")) r.api_key_env = j.at("api_key_env").get<std::string>();
        if (j.contains("cache_dir")) r.cache_dir = resolve(base_dir, j.at("cache_dir").get<std::string>());
        if (j.contains("max_in_flight")) r.max_in_flight = j.at("max_in_flight").get<std::size_t>();
        if (j.contains("max_attempts")) r.max_attempts = j.at("max_attempts").get<int>();
        if (j.contains("initial_backoff_ms"))
          r.initial_backoff = std::chrono::milliseconds(j.at("initial_backoff_ms").get<long>());
        if (j.contains("timeout_s")) r.timeout = std::chrono::seconds(j.at("timeout_s").get<long>());
      } else {
        throw InputError("config: judge.kind must be 'reference' or 'remote'");
      }
      if (j.contains("prompt")) c.judge.prompt_path = resolve(base_dir, j.at("prompt").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("config not found: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(doc, path.parent_path());
}

void ExperimentConfig::validate() const {
  if (sweep.empty()) throw InputError("config: sweep must not be empty");
  if (sweep.front() != "z_o") throw InputError("config: sweep must start with z_o");
  for (const auto& l : sweep) parse_point(l);
  if (sample_size && *sample_size < 1) throw InputError("config: sample_size must be >= 1");
  if (question_template.find("{question}") == std::string::npos)
    throw InputError("config: question_template must contain {question}");
}

json ExperimentConfig::to_json() const {
  json doc;
  doc["schema_version"] = kConfigSchemaVersion;
  if (bridge_target) {
    doc["model"] = {{"bridge", *bridge_target}};
  } else {
    doc["model"] = {{"path", model_path.generic_string()}};
  }
  doc["benchmark"] = {{"path", benchmark_path.generic_string()}, {"format", to_string(benchmark_format)}};
  doc["sweep"] = sweep;
  doc["repetitions"] = effective_repetitions();
  doc["sample_size"] = sample_size ? json(*sample_size) : json(nullptr);
  doc["seed"] = seed;
  json j;
  j["kind"] = to_string(judge.kind);
  if (judge.kind == JudgeKind::remote) {
    j["endpoint"] = judge.remote.endpoint;
    j["model"] = judge.remote.model;
    j["api_key_env"] = judge.remote.api_key_env;
    j["max_in_flight"] = judge.remote.max_in_flight;
    j["max_attempts"] = judge.remote.max_attempts;
    j["initial_backoff_ms"] = judge.remote.initial_backoff.count();
    j["timeout_s"] = judge.remote.timeout.count();
    if (judge.remote.cache_dir) j["cache_dir"] = judge.remote.cache_dir->generic_string();
  }
  if (judge.prompt_path) j["prompt"] = judge.prompt_path->generic_string();
  doc["judge"] = j;
  doc["max_new_tokens"] = max_new_tokens;
  doc["question_template"] = question_template;
  doc["output_dir"] = output_dir.generic_string();
  return doc;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.bridge_target)
    throw InputError("bridge targets run through the Python bridge; the C++ runner needs model.path");

  const auto model = std::make_shared<const Model>(load_model(config.model_path));
  const QaSet full = load_qaset(config.benchmark_path, config.benchmark_format);
  if (config.sample_size && *config.sample_size > full.size()) {
    throw InputError("config: sample_size " + std::to_string(*config.sample_size) + " exceeds dataset size " +
                     std::to_string(full.size()));
  }
  // One seeded sample per experiment, shared by every point and repetition.
  const QaSet questions = config.sample_size ? sample_questions(full, *config.sample_size, config.seed) : full;
  const std::size_t reps = config.effective_repetitions();

  std::vector<AblationSpec> specs;
  for (const auto& l : config.sweep) specs.push_back(parse_point(l, model->config().num_layers));

  const JudgePrompt judge_prompt =
      config.judge.prompt_path ? JudgePrompt::from_file(*config.judge.prompt_path) : JudgePrompt::builtin();
  std::optional<RemoteJudgeClient> remote;
  if (config.judge.kind == JudgeKind::remote) remote.emplace(config.judge.remote);

  std::vector<TokenSeq> prompts;
  for (const auto& item : questions.items)
    prompts.push_back(bytes_tok::encode(render_question(config.question_template, item.question)));

  auto run_point = [&](std::size_t p) {
    PointOutcome out;
    const InterventionHandle handle = attnablate::apply(specs[p], model);
    out.result.label = config.sweep[p];
    out.result.layers.assign(specs[p].layers().begin(), specs[p].layers().end());
    out.answers.resize(questions.size());
    std::vector<RunAccuracy> runs;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      std::vector<std::string> answers(questions.size());
      for (std::size_t i = 0; i < questions.size(); ++i) {
        const TokenSeq seq = handle.decode(prompts[i], config.max_new_tokens, bytes_tok::kEos);
        answers[i] = bytes_tok::decode(TokenSeq(seq.begin() + static_cast<std::ptrdiff_t>(prompts[i].size()), seq.end()));
      }
      std::vector<Verdict> verdicts;
      if (remote) {
        std::vector<JudgeRequest> reqs;
        for (std::size_t i = 0; i < questions.size(); ++i) reqs.push_back({&questions.items[i], answers[i]});
        verdicts = judge_remote_batch(*remote, reqs, judge_prompt);
      } else {
        for (std::size_t i = 0; i < questions.size(); ++i)
          verdicts.push_back(judge_reference(answers[i], questions.items[i]));
      }
      std::vector<Label> labels;
      for (std::size_t i = 0; i < questions.size(); ++i) {
        labels.push_back(verdicts[i].label);
        auto& a = out.answers[i];
        if (rep == 0) {
          a.label = config.sweep[p];
          a.answer = answers[i];
          a.rationale = verdicts[i].rationale;
        }
        a.verdicts.push_back(verdicts[i].label);
      }
      runs.push_back(accuracy(labels));
    }
    out.result.accuracy = aggregate_runs(runs);
    return out;
  };

  // Sweep points fan out over workers; results land by index so the
  // reduction below does not depend on scheduling.
  const std::size_t n_points = specs.size();
  std::vector<std::optional<PointOutcome>> outcomes(n_points);
  std::vector<std::exception_ptr> errors(n_points);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t p = next++; p < n_points; p = next++) {
      try {
        outcomes[p] = run_point(p);
      } catch (...) {
        errors[p] = std::current_exception();
      }
    }
  };
  std::size_t n_workers = config.workers != 0 ? config.workers : std::max(1u, std::thread::hardware_concurrency());
  n_workers = std::min(n_workers, n_points);
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  }

  ExperimentReport report;
  report.config = config.to_json();
  report.tool_version = tool_version();
  report.dataset_name = full.name;
  report.dataset_size = full.size();
  report.questions_evaluated = questions.size();
  bool multi_layer = false;
  for (const auto& s : specs) multi_layer = multi_layer || s.size() > 1;
  report.protocol = {
      {"decoding", "greedy (temperature 0, lowest-id tie-break)"},
      {"generation_per_repetition", true},
      {"sample", config.sample_size ? json{{"size", *config.sample_size},
                                           {"seed", config.seed},
                                           {"algorithm", std::string(kSamplerName)},
                                           {"shared_across_points_and_repetitions", true}}
                                    : json(nullptr)},
      {"halueval_subset", config.benchmark_format == QaFormat::halueval ? json("qa") : json(nullptr)},
      {"repetitions", reps},
      {"judge", to_string(config.judge.kind)},
      {"intervention", "attention sublayer output zeroed after the output projection"},
      {"multi_layer_points", multi_layer},
  };

  for (std::size_t p = 0; p < n_points; ++p) {
    if (errors[p]) {
      std::string what = "unknown error";
      try {
        std::rethrow_exception(errors[p]);
      } catch (const std::exception& e) {
        what = e.what();
      } catch (...) {
      }
      for (std::size_t q = 0; q < n_points; ++q)
        if (outcomes[q]) report.points.push_back(outcomes[q]->result);
      std::error_code ec;
      std::filesystem::create_directories(config.output_dir, ec);
      std::ofstream partial(config.output_dir / "partial_report.json");
      if (partial) partial << report_to_json(report).dump(2) << '\n';
      throw ExperimentError("sweep point " + config.sweep[p] + ": " + what);
    }
  }

  const AggregateAccuracy& zo = outcomes[0]->result.accuracy;
  for (std::size_t p = 0; p < n_points; ++p) {
    PointResult r = outcomes[p]->result;
    const auto& a = r.accuracy;
    if (a.total_all() == zo.total_all()) {
      const double diff = static_cast<double>(a.total_true()) - static_cast<double>(zo.total_true());
      r.delta_vs_zo = diff / static_cast<double>(zo.total_all());
    } else {
      r.delta_vs_zo = a.mean - zo.mean;
    }
    report.points.push_back(std::move(r));
  }
  for (std::size_t i = 0; i < questions.size(); ++i) {
    Transcript t;
    t.item_id = questions.items[i].id;
    t.question = questions.items[i].question;
    for (std::size_t p = 0; p < n_points; ++p) t.points.push_back(outcomes[p]->answers[i]);
    report.transcripts.push_back(std::move(t));
  }
  return report;
}

}  // namespace attnablate
