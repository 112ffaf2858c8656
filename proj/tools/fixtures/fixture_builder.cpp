#include "fixture_builder.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "attnablate/error.hpp"
#include "attnablate/judge.hpp"

namespace attnablate::fixtures {
namespace {

constexpr const char* kSubjects[] = {"river", "planet", "violin", "granite", "falcon", "harbor", "lantern",
                                     "meadow", "copper", "glacier", "orchid", "tunnel", "compass", "ember"};
constexpr const char* kAsks[] = {"What colour is the", "Where is the", "Who owns the", "Why is the",
                                 "How old is the"};

std::string answer_for(const Model& m, const std::string& question, const AblationSpec& spec) {
  std::string prompt = kQuestionTemplate;
  prompt.replace(prompt.find("{question}"), 10, question);
  const TokenSeq p = bytes_tok::encode(prompt);
  const TokenSeq out = greedy_decode(m, p, 1, spec, bytes_tok::kEos);
  return bytes_tok::decode(TokenSeq(out.begin() + static_cast<std::ptrdiff_t>(p.size()), out.end()));
}

}  // namespace

ModelConfig tiny_config() {
  ModelConfig c;
  c.num_layers = 4;
  c.num_heads = 2;
  c.model_dim = 16;
  c.mlp_hidden_dim = 32;
  c.vocab_size = bytes_tok::kVocabSize;
  c.max_seq_len = 64;
  return c;
}

Model tiny_model() { return random_model(tiny_config(), kTinySeed); }

RiggedSet rigged_qaset(const Model& model, std::size_t items, std::size_t flips) {
  const AblationSpec zo;
  const AblationSpec z2{2};
  RiggedSet out;
  out.set.name = "rigged-" + std::to_string(items);
  out.set.format = QaFormat::truthfulqa;

  std::size_t flipped = 0;
  std::size_t stable = 0;
  const std::size_t want_stable = items - flips;
  for (std::size_t n = 0; out.set.items.size() < items; ++n) {
    if (n >= 10000) throw Error("rigged fixture search exhausted its candidates");
    const std::string question = std::string(kAsks[n % 5]) + " " + kSubjects[(n / 5) % 14] + " " +
                                 std::to_string(n / 70) + "?";
    const std::string a0 = answer_for(model, question, zo);
    const std::string a2 = answer_for(model, question, z2);
    const std::string n0 = normalize_answer(a0);
    const std::string n2 = normalize_answer(a2);
    if (n0.empty() || n2.empty()) continue;

    QaItem item;
    item.question = question;
    if (n0 != n2 && flipped < flips) {
      // Wrong under z_o, right under z_2.
      item.correct_refs = {a2};
      item.incorrect_refs = {a0};
      ++flipped;
      ++out.correct_under_z2;
    } else if (a0 == a2 && stable < want_stable) {
      // Same answer either way; alternate between right and wrong.
      if (stable % 2 == 0) {
        item.correct_refs = {a0};
        ++out.correct_under_zo;
        ++out.correct_under_z2;
      } else {
        item.correct_refs = {"none of the above"};
        item.incorrect_refs = {a0};
      }
      ++stable;
    } else {
      continue;
    }
    item.id = "rig-" + std::to_string(out.set.items.size() + 1);
    out.set.items.push_back(std::move(item));
  }

  // Verify the construction with the judge actually used by the runner.
  std::size_t c0 = 0, c2 = 0;
  for (const auto& item : out.set.items) {
    c0 += judge_reference(answer_for(model, item.question, zo), item).label == Label::correct;
    c2 += judge_reference(answer_for(model, item.question, z2), item).label == Label::correct;
  }
  if (c0 != out.correct_under_zo || c2 != out.correct_under_z2 || c2 - c0 != flips)
    throw Error("rigged fixture failed verification");
  return out;
}

void write_fixtures(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const Model model = tiny_model();
  save_model(model, dir / "tiny-4L.bin");

  const RiggedSet rig = rigged_qaset(model);
  {
    std::ofstream out(dir / "rigged-20.jsonl", std::ios::binary | std::ios::trunc);
    write_qaset(rig.set, out);
  }

  nlohmann::json cfg;
  cfg["schema_version"] = 1;
  cfg["model"] = {{"path", "tiny-4L.bin"}};
  cfg["benchmark"] = {{"path", "rigged-20.jsonl"}, {"format", "truthfulqa"}};
  cfg["sweep"] = {"z_o", "z_1", "z_2", "z_3", "z_4"};
  cfg["repetitions"] = 5;
  cfg["seed"] = 7;
  cfg["judge"] = {{"kind", "reference"}};
  cfg["max_new_tokens"] = 1;
  cfg["question_template"] = kQuestionTemplate;
  cfg["output_dir"] = "out";
  std::ofstream out(dir / "experiment-tiny.json", std::ios::binary | std::ios::trunc);
  out << cfg.dump(2) << '\n';
}

}  // namespace attnablate::fixtures
