#include <benchmark/benchmark.h>

#include <random>

#include "attnablate/attention.hpp"
#include "attnablate/model.hpp"
#include "attnablate/scm.hpp"
#include "fixtures/fixture_builder.hpp"

using namespace attnablate;

namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::uniform_real_distribution<double> d(-1, 1);
  Matrix m(r, c);
  for (double& v : m.data()) v = d(rng);
  return m;
}

void BM_ScaledDotAttention(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const Matrix q = random_matrix(rng, n, 16), k = random_matrix(rng, n, 16), v = random_matrix(rng, n, 16);
  for (auto _ : state) benchmark::DoNotOptimize(scaled_dot_attention(q, k, v, true));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_ScaledDotAttention)->Arg(8)->Arg(32)->Arg(128);

void BM_TinyForward(benchmark::State& state) {
  const Model m = fixtures::tiny_model();
  AblationSpec spec;
  if (state.range(1) != 0) spec.add(static_cast<std::size_t>(state.range(1)));
  TokenSeq prompt(static_cast<std::size_t>(state.range(0)), 'a');
  for (auto _ : state) benchmark::DoNotOptimize(forward(m, prompt, spec).logits);
}
BENCHMARK(BM_TinyForward)->Args({16, 0})->Args({16, 2})->Args({64, 0});

void BM_GreedyDecode(benchmark::State& state) {
  const Model m = fixtures::tiny_model();
  const TokenSeq prompt = bytes_tok::encode("Q: What is the capital of France?\nA:");
  for (auto _ : state) benchmark::DoNotOptimize(greedy_decode(m, prompt, 8, {}, bytes_tok::kEos));
}
BENCHMARK(BM_GreedyDecode);

void BM_FrontDoorAdjust(benchmark::State& state) {
  const scm::CausalGraph g({"U", "X", "M", "Y"}, {{"U", "X"}, {"U", "Y"}, {"X", "M"}, {"M", "Y"}});
  const scm::Scm s = scm::random_scm(g, 7, static_cast<std::size_t>(state.range(0)), 6);
  const scm::Dist obs = scm::joint_distribution(s);
  for (auto _ : state) benchmark::DoNotOptimize(scm::front_door_adjust(obs, "X", {"M"}, "Y", 1));
}
BENCHMARK(BM_FrontDoorAdjust)->Arg(2)->Arg(4);

void BM_DoOracle(benchmark::State& state) {
  const scm::Scm s = scm::hallucination_scm_template(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(scm::do_oracle(s, "H", scm::kBenign, "Y"));
}
BENCHMARK(BM_DoOracle)->Arg(1)->Arg(3);

}  // namespace

BENCHMARK_MAIN();
