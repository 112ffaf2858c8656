#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "attnablate/model.hpp"
#include "attnablate/qa.hpp"

namespace attnablate::fixtures {

// Tiny model used throughout the tests: 4 layers, 2 heads, dim 16.
ModelConfig tiny_config();
inline constexpr std::uint64_t kTinySeed = 20240501;
Model tiny_model();

// A 20-item single-token QA set built against tiny_model(): ablating layer 2
// turns exactly `flips` wrong answers into right ones and leaves every other
// item's correctness unchanged.
struct RiggedSet {
  QaSet set;
  std::size_t correct_under_zo = 0;
  std::size_t correct_under_z2 = 0;
};
RiggedSet rigged_qaset(const Model& model, std::size_t items = 20, std::size_t flips = 3);

// Writes tiny-4L.bin, rigged-20.jsonl and experiment-tiny.json into `dir`.
void write_fixtures(const std::filesystem::path& dir);

inline constexpr const char* kQuestionTemplate = "Q: {question}\nA:";

}  // namespace attnablate::fixtures
