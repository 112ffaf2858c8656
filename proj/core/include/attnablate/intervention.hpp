#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "attnablate/ablation.hpp"
#include "attnablate/model.hpp"

namespace attnablate {

// Parses "z_o" (empty spec) or "z_<i>" with 1 <= i <= num_layers.
AblationSpec parse_point(std::string_view label, std::size_t num_layers);

// Parses without a depth bound; the spec is checked when applied.
AblationSpec parse_point(std::string_view label);

struct SweepGrid {
  std::string model_name;
  std::vector<AblationSpec> points;

  std::vector<std::string> labels() const;
  // First point is z_o and points are unique; throws ProtocolError otherwise.
  void validate() const;
};

// {model_name: {benchmark: [labels]}}, as stored in grids.json.
class GridRegistry {
 public:
  static GridRegistry builtin();
  static GridRegistry from_file(const std::filesystem::path& path);
  static GridRegistry from_json(std::string_view text);

  // Throws InputError listing the known pairs when (model, benchmark) is absent.
  SweepGrid grid(const std::string& model_name, const std::string& benchmark) const;

  std::vector<std::pair<std::string, std::string>> known_pairs() const;

 private:
  std::map<std::string, std::map<std::string, std::vector<std::string>>> entries_;
};

SweepGrid builtin_grid(const std::string& model_name, const std::string& benchmark);

// A view of a model with an ablation threaded through every call. The model
// itself is never modified; the handle shares ownership of it.
class InterventionHandle {
 public:
  InterventionHandle(std::shared_ptr<const Model> model, AblationSpec spec);

  const AblationSpec& spec() const noexcept { return spec_; }
  const Model& model() const noexcept { return *model_; }

  ForwardResult forward(const TokenSeq& tokens, bool with_trace = false) const;
  TokenSeq decode(const TokenSeq& prompt, std::size_t max_new_tokens,
                  TokenId stop_token = bytes_tok::kEos) const;

 private:
  std::shared_ptr<const Model> model_;
  AblationSpec spec_;
};

// Throws InputError("unknown layer ...") if the spec is deeper than the model.
InterventionHandle apply(const AblationSpec& spec, std::shared_ptr<const Model> model);

}  // namespace attnablate
