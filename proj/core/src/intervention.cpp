#include "attnablate/intervention.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "attnablate/error.hpp"

namespace attnablate {

namespace embedded {
extern const std::string_view grids_json;
}

AblationSpec::AblationSpec(std::initializer_list<std::size_t> layers) {
  for (auto l : layers) add(l);
}

AblationSpec& AblationSpec::add(std::size_t layer) {
  if (layer == 0) throw InputError("layer indices are 1-based; got 0");
  layers_.insert(layer);
  return *this;
}

AblationSpec AblationSpec::united(const AblationSpec& other) const {
  AblationSpec out = *this;
  out.layers_.insert(other.layers_.begin(), other.layers_.end());
  return out;
}

void AblationSpec::check_depth(std::size_t num_layers) const {
  if (max_layer() > num_layers) {
    throw InputError("unknown layer " + std::to_string(max_layer()) + " (model has " +
                     std::to_string(num_layers) + " layers)");
  }
}

std::string AblationSpec::label() const {
  if (layers_.empty()) return "z_o";
  if (layers_.size() == 1) return "z_" + std::to_string(*layers_.begin());
  std::string s = "z_{";
  bool first = true;
  for (auto l : layers_) {
    if (!first) s += ",";
    s += std::to_string(l);
    first = false;
  }
  return s + "}";
}

AblationSpec parse_point(std::string_view label) {
  if (label == "z_o") return AblationSpec::none();
  if (label.size() < 3 || label.substr(0, 2) != "z_")
    throw InputError("malformed sweep point '" + std::string(label) + "' (expected z_o or z_<i>)");
  const std::string_view digits = label.substr(2);
  std::size_t layer = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), layer);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || layer == 0 || digits[0] == '0')
    throw InputError("malformed sweep point '" + std::string(label) + "' (expected z_o or z_<i>)");
  return AblationSpec::single(layer);
}

AblationSpec parse_point(std::string_view label, std::size_t num_layers) {
  AblationSpec spec = parse_point(label);
  if (spec.max_layer() > num_layers) {
    throw InputError("layer out of range: " + std::string(label) + " on a model with " +
                     std::to_string(num_layers) + " layers");
  }
  return spec;
}

std::vector<std::string> SweepGrid::labels() const {
  std::vector<std::string> out;
  for (const auto& p : points) out.push_back(p.label());
  return out;
}

void SweepGrid::validate() const {
  if (points.empty() || !points.front().empty())
    throw ProtocolError("sweep grid must start with z_o");
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j)
      if (points[i] == points[j]) throw ProtocolError("sweep grid repeats " + points[i].label());
}

GridRegistry GridRegistry::from_json(std::string_view text) {
  GridRegistry reg;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
    reg.entries_ = doc.get<decltype(reg.entries_)>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("grid registry: ") + e.what());
  }
  for (const auto& [model, benches] : reg.entries_)
    for (const auto& [bench, labels] : benches)
      for (const auto& l : labels) parse_point(l);
  return reg;
}

GridRegistry GridRegistry::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("grid registry not found: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

GridRegistry GridRegistry::builtin() {
  static const GridRegistry reg = from_json(embedded::grids_json);
  return reg;
}

std::vector<std::pair<std::string, std::string>> GridRegistry::known_pairs() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [model, benches] : entries_)
    for (const auto& [bench, labels] : benches) out.emplace_back(model, bench);
  return out;
}

SweepGrid GridRegistry::grid(const std::string& model_name, const std::string& benchmark) const {
  const auto m = entries_.find(model_name);
  if (m == entries_.end() || m->second.find(benchmark) == m->second.end()) {
    std::string msg = "no grid for (" + model_name + ", " + benchmark + "); known pairs:";
    for (const auto& [model, bench] : known_pairs()) msg += " (" + model + ", " + bench + ")";
    throw InputError(msg);
  }
  SweepGrid g;
  g.model_name = model_name;
  for (const auto& l : m->second.at(benchmark)) g.points.push_back(parse_point(l));
  return g;
}

SweepGrid builtin_grid(const std::string& model_name, const std::string& benchmark) {
  return GridRegistry::builtin().grid(model_name, benchmark);
}

InterventionHandle::InterventionHandle(std::shared_ptr<const Model> model, AblationSpec spec)
    : model_(std::move(model)), spec_(std::move(spec)) {
  if (!model_) throw InputError("intervention handle needs a model");
  spec_.check_depth(model_->config().num_layers);
}

ForwardResult InterventionHandle::forward(const TokenSeq& tokens, bool with_trace) const {
  return attnablate::forward(*model_, tokens, spec_, with_trace);
}

TokenSeq InterventionHandle::decode(const TokenSeq& prompt, std::size_t max_new_tokens,
                                    TokenId stop_token) const {
  return greedy_decode(*model_, prompt, max_new_tokens, spec_, stop_token);
}

InterventionHandle apply(const AblationSpec& spec, std::shared_ptr<const Model> model) {
  return InterventionHandle(std::move(model), spec);
}

}  // namespace attnablate
