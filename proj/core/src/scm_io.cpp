#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "attnablate/error.hpp"
#include "attnablate/scm.hpp"

namespace attnablate::scm {

using json = nlohmann::json;

std::string to_json(const Scm& scm) {
  json doc;
  doc["variables"] = json::array();
  for (std::size_t v = 0; v < scm.graph.size(); ++v)
    doc["variables"].push_back({{"name", scm.graph.name(v)}, {"cardinality", scm.cardinalities[v]}});
  doc["edges"] = json::array();
  for (const auto& [from, to] : scm.graph.edges()) doc["edges"].push_back({from, to});
  doc["mechanisms"] = json::object();
  doc["noise"] = json::object();
  for (std::size_t v = 0; v < scm.graph.size(); ++v) {
    doc["mechanisms"][scm.graph.name(v)] = scm.mechanisms[v];
    doc["noise"][scm.graph.name(v)] = scm.noise[v];
  }
  return doc.dump(2);
}

Scm scm_from_json(std::string_view text) {
  Scm s;
  try {
    const json doc = json::parse(text);
    for (const auto& var : doc.at("variables")) {
      s.graph.add_vertex(var.at("name").get<std::string>());
      s.cardinalities.push_back(var.at("cardinality").get<std::size_t>());
    }
    for (const auto& e : doc.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw InputError("scm: edges must be [from, to] pairs");
      s.graph.add_edge(e[0].get<std::string>(), e[1].get<std::string>());
    }
    for (const auto& name : s.graph.vertices()) {
      s.mechanisms.push_back(doc.at("mechanisms").at(name).get<std::vector<std::size_t>>());
      s.noise.push_back(doc.at("noise").at(name).get<std::vector<double>>());
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("scm file: ") + e.what());
  }
  s.validate();
  return s;
}

Scm load_scm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("scm file not found: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return scm_from_json(text);
}

}  // namespace attnablate::scm
