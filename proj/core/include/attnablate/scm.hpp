#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace attnablate::scm {

// Directed acyclic graph over named variables. Vertex order is declaration
// order and fixes the parent order used by mechanism tables.
class CausalGraph {
 public:
  CausalGraph() = default;
  CausalGraph(std::vector<std::string> vertices,
              const std::vector<std::pair<std::string, std::string>>& edges);

  std::size_t add_vertex(const std::string& name);
  // Throws InputError on unknown endpoints, duplicate edges or a cycle.
  void add_edge(const std::string& from, const std::string& to);

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& vertices() const noexcept { return names_; }
  const std::string& name(std::size_t v) const { return names_.at(v); }
  bool contains(std::string_view name) const;
  std::size_t index(std::string_view name) const;  // throws InputError if absent

  bool has_edge(std::size_t from, std::size_t to) const;
  std::vector<std::pair<std::string, std::string>> edges() const;
  const std::vector<std::size_t>& parents(std::size_t v) const { return parents_.at(v); }
  const std::vector<std::size_t>& children(std::size_t v) const { return children_.at(v); }

  std::vector<std::size_t> topological_order() const;
  std::set<std::size_t> descendants(std::size_t v) const;  // includes v

 private:
  bool reaches(std::size_t from, std::size_t to) const;

  std::vector<std::string> names_;
  std::vector<std::vector<std::size_t>> parents_;   // sorted by vertex index
  std::vector<std::vector<std::size_t>> children_;  // sorted by vertex index
};

// Discrete structural causal model X_i := f_i(pa_i, eps_i) with mutually
// independent noises.
//
// mechanisms[v] is a dense table of size prod(card(pa_v)) * noise[v].size():
// parents in vertex order form a mixed-radix index (first parent most
// significant), the noise value is the least significant digit.
struct Scm {
  CausalGraph graph;
  std::vector<std::size_t> cardinalities;
  std::vector<std::vector<std::size_t>> mechanisms;
  std::vector<std::vector<double>> noise;

  // Totality and range of tables, noise sums to 1 within 1e-9.
  void validate() const;

  std::size_t parent_configs(std::size_t v) const;
  std::size_t mechanism_value(std::size_t v, std::size_t parent_index, std::size_t noise_value) const;
  // Mixed-radix index of v's parents within a full assignment.
  std::size_t parent_index(std::size_t v, const std::vector<std::size_t>& assignment) const;
  // Pushes one noise assignment through the mechanisms in topological order.
  std::vector<std::size_t> evaluate(const std::vector<std::size_t>& noise_values) const;
};

// Probability table over an ordered list of variables (row-major, first
// variable most significant).
class Dist {
 public:
  Dist() = default;
  Dist(std::vector<std::string> names, std::vector<std::size_t> cards, std::vector<double> probs);

  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<std::size_t>& cards() const noexcept { return cards_; }
  const std::vector<double>& probs() const noexcept { return probs_; }

  std::size_t position(std::string_view name) const;  // throws InputError if absent
  std::size_t cardinality(std::string_view name) const { return cards_[position(name)]; }
  double total() const;

  double at(const std::vector<std::size_t>& assignment) const;
  double prob(const std::map<std::string, std::size_t>& partial) const;
  // Marginal over `names`, in the given order.
  Dist marginal(const std::vector<std::string>& names) const;

 private:
  std::vector<std::string> names_;
  std::vector<std::size_t> cards_;
  std::vector<double> probs_;
};

inline constexpr std::size_t kDefaultMaxAssignments = 1'000'000;

// Exact joint over all variables, in graph vertex order.
Dist joint_distribution(const Scm& scm, std::size_t max_assignments = kDefaultMaxAssignments);

// Graph mutilation: var's mechanism becomes the constant `value` and its
// incoming edges are removed.
Scm intervene(const Scm& scm, const std::string& var, std::size_t value);

// Exact P(target | do(var = value)).
Dist do_oracle(const Scm& scm, const std::string& var, std::size_t value, const std::string& target);

struct FrontDoorVerdict {
  bool holds = false;
  std::string violation;  // empty when holds
  std::vector<std::string> path;

  explicit operator bool() const noexcept { return holds; }
};

// Graphical front-door criterion for (x, m, y) using d-separation by path
// enumeration: (i) m intercepts every directed path x -> y, (ii) no unblocked
// back-door path from x to m, (iii) x blocks every back-door path from m to y.
FrontDoorVerdict check_front_door(const CausalGraph& graph, const std::string& x,
                                  const std::set<std::string>& m, const std::string& y);
// Same criterion with a treatment block (every member is a treatment).
FrontDoorVerdict check_front_door(const CausalGraph& graph, const std::set<std::string>& x,
                                  const std::set<std::string>& m, const std::string& y);

// Whether `path` (consecutive vertices, any edge orientation) is blocked by `given`.
bool path_blocked(const CausalGraph& graph, const std::vector<std::size_t>& path,
                  const std::set<std::size_t>& given);
std::string format_path(const CausalGraph& graph, const std::vector<std::size_t>& path);

// P(y | do(x = x_value)) = sum_m P(m|x) sum_x' P(y|m,x') P(x'), computed from
// an observational table. Throws InputError("positivity violation ...") when
// a conditional with nonzero weight is undefined.
Dist front_door_adjust(const Dist& obs, const std::string& x, const std::set<std::string>& m,
                       const std::string& y, std::size_t x_value);

// Random mechanisms and positive noise for a fixed graph; every variable has
// `cardinality` values and every conditional P(v | pa) is strictly inside (0, 1).
Scm random_scm(const CausalGraph& graph, std::uint64_t seed, std::size_t cardinality = 2,
               std::size_t noise_cardinality = 4);

// Generation-with-hallucination template: X -> Z_1..Z_n -> {T, H} -> Y with a
// biased-training confounder U -> {Z_i, H}. All variables are binary;
// H = 1 / Y = 1 mean hallucinated content. Y's mechanism is monotone in H
// with a strictly positive effect for every T.
inline constexpr std::size_t kBenign = 0;
inline constexpr std::size_t kHallucinated = 1;
Scm hallucination_scm_template(std::size_t n_latents, std::uint64_t seed);
std::set<std::string> latent_block(std::size_t n_latents);

// JSON interchange: {variables: [{name, cardinality}], edges: [[from, to]],
// mechanisms: {name: [...]}, noise: {name: [...]}}.
std::string to_json(const Scm& scm);
Scm scm_from_json(std::string_view text);
Scm load_scm(const std::filesystem::path& path);

}  // namespace attnablate::scm
