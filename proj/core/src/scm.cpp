#include "attnablate/scm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "attnablate/error.hpp"

namespace attnablate::scm {

// ---- CausalGraph ----

CausalGraph::CausalGraph(std::vector<std::string> vertices,
                         const std::vector<std::pair<std::string, std::string>>& edges) {
  for (auto& v : vertices) add_vertex(v);
  for (const auto& [from, to] : edges) add_edge(from, to);
}

std::size_t CausalGraph::add_vertex(const std::string& name) {
  if (name.empty()) throw InputError("variable names must be non-empty");
  if (contains(name)) throw InputError("duplicate variable '" + name + "'");
  names_.push_back(name);
  parents_.emplace_back();
  children_.emplace_back();
  return names_.size() - 1;
}

bool CausalGraph::contains(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t CausalGraph::index(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw InputError("unknown variable '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

bool CausalGraph::has_edge(std::size_t from, std::size_t to) const {
  const auto& c = children_.at(from);
  return std::binary_search(c.begin(), c.end(), to);
}

bool CausalGraph::reaches(std::size_t from, std::size_t to) const {
  std::vector<bool> seen(size(), false);
  std::vector<std::size_t> stack{from};
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    if (v == to) return true;
    if (seen[v]) continue;
    seen[v] = true;
    for (auto c : children_[v]) stack.push_back(c);
  }
  return false;
}

void CausalGraph::add_edge(const std::string& from, const std::string& to) {
  const auto f = index(from);
  const auto t = index(to);
  if (f == t) throw InputError("self-loop on '" + from + "'");
  if (has_edge(f, t)) throw InputError("duplicate edge " + from + "->" + to);
  if (reaches(t, f)) throw InputError("edge " + from + "->" + to + " would create a cycle");
  auto insert_sorted = [](std::vector<std::size_t>& v, std::size_t x) {
    v.insert(std::upper_bound(v.begin(), v.end(), x), x);
  };
  insert_sorted(children_[f], t);
  insert_sorted(parents_[t], f);
}

std::vector<std::pair<std::string, std::string>> CausalGraph::edges() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t v = 0; v < size(); ++v)
    for (auto c : children_[v]) out.emplace_back(names_[v], names_[c]);
  return out;
}

std::vector<std::size_t> CausalGraph::topological_order() const {
  std::vector<std::size_t> indegree(size());
  for (std::size_t v = 0; v < size(); ++v) indegree[v] = parents_[v].size();
  std::vector<std::size_t> order;
  // Kahn's algorithm, lowest index first for a stable order.
  std::set<std::size_t> ready;
  for (std::size_t v = 0; v < size(); ++v)
    if (indegree[v] == 0) ready.insert(v);
  while (!ready.empty()) {
    const auto v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(v);
    for (auto c : children_[v])
      if (--indegree[c] == 0) ready.insert(c);
  }
  return order;
}

std::set<std::size_t> CausalGraph::descendants(std::size_t v) const {
  std::set<std::size_t> out;
  std::vector<std::size_t> stack{v};
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    if (!out.insert(u).second) continue;
    for (auto c : children_[u]) stack.push_back(c);
  }
  return out;
}

// ---- Scm ----

std::size_t Scm::parent_configs(std::size_t v) const {
  std::size_t n = 1;
  for (auto p : graph.parents(v)) n *= cardinalities.at(p);
  return n;
}

std::size_t Scm::parent_index(std::size_t v, const std::vector<std::size_t>& assignment) const {
  std::size_t idx = 0;
  for (auto p : graph.parents(v)) idx = idx * cardinalities[p] + assignment[p];
  return idx;
}

std::size_t Scm::mechanism_value(std::size_t v, std::size_t parent_idx, std::size_t noise_value) const {
  return mechanisms[v][parent_idx * noise[v].size() + noise_value];
}

void Scm::validate() const {
  const auto n = graph.size();
  if (cardinalities.size() != n || mechanisms.size() != n || noise.size() != n)
    throw InputError("scm: per-variable tables do not match the variable count");
  for (std::size_t v = 0; v < n; ++v) {
    const auto& name = graph.name(v);
    if (cardinalities[v] < 1) throw InputError("scm: cardinality of '" + name + "' must be >= 1");
    if (noise[v].empty()) throw InputError("scm: empty noise table for '" + name + "'");
    double sum = 0.0;
    for (double p : noise[v]) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw InputError("scm: invalid noise probability for '" + name + "'");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InputError("scm: noise of '" + name + "' does not sum to 1");
    if (mechanisms[v].size() != parent_configs(v) * noise[v].size())
      throw InputError("scm: mechanism table of '" + name + "' is not total over parents x noise");
    for (auto value : mechanisms[v])
      if (value >= cardinalities[v]) throw InputError("scm: mechanism of '" + name + "' leaves its domain");
  }
}

std::vector<std::size_t> Scm::evaluate(const std::vector<std::size_t>& noise_values) const {
  std::vector<std::size_t> values(graph.size(), 0);
  for (auto v : graph.topological_order())
    values[v] = mechanism_value(v, parent_index(v, values), noise_values.at(v));
  return values;
}

// ---- Dist ----

Dist::Dist(std::vector<std::string> names, std::vector<std::size_t> cards, std::vector<double> probs)
    : names_(std::move(names)), cards_(std::move(cards)), probs_(std::move(probs)) {
  if (names_.size() != cards_.size()) throw InputError("dist: names/cardinalities length mismatch");
  std::size_t n = 1;
  for (auto c : cards_) n *= c;
  if (probs_.size() != n) throw InputError("dist: table size does not match cardinalities");
}

std::size_t Dist::position(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw InputError("dist has no variable '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

double Dist::total() const { return std::accumulate(probs_.begin(), probs_.end(), 0.0); }

double Dist::at(const std::vector<std::size_t>& assignment) const {
  if (assignment.size() != cards_.size()) throw InputError("dist: assignment arity mismatch");
  std::size_t idx = 0;
  for (std::size_t i = 0; i < cards_.size(); ++i) {
    if (assignment[i] >= cards_[i]) throw InputError("dist: value out of domain for '" + names_[i] + "'");
    idx = idx * cards_[i] + assignment[i];
  }
  return probs_[idx];
}

double Dist::prob(const std::map<std::string, std::size_t>& partial) const {
  std::vector<std::string> names;
  std::vector<std::size_t> values;
  for (const auto& [n, v] : partial) {
    names.push_back(n);
    values.push_back(v);
  }
  return marginal(names).at(values);
}

Dist Dist::marginal(const std::vector<std::string>& names) const {
  std::vector<std::size_t> pos;
  std::vector<std::size_t> cards;
  for (const auto& n : names) {
    pos.push_back(position(n));
    cards.push_back(cards_[pos.back()]);
  }
  std::size_t out_size = 1;
  for (auto c : cards) out_size *= c;
  std::vector<double> out(out_size, 0.0);
  std::vector<std::size_t> digits(cards_.size(), 0);
  for (std::size_t idx = 0; idx < probs_.size(); ++idx) {
    std::size_t rem = idx;
    for (std::size_t i = cards_.size(); i-- > 0;) {
      digits[i] = rem % cards_[i];
      rem /= cards_[i];
    }
    std::size_t o = 0;
    for (std::size_t k = 0; k < pos.size(); ++k) o = o * cards[k] + digits[pos[k]];
    out[o] += probs_[idx];
  }
  return Dist(names, std::move(cards), std::move(out));
}

// ---- exact inference ----

Dist joint_distribution(const Scm& scm, std::size_t max_assignments) {
  scm.validate();
  const auto n = scm.graph.size();
  std::size_t total = 1;
  for (auto c : scm.cardinalities) {
    if (total > max_assignments / c) throw InputError("joint distribution exceeds the domain bound");
    total *= c;
  }
  if (total > max_assignments) throw InputError("joint distribution exceeds the domain bound");

  // P(v | pa) from each variable's own noise; noises are independent, so the
  // joint factorizes over these conditionals.
  std::vector<std::vector<double>> cpt(n);
  for (std::size_t v = 0; v < n; ++v) {
    const auto configs = scm.parent_configs(v);
    cpt[v].assign(configs * scm.cardinalities[v], 0.0);
    for (std::size_t pa = 0; pa < configs; ++pa)
      for (std::size_t e = 0; e < scm.noise[v].size(); ++e)
        cpt[v][pa * scm.cardinalities[v] + scm.mechanism_value(v, pa, e)] += scm.noise[v][e];
  }

  std::vector<double> probs(total, 0.0);
  std::vector<std::size_t> a(n, 0);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    for (std::size_t i = n; i-- > 0;) {
      a[i] = rem % scm.cardinalities[i];
      rem /= scm.cardinalities[i];
    }
    double p = 1.0;
    for (std::size_t v = 0; v < n && p != 0.0; ++v)
      p *= cpt[v][scm.parent_index(v, a) * scm.cardinalities[v] + a[v]];
    probs[idx] = p;
  }
  return Dist(scm.graph.vertices(), scm.cardinalities, std::move(probs));
}

Scm intervene(const Scm& scm, const std::string& var, std::size_t value) {
  const auto target = scm.graph.index(var);
  if (value >= scm.cardinalities[target])
    throw InputError("value " + std::to_string(value) + " outside the domain of '" + var + "'");

  Scm out;
  for (const auto& name : scm.graph.vertices()) out.graph.add_vertex(name);
  for (const auto& [from, to] : scm.graph.edges())
    if (to != var) out.graph.add_edge(from, to);
  out.cardinalities = scm.cardinalities;
  out.mechanisms = scm.mechanisms;
  out.noise = scm.noise;
  out.mechanisms[target] = {value};
  out.noise[target] = {1.0};
  return out;
}

Dist do_oracle(const Scm& scm, const std::string& var, std::size_t value, const std::string& target) {
  scm.graph.index(target);
  return joint_distribution(intervene(scm, var, value)).marginal({target});
}

// ---- random instances ----

namespace {

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t k) {
  std::vector<double> p(k);
  double sum = 0.0;
  for (auto& x : p) {
    x = 0.05 + unit(rng);
    sum += x;
  }
  for (auto& x : p) x /= sum;
  return p;
}

// Random table over parents x noise where every value of the variable
// appears for every parent configuration.
std::vector<std::size_t> random_mechanism(std::mt19937_64& rng, std::size_t configs,
                                          std::size_t card, std::size_t noise_card) {
  std::vector<std::size_t> table(configs * noise_card);
  for (std::size_t pa = 0; pa < configs; ++pa) {
    std::vector<std::size_t> row(noise_card);
    for (std::size_t e = 0; e < noise_card; ++e) row[e] = e < card ? e : rng() % card;
    for (std::size_t e = noise_card; e-- > 1;) std::swap(row[e], row[rng() % (e + 1)]);
    std::copy(row.begin(), row.end(), table.begin() + static_cast<std::ptrdiff_t>(pa * noise_card));
  }
  return table;
}

}  // namespace

Scm random_scm(const CausalGraph& graph, std::uint64_t seed, std::size_t cardinality,
               std::size_t noise_cardinality) {
  if (cardinality < 1 || noise_cardinality < cardinality)
    throw InputError("random_scm: noise cardinality must cover the variable domain");
  std::mt19937_64 rng(seed);
  Scm s;
  s.graph = graph;
  s.cardinalities.assign(graph.size(), cardinality);
  for (std::size_t v = 0; v < graph.size(); ++v) {
    s.noise.push_back(random_simplex(rng, noise_cardinality));
    s.mechanisms.push_back(random_mechanism(rng, s.parent_configs(v), cardinality, noise_cardinality));
  }
  return s;
}

std::set<std::string> latent_block(std::size_t n_latents) {
  std::set<std::string> out;
  for (std::size_t i = 1; i <= n_latents; ++i) out.insert("Z_" + std::to_string(i));
  return out;
}

Scm hallucination_scm_template(std::size_t n_latents, std::uint64_t seed) {
  if (n_latents < 1) throw InputError("hallucination template needs at least one latent factor");
  CausalGraph g;
  g.add_vertex("X");
  g.add_vertex("U");
  for (std::size_t i = 1; i <= n_latents; ++i) g.add_vertex("Z_" + std::to_string(i));
  g.add_vertex("T");
  g.add_vertex("H");
  g.add_vertex("Y");
  for (std::size_t i = 1; i <= n_latents; ++i) {
    const std::string z = "Z_" + std::to_string(i);
    g.add_edge("X", z);
    g.add_edge("U", z);
    g.add_edge(z, "T");
    g.add_edge(z, "H");
  }
  g.add_edge("U", "H");
  g.add_edge("T", "Y");
  g.add_edge("H", "Y");

  Scm s = random_scm(g, seed, 2, 4);

  // Y = 1 iff eps_Y < threshold(T, H), thresholds strictly increasing in H.
  constexpr std::size_t kLevels = 8;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const auto y = g.index("Y");
  s.noise[y] = random_simplex(rng, kLevels);
  // Parents of Y in vertex order are (T, H).
  s.mechanisms[y].assign(4 * kLevels, 0);
  for (std::size_t t = 0; t < 2; ++t) {
    const std::size_t lo = rng() % kLevels;                       // in [0, 7]
    const std::size_t hi = lo + 1 + rng() % (kLevels - lo);       // in [lo + 1, 8]
    for (std::size_t h = 0; h < 2; ++h) {
      const std::size_t thr = h == kHallucinated ? hi : lo;
      for (std::size_t e = 0; e < kLevels; ++e) s.mechanisms[y][(t * 2 + h) * kLevels + e] = e < thr ? 1 : 0;
    }
  }
  s.validate();
  return s;
}

}  // namespace attnablate::scm
