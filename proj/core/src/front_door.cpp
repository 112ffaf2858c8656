#include <algorithm>
#include <functional>

#include "attnablate/error.hpp"
#include "attnablate/scm.hpp"

namespace attnablate::scm {
namespace {

using Path = std::vector<std::size_t>;

std::vector<std::size_t> neighbours(const CausalGraph& g, std::size_t v) {
  std::vector<std::size_t> out = g.parents(v);
  out.insert(out.end(), g.children(v).begin(), g.children(v).end());
  std::sort(out.begin(), out.end());
  return out;
}

// All simple paths from `from` to `to` in the skeleton, in a deterministic
// order. `first_step` filters the vertex right after `from`.
std::vector<Path> simple_paths(const CausalGraph& g, std::size_t from, std::size_t to,
                               const std::function<bool(std::size_t)>& first_step,
                               bool directed) {
  std::vector<Path> out;
  Path path{from};
  std::vector<bool> on_path(g.size(), false);
  on_path[from] = true;
  std::function<void(std::size_t)> walk = [&](std::size_t v) {
    if (v == to) {
      out.push_back(path);
      return;
    }
    const auto next = directed ? g.children(v) : neighbours(g, v);
    for (auto n : next) {
      if (on_path[n]) continue;
      if (path.size() == 1 && !first_step(n)) continue;
      on_path[n] = true;
      path.push_back(n);
      walk(n);
      path.pop_back();
      on_path[n] = false;
    }
  };
  walk(from);
  return out;
}

std::string join(const std::set<std::string>& names) {
  if (names.size() == 1) return *names.begin();
  std::string s = "{";
  for (const auto& n : names) s += (s.size() > 1 ? "," : "") + n;
  return s + "}";
}

}  // namespace

bool path_blocked(const CausalGraph& g, const std::vector<std::size_t>& path,
                  const std::set<std::size_t>& given) {
  for (std::size_t i = 1; i + 1 < path.size(); ++i) {
    const auto prev = path[i - 1];
    const auto node = path[i];
    const auto next = path[i + 1];
    const bool collider = g.has_edge(prev, node) && g.has_edge(next, node);
    if (collider) {
      const auto desc = g.descendants(node);
      const bool opened = std::any_of(desc.begin(), desc.end(), [&](auto d) { return given.count(d) != 0; });
      if (!opened) return true;
    } else if (given.count(node) != 0) {
      return true;
    }
  }
  return false;
}

std::string format_path(const CausalGraph& g, const std::vector<std::size_t>& path) {
  std::string s;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i > 0) s += g.has_edge(path[i - 1], path[i]) ? "→" : "←";
    s += g.name(path[i]);
  }
  return s;
}

FrontDoorVerdict check_front_door(const CausalGraph& graph, const std::string& x,
                                  const std::set<std::string>& m, const std::string& y) {
  return check_front_door(graph, std::set<std::string>{x}, m, y);
}

FrontDoorVerdict check_front_door(const CausalGraph& graph, const std::set<std::string>& x,
                                  const std::set<std::string>& m, const std::string& y) {
  FrontDoorVerdict verdict;
  auto fail = [&](std::string why, const Path& p) {
    verdict.holds = false;
    verdict.violation = std::move(why);
    for (auto v : p) verdict.path.push_back(graph.name(v));
    return verdict;
  };

  std::vector<std::string> all(x.begin(), x.end());
  all.insert(all.end(), m.begin(), m.end());
  all.push_back(y);
  for (const auto& n : all)
    if (!graph.contains(n)) return fail("unknown variable '" + n + "'", {});
  if (x.empty() || m.empty()) return fail("treatment and mediator sets must be non-empty", {});

  std::set<std::size_t> xs, ms;
  for (const auto& n : x) xs.insert(graph.index(n));
  for (const auto& n : m) ms.insert(graph.index(n));
  const auto yi = graph.index(y);
  for (auto v : ms)
    if (xs.count(v) || v == yi) return fail("mediator overlaps treatment or outcome", {});
  if (xs.count(yi)) return fail("treatment contains the outcome", {});

  const auto any = [](std::size_t) { return true; };

  // (i) every directed path from x to y passes through m.
  for (auto xv : xs) {
    for (const auto& p : simple_paths(graph, xv, yi, any, /*directed=*/true)) {
      const bool hits = std::any_of(p.begin() + 1, p.end() - 1, [&](auto v) { return ms.count(v) != 0; });
      if (!hits) return fail("path " + format_path(graph, p) + " bypasses " + join(m), p);
    }
  }

  // (ii) no unblocked back-door path from x to m.
  for (auto xv : xs) {
    const auto into_x = [&](std::size_t n) { return graph.has_edge(n, xv); };
    for (auto mv : ms) {
      for (const auto& p : simple_paths(graph, xv, mv, into_x, false)) {
        if (!path_blocked(graph, p, {})) return fail("back-door " + format_path(graph, p), p);
      }
    }
  }

  // (iii) x blocks every back-door path from m to y.
  for (auto mv : ms) {
    const auto into_m = [&](std::size_t n) { return graph.has_edge(n, mv); };
    for (const auto& p : simple_paths(graph, mv, yi, into_m, false)) {
      if (!path_blocked(graph, p, xs)) {
        std::string given;
        for (const auto& n : x) given += (given.empty() ? "" : ",") + n;
        return fail("back-door " + format_path(graph, p) + " not blocked by {" + given + "}", p);
      }
    }
  }

  verdict.holds = true;
  return verdict;
}

Dist front_door_adjust(const Dist& obs, const std::string& x, const std::set<std::string>& m,
                       const std::string& y, std::size_t x_value) {
  std::vector<std::string> order{x};
  order.insert(order.end(), m.begin(), m.end());
  order.push_back(y);
  const Dist t = obs.marginal(order);  // throws for unknown names

  const auto& cards = t.cards();
  const std::size_t cx = cards.front();
  const std::size_t cy = cards.back();
  if (x_value >= cx) throw InputError("x_value outside the domain of '" + x + "'");
  std::size_t cm = 1;
  for (std::size_t i = 1; i + 1 < cards.size(); ++i) cm *= cards[i];

  // Table layout after marginalizing: [x][m][y].
  const auto& p = t.probs();
  auto pxmy = [&](std::size_t xv, std::size_t mv, std::size_t yv) { return p[(xv * cm + mv) * cy + yv]; };
  std::vector<double> px(cx, 0.0);
  std::vector<double> pxm(cx * cm, 0.0);
  for (std::size_t xv = 0; xv < cx; ++xv)
    for (std::size_t mv = 0; mv < cm; ++mv)
      for (std::size_t yv = 0; yv < cy; ++yv) {
        pxm[xv * cm + mv] += pxmy(xv, mv, yv);
        px[xv] += pxmy(xv, mv, yv);
      }

  if (!(px[x_value] > 0.0))
    throw InputError("positivity violation: P(" + x + "=" + std::to_string(x_value) + ") = 0");

  std::vector<double> out(cy, 0.0);
  for (std::size_t mv = 0; mv < cm; ++mv) {
    const double pm_given_x = pxm[x_value * cm + mv] / px[x_value];
    if (pm_given_x == 0.0) continue;
    for (std::size_t xp = 0; xp < cx; ++xp) {
      if (px[xp] == 0.0) continue;
      const double denom = pxm[xp * cm + mv];
      if (!(denom > 0.0)) {
        throw InputError("positivity violation: P(y | m, " + x + "=" + std::to_string(xp) +
                         ") undefined with nonzero weight");
      }
      for (std::size_t yv = 0; yv < cy; ++yv) out[yv] += pm_given_x * (pxmy(xp, mv, yv) / denom) * px[xp];
    }
  }
  return Dist({y}, {cy}, std::move(out));
}

}  // namespace attnablate::scm
