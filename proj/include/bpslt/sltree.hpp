#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "bpslt/error.hpp"
#include "bpslt/geometry.hpp"
#include "bpslt/regiongraph.hpp"

namespace bpslt {

inline constexpr std::size_t kNoNode = static_cast<std::size_t>(-1);

/// Total mass over total volume, sum |r| d(r) / sum |r|.
inline double average_density(std::span<const Region> regions) {
  if (regions.empty()) throw std::invalid_argument("average density of an empty set");
  double mass = 0.0, volume = 0.0;
  for (const auto& r : regions) {
    const double v = r.volume();
    mass += v * r.density;
    volume += v;
  }
  return mass / volume;
}

struct MergeEvent {
  std::size_t step = 0;  // 1-based insertion step
  RegionId region = 0;
  std::vector<RegionId> absorbed;  // last-added region of each merged component
};

/// Sub-level tree over the nodes of a RegionGraph. Vectors are indexed like
/// the graph; `parent[i]` is kNoNode for roots.
struct SubLevelTree {
  std::vector<RegionId> ids;
  std::vector<double> densities;
  std::vector<std::size_t> parent;
  std::vector<double> color;
  std::vector<std::size_t> insertion_order;  // node indices, descending density
  std::vector<MergeEvent> merge_events;

  std::size_t size() const noexcept { return ids.size(); }

  std::size_t index_of(RegionId id) const {
    auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) throw std::out_of_range("region id not in tree");
    return static_cast<std::size_t>(it - ids.begin());
  }

  std::optional<RegionId> parent_of(RegionId id) const {
    const auto p = parent[index_of(id)];
    if (p == kNoNode) return std::nullopt;
    return ids[p];
  }

  double color_of(RegionId id) const { return color[index_of(id)]; }

  std::vector<std::vector<std::size_t>> children() const {
    std::vector<std::vector<std::size_t>> out(size());
    for (std::size_t i = 0; i < size(); ++i)
      if (parent[i] != kNoNode) out[parent[i]].push_back(i);
    return out;
  }

  // Nodes without children (local density modes).
  std::vector<std::size_t> leaves() const {
    std::vector<bool> has_child(size(), false);
    for (auto p : parent)
      if (p != kNoNode) has_child[p] = true;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i)
      if (!has_child[i]) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> roots() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i)
      if (parent[i] == kNoNode) out.push_back(i);
    return out;
  }

  // Ancestors of node i, starting with i itself.
  std::vector<std::size_t> path_to_root(std::size_t i) const {
    std::vector<std::size_t> out;
    for (; i != kNoNode; i = parent[i]) out.push_back(i);
    return out;
  }
};

namespace detail {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  // Returns the surviving root.
  std::size_t unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return a;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return a;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

inline std::vector<std::size_t> descending_density_order(const RegionGraph& g) {
  std::vector<std::size_t> order(g.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (g.densities[a] != g.densities[b]) return g.densities[a] > g.densities[b];
    return g.ids[a] < g.ids[b];
  });
  return order;
}

/// Incremental replay of the descending-density insertion: components of the
/// induced subgraph on the inserted nodes, with explicit member lists.
class InsertionReplay {
 public:
  InsertionReplay(const RegionGraph& g, std::vector<std::size_t> order)
      : g_(g), order_(std::move(order)), sets_(g.size()), inserted_(g.size(), false),
        members_(g.size()), mode_(g.size(), kNoNode), rank_(g.size(), 0) {
    for (std::size_t s = 0; s < order_.size(); ++s) rank_[order_[s]] = s;
  }

  bool done() const noexcept { return step_ == order_.size(); }
  std::size_t step() const noexcept { return step_; }
  std::size_t component_count() const noexcept { return components_; }
  std::size_t rank(std::size_t node) const { return rank_[node]; }
  bool inserted(std::size_t node) const { return inserted_[node]; }

  // Distinct components adjacent to `node`, ordered by their mode's rank.
  std::vector<std::size_t> adjacent_roots(std::size_t node) {
    std::vector<std::size_t> roots;
    for (auto w : g_.adjacency[node]) {
      if (!inserted_[w]) continue;
      const auto r = sets_.find(w);
      if (std::find(roots.begin(), roots.end(), r) == roots.end()) roots.push_back(r);
    }
    std::sort(roots.begin(), roots.end(),
              [&](std::size_t a, std::size_t b) { return rank_[mode_[a]] < rank_[mode_[b]]; });
    return roots;
  }

  std::size_t peek() const { return order_[step_]; }

  // Inserts the next node; returns the roots it joined (before the union).
  std::vector<std::size_t> advance() {
    const std::size_t node = order_[step_++];
    auto roots = adjacent_roots(node);
    inserted_[node] = true;
    std::size_t root = node;
    members_[node] = {node};
    mode_[node] = node;
    std::size_t eldest = node;
    for (auto r : roots)
      if (rank_[mode_[r]] < rank_[eldest]) eldest = mode_[r];
    for (auto r : roots) {
      auto a = sets_.find(root);
      auto merged = sets_.unite(a, r);
      auto other = merged == a ? r : a;
      auto& dst = members_[merged];
      auto& src = members_[other];
      dst.insert(dst.end(), src.begin(), src.end());
      src.clear();
      src.shrink_to_fit();
      root = merged;
    }
    mode_[root] = eldest;
    components_ = components_ + 1 - roots.size();
    return roots;
  }

  std::size_t find(std::size_t node) { return sets_.find(node); }
  const std::vector<std::size_t>& members(std::size_t root) const { return members_[root]; }
  std::size_t mode(std::size_t root) const { return mode_[root]; }

  std::vector<std::size_t> current_roots() {
    std::vector<std::size_t> out;
    for (std::size_t s = 0; s < step_; ++s) {
      const auto r = sets_.find(order_[s]);
      if (std::find(out.begin(), out.end(), r) == out.end()) out.push_back(r);
    }
    return out;
  }

 private:
  const RegionGraph& g_;
  std::vector<std::size_t> order_;
  DisjointSets sets_;
  std::vector<bool> inserted_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<std::size_t> mode_;  // per root: earliest inserted member
  std::vector<std::size_t> rank_;
  std::size_t step_ = 0;
  std::size_t components_ = 0;
};

}  // namespace detail

/// Inserts regions in decreasing density (ties: smaller id first). A region
/// touching existing components becomes the parent of each component's most
/// recently added region and is coloured with the union's average density;
/// otherwise it starts a new leaf coloured with its own density.
inline SubLevelTree build_sublevel_tree(const RegionGraph& g) {
  if (g.size() == 0) throw std::invalid_argument("empty region graph");
  std::size_t count = 0;
  connected_components(g.adjacency, &count);
  if (count != 1) throw DataError("sub-level tree requires a connected region graph");

  SubLevelTree t;
  t.ids = g.ids;
  t.densities = g.densities;
  t.parent.assign(g.size(), kNoNode);
  t.color.assign(g.size(), 0.0);
  t.insertion_order = detail::descending_density_order(g);

  std::vector<std::size_t> last(g.size(), kNoNode);
  std::vector<double> mass(g.size(), 0.0), volume(g.size(), 0.0);
  detail::InsertionReplay replay(g, t.insertion_order);
  while (!replay.done()) {
    const std::size_t r = replay.peek();
    const std::size_t step = replay.step() + 1;
    const auto roots = replay.advance();

    double m = g.volumes[r] * g.densities[r];
    double v = g.volumes[r];
    MergeEvent ev{step, g.ids[r], {}};
    for (auto root : roots) {
      t.parent[last[root]] = r;
      ev.absorbed.push_back(g.ids[last[root]]);
      m += mass[root];
      v += volume[root];
    }
    const auto root = replay.find(r);
    last[root] = r;
    mass[root] = m;
    volume[root] = v;
    t.color[r] = v > 0.0 ? m / v : g.densities[r];
    if (roots.size() >= 2) t.merge_events.push_back(std::move(ev));
  }
  return t;
}

struct Branch {
  RegionId leaf = 0;  // mode of the branch (its highest-density region)
  std::vector<RegionId> members;
  double birth_density = 0.0;
  double merge_density = 0.0;
  double persistence() const { return birth_density - merge_density; }
};

struct BranchDecomposition {
  std::vector<Branch> branches;
  std::vector<RegionId> unassigned;
  std::optional<std::size_t> requested;  // nullopt: selected by persistence
};

// Five percent of the largest region density.
inline double default_min_persistence(const RegionGraph& g) {
  double m = 0.0;
  for (auto d : g.densities) m = std::max(m, d);
  return 0.05 * m;
}

namespace detail {

inline BranchDecomposition finish_branches(const RegionGraph& g, std::vector<Branch> branches,
                                           std::optional<std::size_t> requested) {
  std::vector<bool> assigned(g.size(), false);
  for (auto& b : branches) {
    std::sort(b.members.begin(), b.members.end());
    for (auto id : b.members) assigned[g.index_of(id)] = true;
  }
  BranchDecomposition out;
  out.requested = requested;
  out.branches = std::move(branches);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!assigned[i]) out.unassigned.push_back(g.ids[i]);
  std::sort(out.unassigned.begin(), out.unassigned.end());
  return out;
}

inline std::vector<RegionId> member_ids(const RegionGraph& g, const std::vector<std::size_t>& m) {
  std::vector<RegionId> out;
  out.reserve(m.size());
  for (auto i : m) out.push_back(g.ids[i]);
  return out;
}

inline BranchDecomposition branches_at_count(const SubLevelTree& t, const RegionGraph& g,
                                             std::size_t k) {
  if (k == 0) throw std::invalid_argument("branch count must be positive");
  std::vector<std::size_t> counts;
  {
    InsertionReplay replay(g, t.insertion_order);
    while (!replay.done()) {
      replay.advance();
      counts.push_back(replay.component_count());
    }
  }
  const std::size_t max_count = *std::max_element(counts.begin(), counts.end());
  if (k > max_count)
    throw std::invalid_argument("requested " + std::to_string(k) + " branches but at most " +
                                std::to_string(max_count) + " components ever coexist");
  // Last step with exactly k components; if multi-way merges skip k, the
  // last step with more than k components, keeping its k eldest.
  std::size_t stop = counts.size();
  for (std::size_t s = counts.size(); s-- > 0;) {
    if (counts[s] == k) {
      stop = s + 1;
      break;
    }
  }
  if (stop == counts.size() && counts.back() != k) {
    for (std::size_t s = counts.size(); s-- > 0;) {
      if (counts[s] > k) {
        stop = s + 1;
        break;
      }
    }
  }

  InsertionReplay replay(g, t.insertion_order);
  while (replay.step() < stop) replay.advance();
  auto roots = replay.current_roots();
  std::sort(roots.begin(), roots.end(), [&](std::size_t a, std::size_t b) {
    return replay.rank(replay.mode(a)) < replay.rank(replay.mode(b));
  });
  roots.resize(k);

  std::vector<Branch> branches;
  std::vector<std::size_t> modes;
  for (auto r : roots) {
    Branch b;
    b.leaf = g.ids[replay.mode(r)];
    b.birth_density = g.densities[replay.mode(r)];
    b.members = member_ids(g, replay.members(r));
    b.merge_density = std::numeric_limits<double>::quiet_NaN();
    branches.push_back(std::move(b));
    modes.push_back(replay.mode(r));
  }
  // Continue until each selected component first merges with another one.
  double last_density = g.densities[t.insertion_order.back()];
  while (!replay.done()) {
    const std::size_t node = replay.peek();
    auto joined = replay.adjacent_roots(node);
    if (joined.size() >= 2) {
      for (std::size_t b = 0; b < modes.size(); ++b) {
        if (!std::isnan(branches[b].merge_density)) continue;
        const auto root = replay.find(modes[b]);
        if (std::find(joined.begin(), joined.end(), root) != joined.end())
          branches[b].merge_density = g.densities[node];
      }
    }
    replay.advance();
  }
  for (auto& b : branches)
    if (std::isnan(b.merge_density)) b.merge_density = last_density;
  return finish_branches(g, std::move(branches), k);
}

// Modes in insertion order with their elder-rule death density: at a merge
// the component with the earliest mode survives and the others die.
struct ElderModes {
  std::vector<std::size_t> modes;
  std::vector<double> death;  // indexed by graph node; NaN for non-modes
};

inline ElderModes elder_modes(const SubLevelTree& t, const RegionGraph& g) {
  ElderModes out;
  out.death.assign(g.size(), std::numeric_limits<double>::quiet_NaN());
  InsertionReplay replay(g, t.insertion_order);
  while (!replay.done()) {
    const std::size_t node = replay.peek();
    const auto roots = replay.advance();
    if (roots.empty()) out.modes.push_back(node);
    for (std::size_t i = 1; i < roots.size(); ++i) out.death[replay.mode(roots[i])] = g.densities[node];
  }
  const double last_density = g.densities[t.insertion_order.back()];
  for (auto m : out.modes)
    if (std::isnan(out.death[m])) out.death[m] = last_density;
  return out;
}

// Each selected mode's component just before it first meets the component of
// another selected mode (or the whole graph if it never does).
inline std::vector<Branch> snapshot_branches(const SubLevelTree& t, const RegionGraph& g,
                                             const std::vector<std::size_t>& selected,
                                             const std::vector<double>& death) {
  std::vector<Branch> branches(selected.size());
  std::vector<bool> taken(selected.size(), false);
  std::vector<std::vector<std::size_t>> selected_in(g.size());
  std::vector<std::size_t> slot(g.size(), kNoNode);
  for (std::size_t b = 0; b < selected.size(); ++b) {
    slot[selected[b]] = b;
    branches[b].leaf = g.ids[selected[b]];
    branches[b].birth_density = g.densities[selected[b]];
    branches[b].merge_density = death[selected[b]];
  }
  InsertionReplay replay(g, t.insertion_order);
  while (!replay.done()) {
    const std::size_t node = replay.peek();
    const auto joined = replay.adjacent_roots(node);
    std::vector<std::size_t> with_selected;
    for (auto r : joined)
      if (!selected_in[r].empty()) with_selected.push_back(r);
    if (with_selected.size() >= 2) {
      for (auto r : with_selected) {
        for (auto b : selected_in[r]) {
          if (taken[b]) continue;
          branches[b].members = member_ids(g, replay.members(r));
          taken[b] = true;
        }
      }
    }
    std::vector<std::size_t> carried;
    for (auto r : joined) {
      carried.insert(carried.end(), selected_in[r].begin(), selected_in[r].end());
      selected_in[r].clear();
    }
    if (slot[node] != kNoNode) carried.push_back(slot[node]);
    replay.advance();
    selected_in[replay.find(node)] = std::move(carried);
  }
  for (std::size_t b = 0; b < branches.size(); ++b) {
    if (taken[b]) continue;
    branches[b].members = member_ids(g, replay.members(replay.find(selected[b])));
  }
  return branches;
}

// The k most persistent modes (ties: earlier insertion first). If some
// insertion step has all k modes in separate components, each branch is its
// mode's component at the last such step. Otherwise (two selected modes meet
// before a lower one is born) each branch is snapshotted on its own.
inline BranchDecomposition branches_most_persistent(const SubLevelTree& t, const RegionGraph& g,
                                                    std::size_t k) {
  if (k == 0) throw std::invalid_argument("branch count must be positive");
  const auto elder = elder_modes(t, g);
  if (k > elder.modes.size())
    throw std::invalid_argument("requested " + std::to_string(k) + " branches but the tree has " +
                                std::to_string(elder.modes.size()) + " modes");
  auto ranked = elder.modes;  // already in insertion order
  std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
    return g.densities[a] - elder.death[a] > g.densities[b] - elder.death[b];
  });
  ranked.resize(k);

  std::vector<bool> is_selected(g.size(), false);
  for (auto m : ranked) is_selected[m] = true;
  InsertionReplay replay(g, t.insertion_order);
  while (!replay.done()) {
    const auto joined = replay.adjacent_roots(replay.peek());
    std::size_t holding = 0;
    for (auto r : joined)
      if (is_selected[replay.mode(r)]) ++holding;
    if (holding >= 2) break;
    replay.advance();
  }
  std::sort(ranked.begin(), ranked.end(),
            [&](std::size_t a, std::size_t b) { return replay.rank(a) < replay.rank(b); });
  const bool all_born = std::all_of(ranked.begin(), ranked.end(),
                                    [&](std::size_t m) { return replay.inserted(m); });
  if (!all_born)
    return finish_branches(g, snapshot_branches(t, g, ranked, elder.death), k);

  std::vector<Branch> branches;
  for (auto m : ranked) {
    Branch b;
    b.leaf = g.ids[m];
    b.birth_density = g.densities[m];
    b.merge_density = elder.death[m];
    b.members = member_ids(g, replay.members(replay.find(m)));
    branches.push_back(std::move(b));
  }
  return finish_branches(g, std::move(branches), k);
}

inline BranchDecomposition branches_by_persistence(const SubLevelTree& t, const RegionGraph& g,
                                                   double min_persistence) {
  const auto elder = elder_modes(t, g);
  std::vector<std::size_t> selected;
  for (auto m : elder.modes)
    if (g.densities[m] - elder.death[m] >= min_persistence) selected.push_back(m);
  return finish_branches(g, snapshot_branches(t, g, selected, elder.death), std::nullopt);
}

}  // namespace detail

enum class BranchCountRule {
  most_persistent,  // the k modes with the largest persistence
  last_count,       // the components at the last step with exactly k components
};

/// Branches of the sub-level tree.
///
/// With `k` set, the default rule keeps the k modes of largest elder-rule
/// persistence (birth density minus the density at which an older component
/// absorbs them) and returns their components at the last insertion step
/// where those k modes are still in separate components (when no step has
/// all k apart, each branch is cut just before it meets another). `last_count`
/// instead returns whatever components exist at the last step with exactly k
/// components, which lets short-lived bumps displace a major branch.
///
/// Without `k`, every mode whose persistence reaches `min_persistence` is
/// selected, and each branch holds its component just before it first meets
/// another selected branch. Regions in no branch are reported as unassigned.
inline BranchDecomposition extract_branches(const SubLevelTree& t, const RegionGraph& g,
                                            std::optional<std::size_t> k,
                                            double min_persistence,
                                            BranchCountRule rule = BranchCountRule::most_persistent) {
  if (t.size() != g.size()) throw std::invalid_argument("tree was not built from this graph");
  if (!k) return detail::branches_by_persistence(t, g, min_persistence);
  if (rule == BranchCountRule::last_count) return detail::branches_at_count(t, g, *k);
  return detail::branches_most_persistent(t, g, *k);
}

inline std::size_t lowest_common_ancestor(const SubLevelTree& t, std::size_t a, std::size_t b) {
  const auto pa = t.path_to_root(a);
  for (auto v : t.path_to_root(b))
    if (std::find(pa.begin(), pa.end(), v) != pa.end()) return v;
  return kNoNode;
}

inline bool is_proper_ancestor(const SubLevelTree& t, std::size_t ancestor, std::size_t node) {
  for (auto v = t.parent[node]; v != kNoNode; v = t.parent[v])
    if (v == ancestor) return true;
  return false;
}

/// Graphviz digraph with parent -> child edges. Fill colours interpolate
/// linearly from blue (lowest colour value) to red (highest).
inline std::string export_dot(const SubLevelTree& t,
                              std::optional<RegionId> virtual_id = std::nullopt) {
  std::vector<std::size_t> order(t.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return t.ids[a] < t.ids[b]; });

  double lo = 0.0, hi = 0.0;
  if (!t.color.empty()) {
    lo = *std::min_element(t.color.begin(), t.color.end());
    hi = *std::max_element(t.color.begin(), t.color.end());
  }

  std::ostringstream os;
  os << "digraph sublevel_tree {\n";
  os << "  node [shape=circle, style=filled, fontcolor=white];\n";
  for (auto i : order) {
    const double s = hi > lo ? (t.color[i] - lo) / (hi - lo) : 0.0;
    const int red = static_cast<int>(std::lround(255.0 * s));
    const int blue = 255 - red;
    char fill[8];
    std::snprintf(fill, sizeof fill, "#%02x00%02x", red, blue);
    char value[32];
    std::snprintf(value, sizeof value, "%.6g", t.color[i]);
    os << "  r" << t.ids[i] << " [label=\"" << t.ids[i];
    if (virtual_id && *virtual_id == t.ids[i]) os << " (virtual)";
    os << "\", fillcolor=\"" << fill << "\", tooltip=\"" << value << "\"];\n";
  }
  std::vector<std::pair<RegionId, RegionId>> edges;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t.parent[i] != kNoNode) edges.emplace_back(t.ids[t.parent[i]], t.ids[i]);
  std::sort(edges.begin(), edges.end());
  for (auto [p, c] : edges) os << "  r" << p << " -> r" << c << ";\n";
  os << "}\n";
  return os.str();
}

inline std::size_t max_coexisting_components(const SubLevelTree& t, const RegionGraph& g) {
  detail::InsertionReplay replay(g, t.insertion_order);
  std::size_t best = 0;
  while (!replay.done()) {
    replay.advance();
    best = std::max(best, replay.component_count());
  }
  return best;
}

/// Density estimate together with its region graph and sub-level tree.
struct Hierarchy {
  PiecewiseDensity density;
  RegionGraph graph;
  SubLevelTree tree;
};

inline Hierarchy build_hierarchy(PiecewiseDensity pd) {
  RegionGraph g = build_region_graph(pd);
  SubLevelTree t = build_sublevel_tree(g);
  return {std::move(pd), std::move(g), std::move(t)};
}

}  // namespace bpslt
