#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "bpslt/error.hpp"
#include "bpslt/estimator.hpp"
#include "bpslt/geometry.hpp"

namespace bpslt {

/// Boxes are adjacent unless some dimension separates them by a gap larger
/// than a small slack. Touching faces, edges and corners count.
///
/// The slack is 1e-9 of the wider box, but never below a few ulps of the
/// coordinates: cuts reached along different split paths may round apart.
inline bool is_adjacent(const Region& a, const Region& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch(a.dim(), b.dim());
  for (std::size_t k = 0; k < a.dim(); ++k) {
    const double scale = std::max({std::abs(a.lower[k]), std::abs(a.upper[k]),
                                   std::abs(b.lower[k]), std::abs(b.upper[k])});
    const double eps = std::max(1e-9 * std::max(a.width(k), b.width(k)),
                                8.0 * std::numeric_limits<double>::epsilon() * scale);
    if (a.lower[k] > b.upper[k] + eps || b.lower[k] > a.upper[k] + eps) return false;
  }
  return true;
}

/// Adjacency graph over leaf regions. Node i corresponds to ids[i]; an
/// optional zero-density virtual node joins the original components.
struct RegionGraph {
  std::vector<RegionId> ids;
  std::vector<double> densities;
  std::vector<double> volumes;
  std::vector<std::vector<std::size_t>> adjacency;  // sorted neighbour indices
  std::optional<std::size_t> virtual_index;

  std::size_t size() const noexcept { return ids.size(); }

  std::size_t edge_count() const {
    std::size_t twice = 0;
    for (const auto& nb : adjacency) twice += nb.size();
    return twice / 2;
  }

  std::optional<RegionId> virtual_id() const {
    if (!virtual_index) return std::nullopt;
    return ids[*virtual_index];
  }

  std::size_t index_of(RegionId id) const {
    auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) throw std::out_of_range("region id not in graph");
    return static_cast<std::size_t>(it - ids.begin());
  }

  bool has_edge(std::size_t i, std::size_t j) const {
    return std::binary_search(adjacency[i].begin(), adjacency[i].end(), j);
  }
};

// Component label per node (labels numbered by smallest member index).
inline std::vector<std::size_t> connected_components(
    const std::vector<std::vector<std::size_t>>& adjacency, std::size_t* count = nullptr) {
  constexpr auto unset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> label(adjacency.size(), unset);
  std::size_t next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < adjacency.size(); ++s) {
    if (label[s] != unset) continue;
    label[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      for (auto w : adjacency[v]) {
        if (label[w] == unset) {
          label[w] = next;
          stack.push_back(w);
        }
      }
    }
    ++next;
  }
  if (count) *count = next;
  return label;
}

/// Builds the adjacency graph of `leaves` (all-pairs, O(L^2 d)). When the
/// result is disconnected a virtual region `virtual_id` of density 0 is
/// linked to the lowest-density region (ties: smallest id) of every component.
inline RegionGraph build_region_graph(std::span<const Region> leaves, RegionId virtual_id) {
  RegionGraph g;
  const std::size_t n = leaves.size();
  g.adjacency.resize(n);
  for (const auto& r : leaves) {
    g.ids.push_back(r.id);
    g.densities.push_back(r.density);
    g.volumes.push_back(r.volume());
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (is_adjacent(leaves[i], leaves[j])) {
        g.adjacency[i].push_back(j);
        g.adjacency[j].push_back(i);
      }
    }
  }
  for (auto& nb : g.adjacency) std::sort(nb.begin(), nb.end());

  std::size_t count = 0;
  const auto label = connected_components(g.adjacency, &count);
  if (count > 1) {
    std::vector<std::size_t> lowest(count, n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& best = lowest[label[i]];
      if (best == n || g.densities[i] < g.densities[best] ||
          (g.densities[i] == g.densities[best] && g.ids[i] < g.ids[best]))
        best = i;
    }
    const std::size_t v = n;
    g.ids.push_back(virtual_id);
    g.densities.push_back(0.0);
    g.volumes.push_back(0.0);
    g.adjacency.emplace_back();
    for (auto i : lowest) {
      g.adjacency[i].push_back(v);
      g.adjacency[v].push_back(i);
    }
    std::sort(g.adjacency[v].begin(), g.adjacency[v].end());
    g.virtual_index = v;
  }
  return g;
}

inline RegionGraph build_region_graph(std::span<const Region> leaves) {
  RegionId next = 0;
  for (const auto& r : leaves) next = std::max<RegionId>(next, r.id + 1);
  return build_region_graph(leaves, next);
}

inline RegionGraph build_region_graph(const PiecewiseDensity& pd) {
  return build_region_graph(pd.leaves(), pd.tree().next_id());
}

}  // namespace bpslt
