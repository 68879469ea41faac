#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "bpslt/error.hpp"

namespace bpslt {

/// Undirected, unweighted simple graph on vertices 0..n-1.
class Network {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;

  Network() = default;

  // Edges are normalised to (min, max) and de-duplicated; self-loops and
  // out-of-range endpoints are rejected.
  Network(std::size_t n, std::vector<Edge> edges, std::vector<std::string> labels = {})
      : n_(n), labels_(std::move(labels)) {
    if (!labels_.empty() && labels_.size() != n_)
      throw DataError("label count does not match vertex count");
    for (auto& [u, v] : edges) {
      if (u >= n_ || v >= n_)
        throw DataError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                        ") has an endpoint out of range");
      if (u == v) throw DataError("self-loop at vertex " + std::to_string(u));
      if (u > v) std::swap(u, v);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    edges_ = std::move(edges);
    neighbors_.resize(n_);
    for (auto [u, v] : edges_) {
      neighbors_[u].push_back(v);
      neighbors_[v].push_back(u);
    }
    for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
  }

  std::size_t size() const noexcept { return n_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<std::size_t>& neighbors(std::size_t v) const { return neighbors_[v]; }
  std::size_t degree(std::size_t v) const { return neighbors_[v].size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  std::string label(std::size_t v) const {
    return labels_.empty() ? std::to_string(v) : labels_[v];
  }

  bool has_edge(std::size_t u, std::size_t v) const {
    const auto& nb = neighbors_[u];
    return std::binary_search(nb.begin(), nb.end(), v);
  }

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> neighbors_;
  std::vector<std::string> labels_;
};

}  // namespace bpslt
