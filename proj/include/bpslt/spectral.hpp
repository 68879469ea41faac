#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "bpslt/error.hpp"
#include "bpslt/estimator.hpp"
#include "bpslt/geometry.hpp"
#include "bpslt/network.hpp"
#include "bpslt/regiongraph.hpp"
#include "bpslt/sltree.hpp"

namespace bpslt {

// L_ij = 1 for i~j, L_ii = -deg(i), 0 otherwise (negative semidefinite).
inline Eigen::MatrixXd laplacian(const Network& net) {
  const auto n = static_cast<Eigen::Index>(net.size());
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
  for (auto [u, v] : net.edges()) {
    lap(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) = 1.0;
    lap(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(u)) = 1.0;
  }
  for (std::size_t v = 0; v < net.size(); ++v)
    lap(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(v)) =
        -static_cast<double>(net.degree(v));
  return lap;
}

struct SpectralEmbedding {
  Eigen::MatrixXd vectors;  // n x k, unit-norm columns
  Eigen::VectorXd values;   // matching eigenvalues, descending
};

/// Eigenvectors of a symmetric matrix for its k algebraically largest
/// eigenvalues, optionally skipping the very largest. Each column's sign makes
/// sum_i v_i^3 positive, which does not depend on vertex order; columns with a
/// negligible third moment fall back to a positive first non-negligible entry.
inline SpectralEmbedding leading_eigenvectors(const Eigen::MatrixXd& lap, std::size_t k,
                                              bool skip_first = false) {
  const auto n = static_cast<std::size_t>(lap.rows());
  if (lap.cols() != lap.rows()) throw std::invalid_argument("matrix must be square");
  const std::size_t available = skip_first ? (n == 0 ? 0 : n - 1) : n;
  if (k < 1 || k > available)
    throw std::invalid_argument("eigenvector count " + std::to_string(k) + " out of range");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigensolver did not converge");

  SpectralEmbedding out;
  out.vectors.resize(lap.rows(), static_cast<Eigen::Index>(k));
  out.values.resize(static_cast<Eigen::Index>(k));
  const std::size_t offset = skip_first ? 1 : 0;
  for (std::size_t c = 0; c < k; ++c) {
    const auto src = static_cast<Eigen::Index>(n - 1 - offset - c);  // ascending storage
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    v.normalize();
    const double skew = v.array().cube().sum();
    if (std::abs(skew) > 1e-8) {
      if (skew < 0.0) v = -v;
    } else {
      const double tol = 1e-10 * v.cwiseAbs().maxCoeff();
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v(i)) > tol) {
          if (v(i) < 0.0) v = -v;
          break;
        }
      }
    }
    out.vectors.col(static_cast<Eigen::Index>(c)) = v;
    out.values(static_cast<Eigen::Index>(c)) = solver.eigenvalues()(src);
  }
  return out;
}

struct Community {
  std::vector<std::size_t> vertices;
  double cohesion = 0.0;  // average density of the branch
  RegionId branch_leaf = 0;
};

inline constexpr int kTransitional = -1;

struct CommunityResult {
  std::vector<int> assignment;  // community index, or kTransitional
  std::vector<Community> communities;
  std::vector<std::size_t> transitional;
  Eigen::MatrixXd embedding;
  std::vector<std::size_t> estimation_columns;  // embedding columns fed to the estimator
  std::vector<RegionId> vertex_region;          // leaf region of each vertex
  std::optional<Hierarchy> hierarchy;
  BranchDecomposition branches;
};

struct CommunityOptions {
  bool skip_first = false;
  std::optional<double> min_persistence;  // default: 5% of max density
  BranchCountRule branch_rule = BranchCountRule::most_persistent;
};

namespace detail {

inline CommunityResult single_community(CommunityResult r, std::size_t n) {
  r.communities.assign(1, Community{});
  r.communities[0].vertices.resize(n);
  for (std::size_t v = 0; v < n; ++v) r.communities[0].vertices[v] = v;
  r.communities[0].cohesion = r.hierarchy ? r.hierarchy->density.integral() /
                                                r.hierarchy->density.domain().volume()
                                          : 0.0;
  r.assignment.assign(n, 0);
  r.transitional.clear();
  return r;
}

}  // namespace detail

/// Spectral embedding + sub-level tree communities.
///
/// Vertices are embedded with the k leading Laplacian eigenvectors; columns
/// that are constant across vertices carry no information and are not passed
/// to the estimator. Vertices whose regions lie on an extracted branch form
/// that branch's community. The rest are resolved iteratively: a vertex with
/// edges into two or more communities is transitional; one whose resolved
/// neighbours all lie in one community (and has no unresolved neighbours)
/// joins it.
inline CommunityResult detect_communities(const Network& net, std::size_t k,
                                          const EstimatorConfig& est_config,
                                          std::optional<std::size_t> branch_k,
                                          const CommunityOptions& options = {}) {
  const std::size_t n = net.size();
  if (n < 3) throw std::invalid_argument("community detection needs at least 3 vertices");

  CommunityResult result;
  auto embedding = leading_eigenvectors(laplacian(net), k, options.skip_first);
  result.embedding = embedding.vectors;

  const double scale = std::max(1.0, result.embedding.cwiseAbs().maxCoeff());
  for (Eigen::Index c = 0; c < result.embedding.cols(); ++c) {
    const auto col = result.embedding.col(c);
    if (col.maxCoeff() - col.minCoeff() > 1e-9 * scale)
      result.estimation_columns.push_back(static_cast<std::size_t>(c));
  }
  if (result.estimation_columns.empty()) return detail::single_community(std::move(result), n);

  PointSet points(result.estimation_columns.size());
  points.reserve(n);
  std::vector<double> row(result.estimation_columns.size());
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t j = 0; j < row.size(); ++j)
      row[j] = result.embedding(static_cast<Eigen::Index>(v),
                                static_cast<Eigen::Index>(result.estimation_columns[j]));
    points.push_back(row);
  }

  auto pd = estimate_density(points, bounding_box(points, 0.01), est_config);
  result.hierarchy = build_hierarchy(std::move(pd));
  const auto& h = *result.hierarchy;
  result.vertex_region.resize(n);
  for (std::size_t v = 0; v < n; ++v) result.vertex_region[v] = h.density.tree().locate(points[v]);

  const std::size_t max_components = max_coexisting_components(h.tree, h.graph);
  if (max_components < 2 || (branch_k && *branch_k < 2))
    return detail::single_community(std::move(result), n);
  const double min_persistence =
      options.min_persistence.value_or(default_min_persistence(h.graph));
  result.branches = extract_branches(h.tree, h.graph, branch_k, min_persistence, options.branch_rule);
  if (result.branches.branches.size() < 2) return detail::single_community(std::move(result), n);

  // region -> branch index
  std::vector<int> region_branch(h.graph.size(), -1);
  for (std::size_t b = 0; b < result.branches.branches.size(); ++b)
    for (auto id : result.branches.branches[b].members)
      region_branch[h.graph.index_of(id)] = static_cast<int>(b);

  const std::size_t nb = result.branches.branches.size();
  result.communities.resize(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    const auto& br = result.branches.branches[b];
    double mass = 0.0, volume = 0.0;
    for (auto id : br.members) {
      const auto i = h.graph.index_of(id);
      mass += h.graph.volumes[i] * h.graph.densities[i];
      volume += h.graph.volumes[i];
    }
    result.communities[b].cohesion = mass / volume;
    result.communities[b].branch_leaf = br.leaf;
  }

  constexpr int unresolved = -2;
  std::vector<int> state(n, unresolved);
  for (std::size_t v = 0; v < n; ++v) {
    const int b = region_branch[h.graph.index_of(result.vertex_region[v])];
    if (b >= 0) state[v] = b;
  }

  // Jacobi-style rounds so the outcome does not depend on vertex order.
  for (std::size_t round = 0; round < n; ++round) {
    std::vector<int> next = state;
    bool changed = false;
    for (std::size_t v = 0; v < n; ++v) {
      if (state[v] != unresolved) continue;
      std::set<int> touched;
      std::size_t waiting = 0;
      for (auto w : net.neighbors(v)) {
        if (state[w] >= 0)
          touched.insert(state[w]);
        else if (state[w] == unresolved)
          ++waiting;
      }
      if (touched.size() >= 2) {
        next[v] = kTransitional;
        changed = true;
      } else if (touched.size() == 1 && waiting == 0) {
        next[v] = *touched.begin();
        changed = true;
      }
    }
    state = std::move(next);
    if (!changed) break;
  }

  // Leftovers only touch one community through waiting chains, or none at all.
  std::vector<Eigen::VectorXd> centroid(nb, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(row.size())));
  std::vector<std::size_t> count(nb, 0);
  for (std::size_t v = 0; v < n; ++v) {
    if (state[v] < 0) continue;
    auto x = points[v];
    for (std::size_t j = 0; j < row.size(); ++j) centroid[static_cast<std::size_t>(state[v])](static_cast<Eigen::Index>(j)) += x[j];
    ++count[static_cast<std::size_t>(state[v])];
  }
  for (std::size_t b = 0; b < nb; ++b)
    if (count[b] > 0) centroid[b] /= static_cast<double>(count[b]);
  std::vector<int> final_state = state;
  for (std::size_t v = 0; v < n; ++v) {
    if (state[v] != unresolved) continue;
    std::set<int> touched;
    for (auto w : net.neighbors(v))
      if (state[w] >= 0) touched.insert(state[w]);
    if (touched.size() == 1) {
      final_state[v] = *touched.begin();
      continue;
    }
    auto x = points[v];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < nb; ++b) {
      if (count[b] == 0) continue;
      double dist = 0.0;
      for (std::size_t j = 0; j < row.size(); ++j) {
        const double diff = x[j] - centroid[b](static_cast<Eigen::Index>(j));
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        final_state[v] = static_cast<int>(b);
      }
    }
  }

  result.assignment = std::move(final_state);
  for (std::size_t v = 0; v < n; ++v) {
    if (result.assignment[v] == kTransitional)
      result.transitional.push_back(v);
    else
      result.communities[static_cast<std::size_t>(result.assignment[v])].vertices.push_back(v);
  }
  return result;
}

}  // namespace bpslt
