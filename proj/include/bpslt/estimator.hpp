#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bpslt/error.hpp"
#include "bpslt/geometry.hpp"
#include "bpslt/rng.hpp"
#include "bpslt/uniformity.hpp"

namespace bpslt {

struct EstimatorConfig {
  std::size_t bins = 3;
  double alpha = 0.5;  // Laplace pseudo-count
  double chi_significance = 1e-3;
  double z_significance = 1e-3;
  std::optional<std::size_t> subsample = 500;
  std::size_t max_depth = 30;
  std::uint64_t seed = 0;

  void validate() const {
    if (bins < 2) throw std::invalid_argument("bins must be at least 2");
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
    if (max_depth < 1) throw std::invalid_argument("max_depth must be at least 1");
    if (subsample && *subsample < 2) throw std::invalid_argument("subsample must be at least 2");
    check_significance(chi_significance);
    check_significance(z_significance);
  }

  friend bool operator==(const EstimatorConfig&, const EstimatorConfig&) = default;
};

/// Piecewise-constant density: the leaves of a partition tree, each with
/// mass Pr(r) and density Pr(r)/|r|.
class PiecewiseDensity {
 public:
  PiecewiseDensity() = default;
  PiecewiseDensity(PartitionTree tree, EstimatorConfig config)
      : tree_(std::move(tree)), config_(config) {
    for (auto id : tree_.leaves()) leaves_.push_back(tree_.region(id));
  }

  const std::vector<Region>& leaves() const noexcept { return leaves_; }
  const PartitionTree& tree() const noexcept { return tree_; }
  const EstimatorConfig& config() const noexcept { return config_; }
  const Region& domain() const { return tree_.region(tree_.root()); }
  std::size_t dim() const { return tree_.dim(); }

  double total_mass() const {
    double s = 0.0;
    for (const auto& r : leaves_) s += r.mass;
    return s;
  }

  // Integral of the estimate over the domain.
  double integral() const {
    double s = 0.0;
    for (const auto& r : leaves_) s += r.density * r.volume();
    return s;
  }

  double max_density() const {
    double m = 0.0;
    for (const auto& r : leaves_) m = std::max(m, r.density);
    return m;
  }

 private:
  PartitionTree tree_;
  EstimatorConfig config_;
  std::vector<Region> leaves_;
};

inline double evaluate(const PiecewiseDensity& pd, std::span<const double> x) {
  if (x.size() != pd.dim()) throw DimensionMismatch(pd.dim(), x.size());
  const RegionId id = pd.tree().locate(x);
  return id == kNoRegion ? 0.0 : pd.tree().region(id).density;
}

// Test-and-split decision for one region.
struct SplitDecision {
  RegionId region = kNoRegion;
  std::optional<SplitHint> split;
  std::optional<TestKind> trigger;
};

inline SplitDecision decide_split(const Region& r, const PointSet& points,
                                  std::span<const std::size_t> members,
                                  const EstimatorConfig& config) {
  SplitDecision out{r.id, std::nullopt, std::nullopt};
  if (members.size() < 2 || r.depth >= config.max_depth) return out;

  const PointSet unit = rescale_to_unit(points.subset(members), r);
  const BinGapSummary summary = bin_counts_and_gaps(unit, config.bins);
  const SplitHint at_max_gap = gap_split_location(r, summary.argmax_gap, config.bins);

  for (std::size_t j = 0; j < summary.dim; ++j) {
    if (chi_square_uniform(summary.counts_row(j), config.chi_significance).reject) {
      out.split = at_max_gap;
      out.trigger = TestKind::chi_square;
      return out;
    }
  }
  const auto verdict = discrepancy_uniformity_test(
      unit, config.z_significance, config.subsample, derive_seed(config.seed, r.id), at_max_gap);
  if (verdict.reject) {
    out.split = verdict.split_hint;
    out.trigger = TestKind::discrepancy;
  }
  return out;
}

namespace detail {

struct ActiveRegion {
  RegionId id;
  std::vector<std::size_t> members;
};

enum class SweepOrder { forward, reverse };

inline PiecewiseDensity estimate_density(const PointSet& points, const Region& domain,
                                         const EstimatorConfig& config, SweepOrder order) {
  config.validate();
  if (points.empty()) throw DataError("cannot estimate a density from zero points");
  if (points.dim() != domain.dim()) throw DimensionMismatch(domain.dim(), points.dim());
  for (std::size_t i = 0; i < points.size(); ++i)
    if (!contains(domain, points[i]))
      throw DataError("point " + std::to_string(i) + " lies outside the domain");

  Region root = domain;
  root.id = 0;
  root.depth = 0;
  PartitionTree tree(std::move(root));
  tree.set_mass(0, 1.0);

  std::vector<ActiveRegion> active(1);
  active[0].id = 0;
  active[0].members.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) active[0].members[i] = i;

  while (!active.empty()) {
    // Decisions depend only on each region's own points and id, so the
    // visiting order cannot change the outcome.
    std::vector<SplitDecision> decisions(active.size());
    auto decide = [&](std::size_t k) {
      decisions[k] = decide_split(tree.region(active[k].id), points, active[k].members, config);
    };
    if (order == SweepOrder::forward) {
      for (std::size_t k = 0; k < active.size(); ++k) decide(k);
    } else {
      for (std::size_t k = active.size(); k-- > 0;) decide(k);
    }

    // Single-writer update in increasing region id, which fixes child ids.
    std::vector<std::size_t> by_id(active.size());
    for (std::size_t k = 0; k < by_id.size(); ++k) by_id[k] = k;
    std::sort(by_id.begin(), by_id.end(),
              [&](std::size_t a, std::size_t b) { return active[a].id < active[b].id; });

    std::vector<ActiveRegion> next;
    for (auto k : by_id) {
      const auto& dec = decisions[k];
      if (!dec.split) continue;
      const double parent_mass = tree.region(active[k].id).mass;
      auto [lid, rid] = tree.split(active[k].id, dec.split->dim, dec.split->at);

      ActiveRegion left{lid, {}}, right{rid, {}};
      for (auto i : active[k].members) {
        if (points.at(i, dec.split->dim) < dec.split->at)
          left.members.push_back(i);
        else
          right.members.push_back(i);
      }
      const double n_parent = static_cast<double>(active[k].members.size());
      const double left_mass = parent_mass * (static_cast<double>(left.members.size()) + config.alpha) /
                               (n_parent + 2.0 * config.alpha);
      tree.set_mass(lid, left_mass);
      tree.set_mass(rid, parent_mass - left_mass);
      next.push_back(std::move(left));
      next.push_back(std::move(right));
    }
    active = std::move(next);
  }
  return PiecewiseDensity(std::move(tree), config);
}

}  // namespace detail

/// Recursive test-and-split density estimation on `domain`. Each sweep
/// tests every region created in the previous sweep: d per-dimension
/// chi-square tests first, then (if none rejects) the discrepancy test;
/// a rejected region is cut at its maximum CDF gap. Child masses follow
/// Pr(r1) = Pr(r) (#r1 + alpha) / (#r + 2 alpha).
inline PiecewiseDensity estimate_density(const PointSet& points, const Region& domain,
                                         const EstimatorConfig& config) {
  return detail::estimate_density(points, domain, config, detail::SweepOrder::forward);
}

/// Collapses the deepest `levels` levels: nodes deeper than
/// (max leaf depth - levels) are merged into their ancestor at that depth.
inline PiecewiseDensity trim(const PiecewiseDensity& pd, std::size_t levels) {
  const std::size_t max_depth = pd.tree().max_leaf_depth();
  if (levels == 0) return pd;
  if (levels >= max_depth)
    throw std::invalid_argument("cannot trim " + std::to_string(levels) +
                                " levels from a tree of depth " + std::to_string(max_depth));
  const std::size_t cap = max_depth - levels;

  PartitionTree out;
  for (const auto& n : pd.tree().nodes()) {
    if (n.region.depth > cap) continue;
    PartitionNode copy = n;
    if (copy.region.depth == cap && !copy.is_leaf()) {
      double mass = 0.0;
      std::vector<RegionId> stack{n.region.id};
      while (!stack.empty()) {
        const auto& m = pd.tree().node(stack.back());
        stack.pop_back();
        if (m.is_leaf()) {
          mass += m.region.mass;
        } else {
          stack.push_back(m.right);
          stack.push_back(m.left);
        }
      }
      copy.left = copy.right = kNoRegion;
      copy.split_dim = 0;
      copy.split_at = 0.0;
      copy.region.set_mass(mass);
    }
    out.append(std::move(copy));
  }
  return PiecewiseDensity(std::move(out), pd.config());
}

}  // namespace bpslt
