#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bpslt/error.hpp"

namespace bpslt {

using RegionId = std::uint32_t;
inline constexpr RegionId kNoRegion = std::numeric_limits<RegionId>::max();

/// Axis-aligned half-open box [lower_j, upper_j) carrying probability mass
/// and the piecewise-constant density mass / volume.
struct Region {
  RegionId id = 0;
  std::vector<double> lower;
  std::vector<double> upper;
  std::size_t depth = 0;
  double mass = 0.0;
  double density = 0.0;

  std::size_t dim() const noexcept { return lower.size(); }
  double width(std::size_t j) const { return upper[j] - lower[j]; }
  double center(std::size_t j) const { return 0.5 * (lower[j] + upper[j]); }

  double volume() const noexcept {
    double v = 1.0;
    for (std::size_t j = 0; j < lower.size(); ++j) v *= upper[j] - lower[j];
    return v;
  }

  void set_mass(double m) {
    mass = m;
    density = m / volume();
  }
};

inline Region make_region(RegionId id, std::vector<double> lower, std::vector<double> upper,
                          std::size_t depth = 0) {
  if (lower.size() != upper.size()) throw DimensionMismatch(lower.size(), upper.size());
  if (lower.empty()) throw std::invalid_argument("region must have at least one dimension");
  for (std::size_t j = 0; j < lower.size(); ++j) {
    if (!(lower[j] < upper[j]) || !std::isfinite(lower[j]) || !std::isfinite(upper[j]))
      throw std::invalid_argument("region bounds must satisfy lower < upper in dimension " +
                                  std::to_string(j));
  }
  Region r;
  r.id = id;
  r.lower = std::move(lower);
  r.upper = std::move(upper);
  r.depth = depth;
  return r;
}

inline Region unit_cube(std::size_t d, RegionId id = 0) {
  return make_region(id, std::vector<double>(d, 0.0), std::vector<double>(d, 1.0));
}

/// n points in R^d stored row-major.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(std::size_t dim) : dim_(dim) {}
  PointSet(std::size_t dim, std::vector<double> coords) : dim_(dim), coords_(std::move(coords)) {
    if (dim_ == 0 || coords_.size() % dim_ != 0)
      throw std::invalid_argument("coordinate count is not a multiple of the dimension");
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  bool empty() const noexcept { return coords_.empty(); }

  std::span<const double> operator[](std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }
  std::span<double> operator[](std::size_t i) { return {coords_.data() + i * dim_, dim_}; }

  double at(std::size_t i, std::size_t j) const { return coords_[i * dim_ + j]; }

  void push_back(std::span<const double> x) {
    if (x.size() != dim_) throw DimensionMismatch(dim_, x.size());
    coords_.insert(coords_.end(), x.begin(), x.end());
  }

  void reserve(std::size_t n) { coords_.reserve(n * dim_); }

  const std::vector<double>& coords() const noexcept { return coords_; }

  PointSet subset(std::span<const std::size_t> indices) const {
    PointSet out(dim_);
    out.reserve(indices.size());
    for (auto i : indices) out.push_back((*this)[i]);
    return out;
  }

  friend bool operator==(const PointSet&, const PointSet&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
};

inline bool contains(const Region& r, std::span<const double> x) {
  if (x.size() != r.dim()) throw DimensionMismatch(r.dim(), x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!(r.lower[j] <= x[j] && x[j] < r.upper[j])) return false;
  }
  return true;
}

/// Cuts r at the absolute coordinate `at` of dimension `dim`. The children
/// get ids first_child_id and first_child_id + 1, depth + 1, and zero mass.
inline std::pair<Region, Region> split_region(const Region& r, std::size_t dim, double at,
                                              RegionId first_child_id) {
  if (dim >= r.dim())
    throw InvalidSplit("split dimension " + std::to_string(dim) + " out of range");
  if (!(r.lower[dim] < at && at < r.upper[dim]))
    throw InvalidSplit("split location outside the open interior of dimension " +
                       std::to_string(dim));
  Region left = r;
  Region right = r;
  left.id = first_child_id;
  right.id = first_child_id + 1;
  left.upper[dim] = at;
  right.lower[dim] = at;
  left.depth = right.depth = r.depth + 1;
  left.mass = right.mass = 0.0;
  left.density = right.density = 0.0;
  return {std::move(left), std::move(right)};
}

// Affine map of each coordinate onto [0,1): (x_j - lower_j) / (upper_j - lower_j).
inline PointSet rescale_to_unit(const PointSet& points, const Region& r) {
  if (points.dim() != r.dim()) throw DimensionMismatch(r.dim(), points.dim());
  const std::size_t d = r.dim();
  std::vector<double> coords(points.coords().size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto x = points[i];
    if (!contains(r, x))
      throw DataError("point " + std::to_string(i) + " lies outside the region");
    for (std::size_t j = 0; j < d; ++j) {
      double u = (x[j] - r.lower[j]) / (r.upper[j] - r.lower[j]);
      // rounding can land exactly on 1 for points just below the upper face
      coords[i * d + j] = std::min(u, std::nextafter(1.0, 0.0));
    }
  }
  return PointSet(d, std::move(coords));
}

inline PointSet rescale_from_unit(const PointSet& unit_points, const Region& r) {
  if (unit_points.dim() != r.dim()) throw DimensionMismatch(r.dim(), unit_points.dim());
  const std::size_t d = r.dim();
  std::vector<double> coords(unit_points.coords().size());
  for (std::size_t i = 0; i < unit_points.size(); ++i)
    for (std::size_t j = 0; j < d; ++j)
      coords[i * d + j] = r.lower[j] + unit_points.at(i, j) * (r.upper[j] - r.lower[j]);
  return PointSet(d, std::move(coords));
}

/// Smallest box holding all points, widened by `pad_fraction` of its width
/// on each side. A zero-width dimension is widened as if its width were
/// max(1, |x|). The half-open upper bound then strictly contains every point.
inline Region bounding_box(const PointSet& points, double pad_fraction = 0.01) {
  if (points.empty()) throw DataError("cannot bound an empty point set");
  if (!(pad_fraction > 0.0)) throw std::invalid_argument("pad fraction must be positive");
  const std::size_t d = points.dim();
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double v = points.at(i, j);
      if (!std::isfinite(v)) throw DataError("non-finite coordinate in point " + std::to_string(i));
      lo[j] = std::min(lo[j], v);
      hi[j] = std::max(hi[j], v);
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    double w = hi[j] - lo[j];
    if (!(w > 0.0)) w = std::max(1.0, std::abs(lo[j]));
    lo[j] -= pad_fraction * w;
    hi[j] += pad_fraction * w;
  }
  return make_region(0, std::move(lo), std::move(hi));
}

struct PartitionNode {
  Region region;
  std::size_t split_dim = 0;
  double split_at = 0.0;
  RegionId left = kNoRegion;
  RegionId right = kNoRegion;
  RegionId parent = kNoRegion;

  bool is_leaf() const noexcept { return left == kNoRegion; }
};

/// Binary tree of regions. Children of a node tile it exactly; the leaves
/// tile the root. Nodes are kept sorted by id (ids increase with creation).
class PartitionTree {
 public:
  PartitionTree() = default;

  explicit PartitionTree(Region root) {
    root.depth = 0;
    root_ = root.id;
    next_id_ = root.id + 1;
    nodes_.push_back(PartitionNode{std::move(root)});
  }

  RegionId root() const noexcept { return root_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t dim() const { return nodes_.front().region.dim(); }
  const std::vector<PartitionNode>& nodes() const noexcept { return nodes_; }

  bool has(RegionId id) const {
    auto it = find(id);
    return it != nodes_.end();
  }

  const PartitionNode& node(RegionId id) const {
    auto it = find(id);
    if (it == nodes_.end()) throw std::out_of_range("unknown region id " + std::to_string(id));
    return *it;
  }

  const Region& region(RegionId id) const { return node(id).region; }

  std::pair<RegionId, RegionId> split(RegionId id, std::size_t dim, double at) {
    PartitionNode& parent = mutable_node(id);
    if (!parent.is_leaf()) throw InvalidSplit("region " + std::to_string(id) + " is already split");
    auto [l, r] = split_region(parent.region, dim, at, next_id_);
    parent.split_dim = dim;
    parent.split_at = at;
    parent.left = l.id;
    parent.right = r.id;
    next_id_ += 2;
    const RegionId lid = l.id, rid = r.id;
    nodes_.push_back(PartitionNode{std::move(l), 0, 0.0, kNoRegion, kNoRegion, id});
    nodes_.push_back(PartitionNode{std::move(r), 0, 0.0, kNoRegion, kNoRegion, id});
    return {lid, rid};
  }

  void set_mass(RegionId id, double mass) { mutable_node(id).region.set_mass(mass); }

  // Appends a fully specified node (used when reading or trimming trees).
  void append(PartitionNode n) {
    if (!nodes_.empty() && n.region.id <= nodes_.back().region.id)
      throw DataError("partition nodes must be appended in increasing id order");
    if (nodes_.empty()) root_ = n.region.id;
    next_id_ = n.region.id + 1;
    nodes_.push_back(std::move(n));
  }

  std::vector<RegionId> leaves() const {
    std::vector<RegionId> out;
    for (const auto& n : nodes_)
      if (n.is_leaf()) out.push_back(n.region.id);
    return out;
  }

  std::size_t max_leaf_depth() const {
    std::size_t m = 0;
    for (const auto& n : nodes_)
      if (n.is_leaf()) m = std::max(m, n.region.depth);
    return m;
  }

  // Leaf containing x, or kNoRegion when x is outside the root. O(depth).
  RegionId locate(std::span<const double> x) const {
    const PartitionNode* n = &node(root_);
    if (!contains(n->region, x)) return kNoRegion;
    while (!n->is_leaf()) n = &node(x[n->split_dim] < n->split_at ? n->left : n->right);
    return n->region.id;
  }

  RegionId next_id() const noexcept { return next_id_; }

 private:
  std::vector<PartitionNode>::const_iterator find(RegionId id) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id,
                               [](const PartitionNode& n, RegionId v) { return n.region.id < v; });
    if (it != nodes_.end() && it->region.id != id) return nodes_.end();
    return it;
  }

  PartitionNode& mutable_node(RegionId id) {
    auto it = find(id);
    if (it == nodes_.end()) throw std::out_of_range("unknown region id " + std::to_string(id));
    return nodes_[static_cast<std::size_t>(it - nodes_.begin())];
  }

  std::vector<PartitionNode> nodes_;
  RegionId root_ = 0;
  RegionId next_id_ = 0;
};

}  // namespace bpslt
