#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "bpslt/error.hpp"
#include "bpslt/estimator.hpp"
#include "bpslt/io.hpp"
#include "bpslt/rng.hpp"

using namespace bpslt;

namespace {

PointSet uniform_points(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  PointSet p(d);
  std::vector<double> x(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : x) v = rng.uniform();
    p.push_back(x);
  }
  return p;
}

// Two well separated bumps on [0,1)^2 plus a thin uniform floor.
PointSet clustered_points(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  PointSet p(2);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    double x, y;
    if (u < 0.1) {
      x = rng.uniform();
      y = rng.uniform();
    } else {
      const double cx = u < 0.55 ? 0.25 : 0.7;
      x = std::clamp(cx + 0.05 * rng.normal(), 0.0, 0.999);
      y = std::clamp(0.5 + 0.08 * rng.normal(), 0.0, 0.999);
    }
    p.push_back(std::vector<double>{x, y});
  }
  return p;
}

void expect_normalised(const PiecewiseDensity& pd) {
  EXPECT_NEAR(pd.total_mass(), 1.0, 1e-9);
  EXPECT_NEAR(pd.integral(), 1.0, 1e-9);
  for (const auto& r : pd.leaves()) {
    EXPECT_GT(r.density, 0.0);
    EXPECT_NEAR(r.density * r.volume(), r.mass, 1e-12 * r.mass);
  }
}

bool same_leaves(const PiecewiseDensity& a, const PiecewiseDensity& b) {
  if (a.leaves().size() != b.leaves().size()) return false;
  for (std::size_t i = 0; i < a.leaves().size(); ++i) {
    const auto& x = a.leaves()[i];
    const auto& y = b.leaves()[i];
    if (x.id != y.id || x.lower != y.lower || x.upper != y.upper || x.mass != y.mass) return false;
  }
  return true;
}

}  // namespace

TEST(Config, Validation) {
  EstimatorConfig c;
  EXPECT_NO_THROW(c.validate());
  c.alpha = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.max_depth = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.chi_significance = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.bins = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Estimate, UniformCubeStaysOneLeaf) {
  int single = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EstimatorConfig c;
    c.seed = seed;
    const auto pd = estimate_density(uniform_points(2000, 3, seed), unit_cube(3), c);
    if (pd.leaves().size() == 1) ++single;
    expect_normalised(pd);
  }
  EXPECT_GE(single, 18);
}

TEST(Estimate, HalfLineMassUpdate) {
  Rng rng(1);
  PointSet p(1);
  for (int i = 0; i < 1000; ++i) p.push_back(std::vector<double>{0.5 * rng.uniform()});
  EstimatorConfig c;
  c.bins = 2;
  c.max_depth = 1;
  const auto pd = estimate_density(p, unit_cube(1), c);
  ASSERT_EQ(pd.leaves().size(), 2u);
  EXPECT_DOUBLE_EQ(pd.tree().node(0).split_at, 0.5);
  const double left = 1000.5 / 1001.0;
  EXPECT_NEAR(pd.leaves()[0].mass, left, 1e-15);
  EXPECT_NEAR(pd.leaves()[1].mass, 1.0 - left, 1e-15);
  EXPECT_NEAR(evaluate(pd, std::vector<double>{0.2}), 2.0 * left, 1e-12);
  EXPECT_NEAR(evaluate(pd, std::vector<double>{0.7}), 2.0 * (1.0 - left), 1e-12);
  EXPECT_NEAR(evaluate(pd, std::vector<double>{0.2}), 1.999, 1e-3);
  EXPECT_NEAR(evaluate(pd, std::vector<double>{0.7}), 0.001, 1e-3);
}

TEST(Estimate, SinglePoint) {
  const auto pd = estimate_density(PointSet(2, {0.3, 0.3}), unit_cube(2), EstimatorConfig{});
  ASSERT_EQ(pd.leaves().size(), 1u);
  EXPECT_DOUBLE_EQ(pd.leaves()[0].mass, 1.0);
}

TEST(Estimate, Errors) {
  EXPECT_THROW(estimate_density(PointSet(1, {1.5}), unit_cube(1), EstimatorConfig{}), DataError);
  EXPECT_THROW(estimate_density(PointSet(1), unit_cube(1), EstimatorConfig{}), DataError);
  EXPECT_THROW(estimate_density(PointSet(2, {0.1, 0.1}), unit_cube(1), EstimatorConfig{}),
               DimensionMismatch);
  EstimatorConfig bad;
  bad.alpha = -1.0;
  EXPECT_THROW(estimate_density(PointSet(1, {0.5}), unit_cube(1), bad), std::invalid_argument);
}

TEST(Estimate, SplitsAtMaxGapCut) {
  // All points in the first third of dim 1: the cut lands at 1/3 of that side.
  Rng rng(2);
  PointSet p(2);
  for (int i = 0; i < 300; ++i) p.push_back(std::vector<double>{2.0 + 2.0 * rng.uniform(), rng.uniform() / 3.0});
  EstimatorConfig c;
  c.max_depth = 1;
  const auto domain = make_region(0, {2.0, 0.0}, {4.0, 1.0});
  const auto pd = estimate_density(p, domain, c);
  const auto& root = pd.tree().node(0);
  ASSERT_FALSE(root.is_leaf());
  EXPECT_EQ(root.split_dim, 1u);
  EXPECT_DOUBLE_EQ(root.split_at, 1.0 / 3.0);
}

TEST(Estimate, InvariantsOnClusteredData) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    EstimatorConfig c;
    c.seed = seed;
    const auto pts = clustered_points(5000, seed);
    const auto pd = estimate_density(pts, unit_cube(2), c);
    EXPECT_GT(pd.leaves().size(), 4u);
    expect_normalised(pd);
    for (const auto& r : pd.leaves()) EXPECT_LE(r.depth, c.max_depth);

    // every level of the tree carries total mass one
    for (std::size_t level = 0; level <= pd.tree().max_leaf_depth(); ++level) {
      double mass = 0.0;
      for (const auto& n : pd.tree().nodes())
        if (n.region.depth == level || (n.is_leaf() && n.region.depth < level)) mass += n.region.mass;
      EXPECT_NEAR(mass, 1.0, 1e-9) << "level " << level;
    }
  }
}

TEST(Estimate, MaxDepthIsRespected) {
  EstimatorConfig c;
  c.max_depth = 3;
  const auto pd = estimate_density(clustered_points(5000, 3), unit_cube(2), c);
  EXPECT_LE(pd.tree().max_leaf_depth(), 3u);
  EXPECT_LE(pd.leaves().size(), 8u);
}

TEST(Estimate, DeterministicAndOrderIndependent) {
  const auto pts = clustered_points(4000, 9);
  EstimatorConfig c;
  c.seed = 42;
  const auto a = estimate_density(pts, unit_cube(2), c);
  const auto b = estimate_density(pts, unit_cube(2), c);
  const auto r = detail::estimate_density(pts, unit_cube(2), c, detail::SweepOrder::reverse);
  EXPECT_TRUE(same_leaves(a, b));
  EXPECT_TRUE(same_leaves(a, r));
  EXPECT_EQ(io::dump(io::partition_to_json(a)), io::dump(io::partition_to_json(b)));
  EXPECT_EQ(io::dump(io::partition_to_json(a)), io::dump(io::partition_to_json(r)));
}

TEST(Evaluate, UniformEstimate) {
  const auto pd = estimate_density(PointSet(3, {0.5, 0.5, 0.5}), unit_cube(3), EstimatorConfig{});
  EXPECT_DOUBLE_EQ(evaluate(pd, std::vector<double>{0.1, 0.9, 0.4}), 1.0);
  EXPECT_DOUBLE_EQ(evaluate(pd, std::vector<double>{2.0, 2.0, 2.0}), 0.0);
  EXPECT_THROW(evaluate(pd, std::vector<double>{0.1}), DimensionMismatch);
}

TEST(Evaluate, MonteCarloIntegral) {
  const auto pd = estimate_density(clustered_points(5000, 4), unit_cube(2), EstimatorConfig{});
  Rng rng(77);
  double sum = 0.0;
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i) sum += evaluate(pd, std::vector<double>{rng.uniform(), rng.uniform()});
  EXPECT_NEAR(sum / draws, 1.0, 0.01);
}

TEST(Evaluate, ComponentMassMatchesCounts) {
  // 1-d mixture of two narrow bumps; support halves [0, 0.5) and [0.5, 1).
  Rng rng(5);
  PointSet p(1);
  std::size_t low = 0;
  for (int i = 0; i < 4000; ++i) {
    const double c = rng.uniform() < 0.5 ? 0.25 : 0.75;
    const double x = std::clamp(c + 0.04 * rng.normal(), 0.0, 0.999);
    if (x < 0.5) ++low;
    p.push_back(std::vector<double>{x});
  }
  const auto pd = estimate_density(p, unit_cube(1), EstimatorConfig{});
  double integral_low = 0.0;
  for (const auto& r : pd.leaves()) {
    const double overlap = std::max(0.0, std::min(r.upper[0], 0.5) - r.lower[0]);
    integral_low += r.density * overlap;
  }
  const double empirical = static_cast<double>(low) / 4000.0;
  EXPECT_NEAR(integral_low, 0.5, 0.05);
  EXPECT_NEAR(integral_low, empirical, 0.05);
}

TEST(Trim, IdentityAtZero) {
  const auto pd = estimate_density(clustered_points(3000, 6), unit_cube(2), EstimatorConfig{});
  EXPECT_TRUE(same_leaves(trim(pd, 0), pd));
}

TEST(Trim, BalancedTreeHandExample) {
  PartitionTree tree(unit_cube(1));
  tree.set_mass(0, 1.0);
  std::vector<RegionId> level{0};
  for (int depth = 0; depth < 3; ++depth) {
    std::vector<RegionId> next;
    for (auto id : level) {
      const auto& r = tree.region(id);
      const double mass = r.mass;
      auto [l, rr] = tree.split(id, 0, r.center(0));
      tree.set_mass(l, mass / 2);
      tree.set_mass(rr, mass / 2);
      next.push_back(l);
      next.push_back(rr);
    }
    level = next;
  }
  const PiecewiseDensity pd(tree, EstimatorConfig{});
  ASSERT_EQ(pd.leaves().size(), 8u);
  const auto t = trim(pd, 2);
  ASSERT_EQ(t.leaves().size(), 2u);
  EXPECT_DOUBLE_EQ(t.leaves()[0].mass, 0.5);
  EXPECT_DOUBLE_EQ(t.leaves()[1].mass, 0.5);
  EXPECT_DOUBLE_EQ(t.leaves()[0].density, 1.0);
  EXPECT_THROW(trim(pd, 3), std::invalid_argument);
}

TEST(Trim, PreservesInvariants) {
  const auto pd = estimate_density(clustered_points(5000, 7), unit_cube(2), EstimatorConfig{});
  const auto depth = pd.tree().max_leaf_depth();
  ASSERT_GT(depth, 2u);
  for (std::size_t levels = 1; levels < depth; ++levels) {
    const auto t = trim(pd, levels);
    expect_normalised(t);
    EXPECT_EQ(t.tree().max_leaf_depth(), depth - levels);
    // each trimmed leaf keeps the mass of the original leaves it covers
    for (const auto& r : t.leaves()) {
      double covered = 0.0;
      for (const auto& o : pd.leaves()) {
        const std::vector<double> c{o.center(0), o.center(1)};
        if (contains(r, c)) covered += o.mass;
      }
      EXPECT_NEAR(r.mass, covered, 1e-12);
    }
  }
}
