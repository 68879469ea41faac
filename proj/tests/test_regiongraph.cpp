#include <gtest/gtest.h>

#include <vector>

#include "bpslt/datagen.hpp"
#include "bpslt/estimator.hpp"
#include "bpslt/regiongraph.hpp"
#include "oracles.hpp"

using namespace bpslt;

namespace {

Region box(RegionId id, std::vector<double> lo, std::vector<double> hi, double density = 1.0) {
  auto r = make_region(id, std::move(lo), std::move(hi));
  r.set_mass(density * r.volume());
  return r;
}

}  // namespace

TEST(Adjacency, HandExamples) {
  EXPECT_TRUE(is_adjacent(box(0, {0, 0}, {0.5, 1}), box(1, {0.5, 0}, {1, 1})));
  EXPECT_FALSE(is_adjacent(box(0, {0, 0}, {0.25, 0.25}), box(1, {0.75, 0.75}, {1, 1})));
  EXPECT_TRUE(is_adjacent(box(0, {0, 0}, {0.5, 0.5}), box(1, {0.5, 0.5}, {1, 1})));
  EXPECT_THROW(is_adjacent(box(0, {0}, {1}), box(1, {0, 0}, {1, 1})), DimensionMismatch);
}

TEST(Adjacency, AbsorbsRoundingDrift) {
  const double a = 0.1 + 0.2;  // 0.30000000000000004
  EXPECT_TRUE(is_adjacent(box(0, {0.0}, {0.3}), box(1, {a}, {1.0})));
  EXPECT_FALSE(is_adjacent(box(0, {0.0}, {0.3}), box(1, {0.3001}, {1.0})));
}

TEST(Adjacency, TinyBoxesFarFromOrigin) {
  // widths ~1e-12 near 1: a shared face must still count
  EXPECT_TRUE(is_adjacent(box(0, {0.99999899633726863}, {0.99999899905653089}),
                          box(1, {0.99999899905653089}, {0.99999899996295172})));
  EXPECT_FALSE(is_adjacent(box(0, {0.99999899633726863}, {0.99999899905653089}),
                           box(1, {0.99999899996295172}, {0.99999899999652286})));
}

TEST(RegionGraphTest, SingleLeaf) {
  const std::vector<Region> leaves{box(0, {0, 0}, {1, 1})};
  const auto g = build_region_graph(leaves);
  EXPECT_EQ(g.size(), 1u);
  EXPECT_EQ(g.edge_count(), 0u);
  EXPECT_FALSE(g.virtual_index.has_value());
}

TEST(RegionGraphTest, QuadrantGrid) {
  const std::vector<Region> leaves{box(1, {0, 0}, {0.5, 0.5}), box(2, {0.5, 0}, {1, 0.5}),
                                   box(3, {0, 0.5}, {0.5, 1}), box(4, {0.5, 0.5}, {1, 1})};
  const auto g = build_region_graph(leaves);
  EXPECT_EQ(g.size(), 4u);
  EXPECT_EQ(g.edge_count(), 6u);
  EXPECT_FALSE(g.virtual_index.has_value());
}

TEST(RegionGraphTest, VirtualRegionJoinsComponents) {
  const std::vector<Region> leaves{box(0, {0, 0}, {0.1, 0.1}, 3.0), box(1, {0.5, 0.5}, {0.6, 0.6}, 2.0)};
  const auto g = build_region_graph(leaves, 7);
  ASSERT_TRUE(g.virtual_index.has_value());
  EXPECT_EQ(g.virtual_id(), RegionId{7});
  EXPECT_EQ(g.adjacency[*g.virtual_index].size(), 2u);
  EXPECT_EQ(g.densities[*g.virtual_index], 0.0);
  std::size_t count = 0;
  connected_components(g.adjacency, &count);
  EXPECT_EQ(count, 1u);
}

TEST(RegionGraphTest, VirtualLinksLowestDensityPerComponent) {
  // component {0, 1} with densities 5, 2; component {2, 3} tied at 4 -> smaller id
  const std::vector<Region> leaves{box(0, {0.0}, {0.1}, 5.0), box(1, {0.1}, {0.2}, 2.0),
                                   box(2, {0.5}, {0.6}, 4.0), box(3, {0.6}, {0.7}, 4.0),
                                   box(4, {0.9}, {1.0}, 9.0)};
  const auto g = build_region_graph(leaves);
  ASSERT_TRUE(g.virtual_index.has_value());
  EXPECT_EQ(g.adjacency[*g.virtual_index], (std::vector<std::size_t>{1, 2, 4}));
  EXPECT_EQ(g.virtual_id(), RegionId{5});
}

TEST(RegionGraphTest, MatchesBruteForceAdjacency) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const std::size_t d = 1 + seed % 3;
    const PiecewiseDensity pd(oracle::random_dyadic_partition(d, 40 + seed * 7, seed), EstimatorConfig{});
    ASSERT_LE(pd.leaves().size(), 200u);
    const auto g = build_region_graph(pd);
    const auto& leaves = pd.leaves();
    std::size_t edges = 0;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      for (std::size_t j = 0; j < leaves.size(); ++j) {
        if (i == j) continue;
        const bool touch = oracle::closures_touch(leaves[i], leaves[j]);
        EXPECT_EQ(is_adjacent(leaves[i], leaves[j]), touch);
        EXPECT_EQ(is_adjacent(leaves[j], leaves[i]), touch);
        EXPECT_EQ(g.has_edge(i, j), touch);
        if (touch && i < j) ++edges;
      }
      EXPECT_FALSE(g.has_edge(i, i));
    }
    EXPECT_EQ(g.edge_count(), edges);
    EXPECT_FALSE(g.virtual_index.has_value());
  }
}

TEST(RegionGraphTest, SiblingLeavesAreAdjacent) {
  const auto tree = oracle::random_dyadic_partition(3, 150, 4);
  for (const auto& n : tree.nodes()) {
    if (n.is_leaf()) continue;
    const auto& l = tree.node(n.left);
    const auto& r = tree.node(n.right);
    if (l.is_leaf() && r.is_leaf()) {
      EXPECT_TRUE(is_adjacent(l.region, r.region));
    }
  }
}

TEST(RegionGraphTest, EstimatedMixtureIsConnected) {
  const auto spec = reference_mixture_spec();
  MixtureSpec low;
  low.weights = spec.weights;
  low.covariance = spec.covariance.topLeftCorner(3, 3);
  for (const auto& mu : spec.means) low.means.emplace_back(mu.begin(), mu.begin() + 3);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto data = sample_mixture(low, 5000, seed);
    EstimatorConfig c;
    c.seed = seed;
    const auto pd = estimate_density(data.points, bounding_box(data.points), c);
    const auto g = build_region_graph(pd);
    EXPECT_FALSE(g.virtual_index.has_value());
    std::size_t count = 0;
    connected_components(g.adjacency, &count);
    EXPECT_EQ(count, 1u);
  }
}
