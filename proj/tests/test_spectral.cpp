#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "bpslt/datagen.hpp"
#include "bpslt/metrics.hpp"
#include "bpslt/rng.hpp"
#include "bpslt/spectral.hpp"

using namespace bpslt;

namespace {

Network complete_barbell(std::size_t half) {
  std::vector<Network::Edge> e;
  for (std::size_t base : {std::size_t{0}, half})
    for (std::size_t i = 0; i < half; ++i)
      for (std::size_t j = i + 1; j < half; ++j) e.push_back({base + i, base + j});
  e.push_back({half - 1, half});
  return Network(2 * half, e);
}

std::vector<std::set<std::size_t>> community_sets(const CommunityResult& r) {
  std::vector<std::set<std::size_t>> out;
  for (const auto& c : r.communities) out.emplace_back(c.vertices.begin(), c.vertices.end());
  return out;
}

void expect_consistent(const Network& net, const CommunityResult& r) {
  const std::size_t n = net.size();
  ASSERT_EQ(r.assignment.size(), n);
  std::vector<int> seen(n, 0);
  for (std::size_t c = 0; c < r.communities.size(); ++c)
    for (auto v : r.communities[c].vertices) {
      ++seen[v];
      EXPECT_EQ(r.assignment[v], static_cast<int>(c));
    }
  for (auto v : r.transitional) {
    ++seen[v];
    EXPECT_EQ(r.assignment[v], kTransitional);
  }
  for (std::size_t v = 0; v < n; ++v) EXPECT_EQ(seen[v], 1) << "vertex " << v;
}

}  // namespace

TEST(Laplacian, PathExample) {
  const Network path(3, {{0, 1}, {1, 2}});
  Eigen::MatrixXd expect(3, 3);
  expect << -1, 1, 0, 1, -2, 1, 0, 1, -1;
  EXPECT_EQ(laplacian(path), expect);
}

TEST(Laplacian, EdgelessAndRowSums) {
  EXPECT_EQ(laplacian(Network(4, {})), Eigen::MatrixXd::Zero(4, 4));
  const auto bn = benchmark_network(2);
  const auto lap = laplacian(bn.network);
  EXPECT_EQ(lap.rowwise().sum().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(lap, lap.transpose());
}

TEST(LeadingEigenvectors, DisjointTrianglesSpanIndicators) {
  const Network net(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}});
  const auto emb = leading_eigenvectors(laplacian(net), 2);
  EXPECT_NEAR(emb.values(0), 0.0, 1e-10);
  EXPECT_NEAR(emb.values(1), 0.0, 1e-10);
  Eigen::MatrixXd ind = Eigen::MatrixXd::Zero(6, 2);
  for (int i = 0; i < 3; ++i) ind(i, 0) = ind(i + 3, 1) = 1.0 / std::sqrt(3.0);
  const Eigen::MatrixXd residual = emb.vectors - ind * (ind.transpose() * emb.vectors);
  EXPECT_LT(residual.norm(), 1e-8);
}

TEST(LeadingEigenvectors, PathLeadingVectorIsConstant) {
  const auto emb = leading_eigenvectors(laplacian(Network(3, {{0, 1}, {1, 2}})), 1);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(emb.vectors(i, 0), 1.0 / std::sqrt(3.0), 1e-12);
}

TEST(LeadingEigenvectors, OrthonormalResidualAndSign) {
  const auto bn = benchmark_network(5);
  const auto lap = laplacian(bn.network);
  const auto emb = leading_eigenvectors(lap, 4);
  const Eigen::MatrixXd gram = emb.vectors.transpose() * emb.vectors;
  EXPECT_LT((gram - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-8);
  const double norm = lap.norm();
  for (Eigen::Index c = 0; c < 4; ++c) {
    const Eigen::VectorXd v = emb.vectors.col(c);
    EXPECT_LE((lap * v - emb.values(c) * v).norm(), 1e-8 * norm);
    EXPECT_GE(v.array().cube().sum(), 0.0);
    if (c > 0) {
      EXPECT_GE(emb.values(c - 1), emb.values(c));
    }
  }
  const auto skipped = leading_eigenvectors(lap, 3, true);
  for (Eigen::Index c = 0; c < 3; ++c) EXPECT_NEAR(skipped.values(c), emb.values(c + 1), 1e-9);
}

TEST(LeadingEigenvectors, CountOutOfRange) {
  const auto lap = laplacian(Network(3, {{0, 1}, {1, 2}}));
  EXPECT_THROW(leading_eigenvectors(lap, 0), std::invalid_argument);
  EXPECT_THROW(leading_eigenvectors(lap, 4), std::invalid_argument);
  EXPECT_THROW(leading_eigenvectors(lap, 3, true), std::invalid_argument);
  EXPECT_NO_THROW(leading_eigenvectors(lap, 3));
}

TEST(DetectCommunities, TriangleIsOneCommunity) {
  const Network tri(3, {{0, 1}, {1, 2}, {0, 2}});
  const auto r = detect_communities(tri, 2, EstimatorConfig{}, std::nullopt);
  ASSERT_EQ(r.communities.size(), 1u);
  EXPECT_EQ(r.communities[0].vertices, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_TRUE(r.transitional.empty());
  expect_consistent(tri, r);
}

TEST(DetectCommunities, SmallBarbellWithPermissiveTests) {
  EstimatorConfig c;
  c.bins = 2;
  c.chi_significance = 0.2;
  c.z_significance = 0.2;
  const auto net = complete_barbell(3);
  const auto r = detect_communities(net, 2, c, 2);
  ASSERT_EQ(r.communities.size(), 2u);
  auto sets = community_sets(r);
  std::sort(sets.begin(), sets.end());
  EXPECT_EQ(sets[0], (std::set<std::size_t>{0, 1, 2}));
  EXPECT_EQ(sets[1], (std::set<std::size_t>{3, 4, 5}));
  EXPECT_TRUE(r.transitional.empty());
}

TEST(DetectCommunities, LargeBarbellUnderDefaults) {
  const auto net = complete_barbell(20);
  const auto r = detect_communities(net, 2, EstimatorConfig{}, 2);
  ASSERT_EQ(r.communities.size(), 2u);
  expect_consistent(net, r);
  std::vector<int> truth(40);
  for (std::size_t v = 20; v < 40; ++v) truth[v] = 1;
  const double ari = adjusted_rand_index<int, int>(r.assignment, truth);
  EXPECT_GE(ari, 0.9);
}

TEST(DetectCommunities, BenchmarkRecoversGroups) {
  const auto bn = benchmark_network(1);
  EstimatorConfig c;
  c.seed = 1;
  const auto r = detect_communities(bn.network, 3, c, 3);
  ASSERT_EQ(r.communities.size(), 3u);
  expect_consistent(bn.network, r);
  const double ari = adjusted_rand_index<int, std::size_t>(r.assignment, bn.labels);
  EXPECT_GE(ari, 0.9);
  for (auto v : r.transitional) {
    std::set<int> touched;
    for (auto w : bn.network.neighbors(v))
      if (r.assignment[w] >= 0) touched.insert(r.assignment[w]);
    EXPECT_GE(touched.size(), 2u) << "vertex " << v;
  }
}

TEST(DetectCommunities, InvariantUnderRelabeling) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto bn = benchmark_network(seed);
    const std::size_t n = bn.network.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed * 101);
    for (std::size_t i = n; i-- > 1;) std::swap(perm[i], perm[rng.below(i + 1)]);
    std::vector<Network::Edge> moved;
    for (auto [u, v] : bn.network.edges()) moved.push_back({perm[u], perm[v]});
    EstimatorConfig c;
    c.seed = seed;
    const auto a = detect_communities(bn.network, 3, c, 3);
    const auto b = detect_communities(Network(n, moved), 3, c, 3);
    std::vector<int> pulled(n);
    for (std::size_t v = 0; v < n; ++v) pulled[v] = b.assignment[perm[v]];
    const double ari = adjusted_rand_index<int, int>(a.assignment, pulled);
    EXPECT_DOUBLE_EQ(ari, 1.0) << "seed " << seed;
    EXPECT_EQ(a.transitional.size(), b.transitional.size());
  }
}

TEST(DetectCommunities, Errors) {
  EXPECT_THROW(detect_communities(Network(2, {{0, 1}}), 1, EstimatorConfig{}, std::nullopt),
               std::invalid_argument);
  EXPECT_THROW(detect_communities(Network(4, {{0, 1}}), 5, EstimatorConfig{}, std::nullopt),
               std::invalid_argument);
}
