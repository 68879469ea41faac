#include <gtest/gtest.h>

#include <sstream>
#include <string>

#include "bpslt/estimator.hpp"
#include "bpslt/io.hpp"
#include "bpslt/rng.hpp"
#include "bpslt/sltree.hpp"

using namespace bpslt;

namespace {

PiecewiseDensity sample_estimate() {
  Rng rng(3);
  PointSet p(2);
  for (int i = 0; i < 3000; ++i) {
    const double x = rng.uniform() < 0.5 ? 0.2 + 0.1 * rng.uniform() : rng.uniform();
    p.push_back(std::vector<double>{x, rng.uniform() * rng.uniform()});
  }
  return estimate_density(p, unit_cube(2), EstimatorConfig{});
}

}  // namespace

TEST(JsonText, SortedKeysAndFullPrecision) {
  io::Json j;
  j["zeta"] = 0.1;
  j["alpha"] = {1, 2, 3};
  j["mid"] = {{"b", nullptr}, {"a", true}};
  const auto text = io::dump(j);
  EXPECT_LT(text.find("\"alpha\""), text.find("\"mid\""));
  EXPECT_LT(text.find("\"mid\""), text.find("\"zeta\""));
  EXPECT_LT(text.find("\"a\""), text.find("\"b\""));
  EXPECT_NE(text.find("0.10000000000000001"), std::string::npos);
  EXPECT_NE(text.find("[1, 2, 3]"), std::string::npos);
  EXPECT_EQ(io::Json::parse(text), j);
}

TEST(Csv, HeaderIsOptional) {
  std::istringstream plain("0.1,0.2\n0.3,0.4\n"), headed("x,y\n0.1,0.2\n\n0.3,0.4\n");
  const auto a = io::read_csv_points(plain);
  const auto b = io::read_csv_points(headed);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 2u);
  EXPECT_EQ(a.dim(), 2u);
}

TEST(Csv, Errors) {
  std::istringstream bad("1,2\n3,oops\n");
  try {
    io::read_csv_points(bad);
    FAIL() << "expected a parse error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2, column 2"), std::string::npos) << e.what();
  }
  std::istringstream ragged("1,2\n3\n"), empty(""), header_only("a,b\n");
  EXPECT_THROW(io::read_csv_points(ragged), DataError);
  EXPECT_THROW(io::read_csv_points(empty), DataError);
  EXPECT_THROW(io::read_csv_points(header_only), DataError);
}

TEST(Csv, RoundTrip) {
  const PointSet p(3, {0.1, 1e-300, -3.25, 1.0 / 3.0, 2.0, 7e10});
  std::istringstream in(io::format_csv(p));
  EXPECT_EQ(io::read_csv_points(in), p);
}

TEST(EdgeList, LabelsCountAndBase) {
  std::istringstream in("# vertices 5\n# 1 SN100\n# 3 Beak\n1 2\n2 3\n3 3\n5 1\n");
  const auto data = io::read_edge_list(in, true);
  EXPECT_EQ(data.network.size(), 5u);
  EXPECT_EQ(data.network.edges(), (std::vector<Network::Edge>{{0, 1}, {0, 4}, {1, 2}}));
  EXPECT_EQ(data.network.label(0), "SN100");
  EXPECT_EQ(data.network.label(2), "Beak");
  EXPECT_EQ(data.network.label(1), "2");
  ASSERT_EQ(data.warnings.size(), 1u);
  EXPECT_NE(data.warnings[0].find("line 6"), std::string::npos);

  std::istringstream again(io::format_edge_list(data.network, true));
  const auto round = io::read_edge_list(again, true);
  EXPECT_EQ(round.network.edges(), data.network.edges());
  EXPECT_EQ(round.network.labels(), data.network.labels());
}

TEST(EdgeList, OutOfRangeNamesTheLine) {
  std::istringstream in("# vertices 3\n0 1\n1 3\n");
  try {
    io::read_edge_list(in);
    FAIL() << "expected an out-of-range error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  std::istringstream zero("0 1\n");
  EXPECT_THROW(io::read_edge_list(zero, true), DataError);
  std::istringstream junk("0 x\n");
  EXPECT_THROW(io::read_edge_list(junk), DataError);
  std::istringstream nothing("# only a comment\n");
  EXPECT_THROW(io::read_edge_list(nothing), DataError);
}

TEST(PartitionJson, RoundTripIsLossless) {
  const auto pd = sample_estimate();
  ASSERT_GT(pd.leaves().size(), 3u);
  const auto text = io::dump(io::partition_to_json(pd));
  const auto back = io::partition_from_json(io::Json::parse(text));
  EXPECT_EQ(io::dump(io::partition_to_json(back)), text);
  ASSERT_EQ(back.leaves().size(), pd.leaves().size());
  for (std::size_t i = 0; i < pd.leaves().size(); ++i) {
    EXPECT_EQ(back.leaves()[i].mass, pd.leaves()[i].mass);
    EXPECT_EQ(back.leaves()[i].lower, pd.leaves()[i].lower);
  }
  EXPECT_EQ(back.config(), pd.config());

  // The same sub-level tree either way.
  const auto a = build_hierarchy(pd);
  const auto b = build_hierarchy(back);
  EXPECT_EQ(io::dump(io::sltree_to_json(a.tree, a.graph)), io::dump(io::sltree_to_json(b.tree, b.graph)));
  EXPECT_EQ(export_dot(a.tree), export_dot(b.tree));
}

TEST(PartitionJson, MissingFieldIsNamed) {
  auto j = io::partition_to_json(sample_estimate());
  j["nodes"][0].erase("upper");
  try {
    io::partition_from_json(j);
    FAIL() << "expected a schema error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("'upper'"), std::string::npos) << e.what();
  }
  auto k = io::partition_to_json(sample_estimate());
  k["config"].erase("alpha");
  EXPECT_THROW(io::partition_from_json(k), DataError);
  auto w = io::partition_to_json(sample_estimate());
  w["config"]["bins"] = "three";
  EXPECT_THROW(io::partition_from_json(w), DataError);
}

TEST(ConfigJson, RoundTrip) {
  EstimatorConfig c;
  c.subsample = std::nullopt;
  c.seed = 123456789012345ULL;
  c.alpha = 0.25;
  EXPECT_EQ(io::config_from_json(io::to_json(c)), c);
}
