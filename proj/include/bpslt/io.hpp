#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "bpslt/error.hpp"
#include "bpslt/estimator.hpp"
#include "bpslt/geometry.hpp"
#include "bpslt/network.hpp"
#include "bpslt/sltree.hpp"
#include "bpslt/spectral.hpp"

namespace bpslt::io {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// JSON text: keys sorted, doubles with 17 significant digits, arrays of
// scalars on one line.

namespace detail {

inline void write_scalar(std::ostream& os, const Json& j) {
  switch (j.type()) {
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        os << "null";
        return;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << buf;
      return;
    }
    default:
      os << j.dump();
  }
}

inline bool is_flat(const Json& j) {
  for (const auto& e : j)
    if (e.is_structured()) return false;
  return true;
}

inline void write(std::ostream& os, const Json& j, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  if (j.is_object()) {
    if (j.empty()) {
      os << "{}";
      return;
    }
    os << "{\n";
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!first) os << ",\n";
      first = false;
      os << inner << Json(it.key()).dump() << ": ";
      write(os, it.value(), indent + 1);
    }
    os << "\n" << pad << "}";
  } else if (j.is_array()) {
    if (j.empty()) {
      os << "[]";
      return;
    }
    if (is_flat(j)) {
      os << "[";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << ", ";
        write_scalar(os, j[i]);
      }
      os << "]";
      return;
    }
    os << "[\n";
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (i) os << ",\n";
      os << inner;
      write(os, j[i], indent + 1);
    }
    os << "\n" << pad << "]";
  } else {
    write_scalar(os, j);
  }
}

}  // namespace detail

inline std::string dump(const Json& j) {
  std::ostringstream os;
  detail::write(os, j, 0);
  os << "\n";
  return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw DataError("failed writing " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline const Json& require(const Json& j, const char* key, std::string_view context) {
  if (!j.is_object() || !j.contains(key))
    throw DataError(std::string(context) + ": missing field '" + key + "'");
  return j.at(key);
}

template <typename T>
T require_as(const Json& j, const char* key, std::string_view context) {
  const Json& v = require(j, key, context);
  try {
    return v.get<T>();
  } catch (const Json::exception&) {
    throw DataError(std::string(context) + ": field '" + key + "' has the wrong type");
  }
}

// ---------------------------------------------------------------------------
// CSV points

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

/// Comma-separated numeric rows. A first row containing any non-numeric
/// cell is treated as a header and skipped. Blank lines are ignored.
inline PointSet read_csv_points(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  bool first_row = true;
  PointSet points;
  std::vector<double> row;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(line, ',');
    row.clear();
    std::optional<std::size_t> bad_column;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      auto v = detail::parse_double(cells[c]);
      if (!v) {
        bad_column = c;
        break;
      }
      row.push_back(*v);
    }
    if (first_row) {
      first_row = false;
      dim = cells.size();
      points = PointSet(dim);
      if (bad_column) continue;  // header
    }
    if (bad_column)
      throw DataError("non-numeric value at row " + std::to_string(line_no) + ", column " +
                      std::to_string(*bad_column + 1));
    if (row.size() != dim)
      throw DataError("row " + std::to_string(line_no) + " has " + std::to_string(row.size()) +
                      " columns, expected " + std::to_string(dim));
    points.push_back(row);
  }
  if (points.empty()) throw DataError("no data rows in CSV input");
  return points;
}

inline PointSet read_csv_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_csv_points(in);
}

inline std::string format_csv(const PointSet& points) {
  std::string out;
  char buf[40];
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < points.dim(); ++j) {
      if (j) out += ',';
      std::snprintf(buf, sizeof buf, "%.17g", points.at(i, j));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Edge lists
//
//   # vertices 62        optional; fixes the vertex count
//   # 12 SN100           optional vertex label (same base as the edges)
//   12 37                one undirected edge per line
//
// Other '#' lines are comments. Self-loops are dropped with a warning.

struct EdgeListData {
  Network network;
  std::vector<std::string> warnings;
};

inline EdgeListData read_edge_list(std::istream& in, bool one_based = false) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> declared;
  std::map<std::size_t, std::string> names;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::string> warnings;
  std::size_t max_id = 0;
  bool any_vertex = false;

  auto parse_id = [&](std::string_view tok) -> std::size_t {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
      throw DataError("line " + std::to_string(line_no) + ": '" + std::string(tok) +
                      "' is not an integer vertex id");
    const long long base = one_based ? 1 : 0;
    if (v < base)
      throw DataError("line " + std::to_string(line_no) + ": vertex id " + std::to_string(v) +
                      " out of range");
    const auto id = static_cast<std::size_t>(v - base);
    if (declared && id >= *declared)
      throw DataError("line " + std::to_string(line_no) + ": vertex id " + std::to_string(v) +
                      " out of range (" + std::to_string(*declared) + " vertices)");
    max_id = std::max(max_id, id);
    any_vertex = true;
    return id;
  };

  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok[0][0] == '#') {
      if (tok[0].size() > 1) tok[0].erase(0, 1);
      else tok.erase(tok.begin());
      if (tok.size() == 2 && tok[0] == "vertices") {
        std::size_t n = 0;
        auto [ptr, ec] = std::from_chars(tok[1].data(), tok[1].data() + tok[1].size(), n);
        if (ec != std::errc() || ptr != tok[1].data() + tok[1].size() || n == 0)
          throw DataError("line " + std::to_string(line_no) + ": bad vertex count");
        declared = n;
      } else if (tok.size() >= 2 && std::isdigit(static_cast<unsigned char>(tok[0][0]))) {
        const auto id = parse_id(tok[0]);
        std::string name = tok[1];
        for (std::size_t i = 2; i < tok.size(); ++i) name += " " + tok[i];
        names[id] = name;
      }
      continue;
    }
    if (tok.size() < 2)
      throw DataError("line " + std::to_string(line_no) + ": expected two vertex ids");
    const auto u = parse_id(tok[0]);
    const auto v = parse_id(tok[1]);
    if (u == v) {
      warnings.push_back("line " + std::to_string(line_no) + ": self-loop at vertex " + tok[0] +
                         " dropped");
      continue;
    }
    edges.emplace_back(u, v);
  }
  const std::size_t n = declared.value_or(any_vertex ? max_id + 1 : 0);
  if (n == 0) throw DataError("edge list contains no vertices");
  std::vector<std::string> labels;
  if (!names.empty()) {
    labels.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
      auto it = names.find(v);
      labels[v] = it != names.end() ? it->second : std::to_string(v + (one_based ? 1 : 0));
    }
  }
  return {Network(n, std::move(edges), std::move(labels)), std::move(warnings)};
}

inline EdgeListData read_edge_list(const std::string& path, bool one_based = false) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_edge_list(in, one_based);
}

inline std::string format_edge_list(const Network& net, bool one_based = false) {
  const std::size_t base = one_based ? 1 : 0;
  std::ostringstream os;
  os << "# vertices " << net.size() << "\n";
  if (!net.labels().empty())
    for (std::size_t v = 0; v < net.size(); ++v) os << "# " << v + base << " " << net.label(v) << "\n";
  for (auto [u, v] : net.edges()) os << u + base << " " << v + base << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Partitions

inline Json to_json(const EstimatorConfig& c) {
  Json j;
  j["alpha"] = c.alpha;
  j["bins"] = c.bins;
  j["chi_significance"] = c.chi_significance;
  j["z_significance"] = c.z_significance;
  j["subsample"] = c.subsample ? Json(*c.subsample) : Json(nullptr);
  j["max_depth"] = c.max_depth;
  j["seed"] = c.seed;
  return j;
}

inline EstimatorConfig config_from_json(const Json& j) {
  constexpr std::string_view ctx = "estimator config";
  EstimatorConfig c;
  c.alpha = require_as<double>(j, "alpha", ctx);
  c.bins = require_as<std::size_t>(j, "bins", ctx);
  c.chi_significance = require_as<double>(j, "chi_significance", ctx);
  c.z_significance = require_as<double>(j, "z_significance", ctx);
  const Json& sub = require(j, "subsample", ctx);
  if (sub.is_null()) c.subsample = std::nullopt;
  else c.subsample = require_as<std::size_t>(j, "subsample", ctx);
  c.max_depth = require_as<std::size_t>(j, "max_depth", ctx);
  c.seed = require_as<std::uint64_t>(j, "seed", ctx);
  return c;
}

namespace detail {
inline Json id_or_null(RegionId id) { return id == kNoRegion ? Json(nullptr) : Json(id); }
inline RegionId id_from(const Json& j) { return j.is_null() ? kNoRegion : j.get<RegionId>(); }
}  // namespace detail

inline Json partition_to_json(const PiecewiseDensity& pd) {
  const auto& tree = pd.tree();
  Json j;
  j["format"] = "bpslt.partition.v1";
  j["dim"] = pd.dim();
  j["config"] = to_json(pd.config());
  j["domain"] = {{"lower", pd.domain().lower}, {"upper", pd.domain().upper}};

  Json leaves = Json::array();
  for (const auto& r : pd.leaves()) {
    leaves.push_back({{"id", r.id},
                      {"lower", r.lower},
                      {"upper", r.upper},
                      {"mass", r.mass},
                      {"density", r.density},
                      {"depth", r.depth},
                      {"parent", detail::id_or_null(tree.node(r.id).parent)}});
  }
  j["leaves"] = std::move(leaves);

  Json nodes = Json::array();
  Json edges = Json::array();
  for (const auto& n : tree.nodes()) {
    Json node{{"id", n.region.id},
              {"lower", n.region.lower},
              {"upper", n.region.upper},
              {"mass", n.region.mass},
              {"depth", n.region.depth},
              {"parent", detail::id_or_null(n.parent)},
              {"left", detail::id_or_null(n.left)},
              {"right", detail::id_or_null(n.right)}};
    if (n.is_leaf()) {
      node["split_dim"] = nullptr;
      node["split_at"] = nullptr;
    } else {
      node["split_dim"] = n.split_dim;
      node["split_at"] = n.split_at;
      edges.push_back({n.region.id, n.left});
      edges.push_back({n.region.id, n.right});
    }
    nodes.push_back(std::move(node));
  }
  j["nodes"] = std::move(nodes);
  j["edges"] = std::move(edges);
  return j;
}

inline PiecewiseDensity partition_from_json(const Json& j) {
  constexpr std::string_view ctx = "partition JSON";
  const auto config = config_from_json(require(j, "config", ctx));
  const Json& nodes = require(j, "nodes", ctx);
  if (!nodes.is_array() || nodes.empty()) throw DataError("partition JSON: 'nodes' must be a non-empty array");
  PartitionTree tree;
  for (const auto& nj : nodes) {
    constexpr std::string_view nctx = "partition JSON node";
    PartitionNode n;
    n.region = make_region(require_as<RegionId>(nj, "id", nctx),
                           require_as<std::vector<double>>(nj, "lower", nctx),
                           require_as<std::vector<double>>(nj, "upper", nctx),
                           require_as<std::size_t>(nj, "depth", nctx));
    n.region.set_mass(require_as<double>(nj, "mass", nctx));
    n.parent = detail::id_from(require(nj, "parent", nctx));
    n.left = detail::id_from(require(nj, "left", nctx));
    n.right = detail::id_from(require(nj, "right", nctx));
    if (!n.is_leaf()) {
      n.split_dim = require_as<std::size_t>(nj, "split_dim", nctx);
      n.split_at = require_as<double>(nj, "split_at", nctx);
    }
    tree.append(std::move(n));
  }
  return PiecewiseDensity(std::move(tree), config);
}

// ---------------------------------------------------------------------------
// Sub-level trees

inline Json branches_to_json(const BranchDecomposition& b, std::optional<double> min_persistence) {
  Json items = Json::array();
  for (const auto& br : b.branches) {
    items.push_back({{"leaf", br.leaf},
                     {"members", br.members},
                     {"birth_density", br.birth_density},
                     {"merge_density", br.merge_density},
                     {"persistence", br.persistence()}});
  }
  return {{"requested", b.requested ? Json(*b.requested) : Json(nullptr)},
          {"min_persistence", min_persistence ? Json(*min_persistence) : Json(nullptr)},
          {"items", std::move(items)},
          {"unassigned", b.unassigned}};
}

inline Json sltree_to_json(const SubLevelTree& t, const RegionGraph& g) {
  std::vector<std::size_t> rank(t.size());
  for (std::size_t s = 0; s < t.insertion_order.size(); ++s) rank[t.insertion_order[s]] = s;
  std::vector<std::size_t> order(t.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return t.ids[a] < t.ids[b]; });

  Json nodes = Json::array();
  for (auto i : order) {
    nodes.push_back({{"id", t.ids[i]},
                     {"parent", t.parent[i] == kNoNode ? Json(nullptr) : Json(t.ids[t.parent[i]])},
                     {"color", t.color[i]},
                     {"density", t.densities[i]},
                     {"insertion_rank", rank[i]},
                     {"virtual", g.virtual_index && *g.virtual_index == i}});
  }
  Json insertion = Json::array();
  for (auto i : t.insertion_order) insertion.push_back(t.ids[i]);
  Json events = Json::array();
  for (const auto& e : t.merge_events)
    events.push_back({{"step", e.step}, {"region", e.region}, {"absorbed", e.absorbed}});

  Json j;
  j["format"] = "bpslt.sltree.v1";
  j["nodes"] = std::move(nodes);
  j["insertion_order"] = std::move(insertion);
  j["merge_events"] = std::move(events);
  j["virtual_region"] = g.virtual_id() ? Json(*g.virtual_id()) : Json(nullptr);
  j["graph_edges"] = g.edge_count();
  return j;
}

// ---------------------------------------------------------------------------
// Communities

inline Json communities_to_json(const Network& net, const CommunityResult& r) {
  Json vertices = Json::array();
  for (std::size_t v = 0; v < net.size(); ++v) {
    const int a = r.assignment[v];
    vertices.push_back({{"id", v},
                        {"label", net.label(v)},
                        {"community", a >= 0 ? Json(a) : Json(nullptr)},
                        {"transitional", a == kTransitional},
                        {"region", r.vertex_region.empty() ? Json(nullptr) : Json(r.vertex_region[v])}});
  }
  Json communities = Json::array();
  for (std::size_t c = 0; c < r.communities.size(); ++c) {
    const auto& com = r.communities[c];
    communities.push_back({{"index", c},
                           {"size", com.vertices.size()},
                           {"cohesion", com.cohesion},
                           {"branch_leaf", com.branch_leaf},
                           {"vertices", com.vertices}});
  }
  Json transitional = Json::array();
  for (auto v : r.transitional) {
    Json counts = Json::object();
    for (auto w : net.neighbors(v)) {
      const int a = r.assignment[w];
      if (a < 0) continue;
      const std::string key = std::to_string(a);
      counts[key] = counts.value(key, 0) + 1;
    }
    transitional.push_back({{"id", v}, {"label", net.label(v)}, {"community_edges", counts}});
  }
  Json j;
  j["format"] = "bpslt.communities.v1";
  j["vertices"] = std::move(vertices);
  j["communities"] = std::move(communities);
  j["transitional"] = std::move(transitional);
  j["embedding_columns"] = r.estimation_columns;
  return j;
}

}  // namespace bpslt::io
