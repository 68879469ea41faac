// bpslt: binary-partition density estimation and sub-level trees.
//
//   bpslt estimate    --in points.csv --out DIR
//   bpslt sltree      --in partition.json|points.csv --out DIR [--trim L] [--branches K|auto]
//   bpslt communities --in edges.txt --out DIR --k K [--skip-first] [--one-based]
//   bpslt simulate    --kind mixture|network --out DIR [--n N] [--rotate]
//   bpslt replay      --manifest DIR/manifest.json --out DIR2
//
// Every run writes manifest.json next to its outputs; `replay` re-runs it.
// Exit codes: 0 ok, 2 usage, 3 data, 4 numerical.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bpslt/datagen.hpp"
#include "bpslt/error.hpp"
#include "bpslt/estimator.hpp"
#include "bpslt/io.hpp"
#include "bpslt/regiongraph.hpp"
#include "bpslt/sltree.hpp"
#include "bpslt/spectral.hpp"

namespace fs = std::filesystem;
using namespace bpslt;
using io::Json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  std::string command;
  std::string input;
  std::string out = ".";

  // estimator
  std::size_t bins = 3;
  double alpha = 0.5;
  double chi_sig = 1e-3;
  double z_sig = 1e-3;
  std::string subsample = "500";
  std::size_t max_depth = 30;
  std::uint64_t seed = 0;
  bool unit_domain = false;

  // sltree / communities
  std::size_t trim = 0;
  std::string branches;  // "", "auto" or an integer
  std::optional<double> min_persistence;
  std::string k_rule = "persistence";

  // communities
  std::size_t k = 2;
  bool skip_first = false;
  bool one_based = false;

  // simulate
  std::string kind;
  std::size_t n = 50000;
  bool rotate = false;

  EstimatorConfig estimator() const {
    EstimatorConfig c;
    c.bins = bins;
    c.alpha = alpha;
    c.chi_significance = chi_sig;
    c.z_significance = z_sig;
    if (subsample == "none" || subsample == "0") {
      c.subsample = std::nullopt;
    } else {
      try {
        std::size_t used = 0;
        c.subsample = std::stoul(subsample, &used);
        if (used != subsample.size()) throw std::invalid_argument(subsample);
      } catch (const std::exception&) {
        throw UsageError("--subsample expects an integer or 'none', got '" + subsample + "'");
      }
    }
    c.max_depth = max_depth;
    c.seed = seed;
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return c;
  }

  // nullopt means auto
  std::optional<std::size_t> branch_count(std::optional<std::size_t> fallback) const {
    if (branches.empty()) return fallback;
    if (branches == "auto") return std::nullopt;
    try {
      std::size_t used = 0;
      const auto v = std::stoul(branches, &used);
      if (used != branches.size() || v == 0) throw std::invalid_argument(branches);
      return v;
    } catch (const std::exception&) {
      throw UsageError("--branches expects a positive integer or 'auto', got '" + branches + "'");
    }
  }

  BranchCountRule count_rule() const {
    if (k_rule == "persistence") return BranchCountRule::most_persistent;
    if (k_rule == "count") return BranchCountRule::last_count;
    throw UsageError("--k-rule expects 'persistence' or 'count'");
  }

  Json to_json() const {
    Json j;
    j["command"] = command;
    j["input"] = input;
    j["bins"] = bins;
    j["alpha"] = alpha;
    j["chi_sig"] = chi_sig;
    j["z_sig"] = z_sig;
    j["subsample"] = subsample;
    j["max_depth"] = max_depth;
    j["seed"] = seed;
    j["unit_domain"] = unit_domain;
    j["trim"] = trim;
    j["branches"] = branches;
    j["min_persistence"] = min_persistence ? Json(*min_persistence) : Json(nullptr);
    j["k_rule"] = k_rule;
    j["k"] = k;
    j["skip_first"] = skip_first;
    j["one_based"] = one_based;
    j["kind"] = kind;
    j["n"] = n;
    j["rotate"] = rotate;
    return j;
  }

  static RunOptions from_json(const Json& j) {
    constexpr std::string_view ctx = "manifest options";
    RunOptions o;
    o.command = io::require_as<std::string>(j, "command", ctx);
    o.input = io::require_as<std::string>(j, "input", ctx);
    o.bins = io::require_as<std::size_t>(j, "bins", ctx);
    o.alpha = io::require_as<double>(j, "alpha", ctx);
    o.chi_sig = io::require_as<double>(j, "chi_sig", ctx);
    o.z_sig = io::require_as<double>(j, "z_sig", ctx);
    o.subsample = io::require_as<std::string>(j, "subsample", ctx);
    o.max_depth = io::require_as<std::size_t>(j, "max_depth", ctx);
    o.seed = io::require_as<std::uint64_t>(j, "seed", ctx);
    o.unit_domain = io::require_as<bool>(j, "unit_domain", ctx);
    o.trim = io::require_as<std::size_t>(j, "trim", ctx);
    o.branches = io::require_as<std::string>(j, "branches", ctx);
    const Json& mp = io::require(j, "min_persistence", ctx);
    if (!mp.is_null()) o.min_persistence = io::require_as<double>(j, "min_persistence", ctx);
    o.k_rule = io::require_as<std::string>(j, "k_rule", ctx);
    o.k = io::require_as<std::size_t>(j, "k", ctx);
    o.skip_first = io::require_as<bool>(j, "skip_first", ctx);
    o.one_based = io::require_as<bool>(j, "one_based", ctx);
    o.kind = io::require_as<std::string>(j, "kind", ctx);
    o.n = io::require_as<std::size_t>(j, "n", ctx);
    o.rotate = io::require_as<bool>(j, "rotate", ctx);
    return o;
  }
};

std::string out_path(const RunOptions& o, const std::string& name) {
  return (fs::path(o.out) / name).string();
}

void write_manifest(const RunOptions& o, const std::vector<std::string>& outputs) {
  Json m;
  m["format"] = "bpslt.manifest.v1";
  m["options"] = o.to_json();
  m["outputs"] = outputs;
  io::write_text(out_path(o, "manifest.json"), io::dump(m));
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

PiecewiseDensity estimate_from_csv(const RunOptions& o) {
  const auto config = o.estimator();
  const auto points = io::read_csv_points(o.input);
  const Region domain = o.unit_domain ? unit_cube(points.dim()) : bounding_box(points, 0.01);
  return estimate_density(points, domain, config);
}

std::vector<std::string> run_estimate(const RunOptions& o) {
  const auto pd = estimate_from_csv(o);
  io::write_text(out_path(o, "partition.json"), io::dump(io::partition_to_json(pd)));
  return {"partition.json"};
}

std::vector<std::string> run_sltree(const RunOptions& o) {
  const auto k = o.branch_count(std::nullopt);
  const auto rule = o.count_rule();
  PiecewiseDensity pd = ends_with(o.input, ".json")
                            ? io::partition_from_json(Json::parse(io::read_text(o.input)))
                            : estimate_from_csv(o);
  if (o.trim > 0) pd = trim(pd, o.trim);
  const auto h = build_hierarchy(std::move(pd));
  const double min_persistence = o.min_persistence.value_or(default_min_persistence(h.graph));
  const auto branches = extract_branches(h.tree, h.graph, k, min_persistence, rule);

  Json j = io::sltree_to_json(h.tree, h.graph);
  j["branches"] = io::branches_to_json(branches, k ? std::nullopt : std::optional(min_persistence));
  j["trim"] = o.trim;
  io::write_text(out_path(o, "sltree.json"), io::dump(j));
  io::write_text(out_path(o, "sltree.dot"), export_dot(h.tree, h.graph.virtual_id()));
  return {"sltree.dot", "sltree.json"};
}

std::vector<std::string> run_communities(const RunOptions& o) {
  const auto config = o.estimator();
  const auto branch_k = o.branch_count(o.k);
  auto data = io::read_edge_list(o.input, o.one_based);
  for (const auto& w : data.warnings) std::cerr << "warning: " << w << "\n";
  CommunityOptions opts;
  opts.skip_first = o.skip_first;
  opts.min_persistence = o.min_persistence;
  opts.branch_rule = o.count_rule();
  const auto result = detect_communities(data.network, o.k, config, branch_k, opts);

  Json j = io::communities_to_json(data.network, result);
  j["one_based"] = o.one_based;
  io::write_text(out_path(o, "communities.json"), io::dump(j));
  std::vector<std::string> outputs{"communities.json"};
  if (result.hierarchy) {
    io::write_text(out_path(o, "sltree.dot"),
                   export_dot(result.hierarchy->tree, result.hierarchy->graph.virtual_id()));
    outputs.push_back("sltree.dot");
  }
  return outputs;
}

std::string labels_csv(const std::vector<std::size_t>& labels) {
  std::string s = "label\n";
  for (auto l : labels) s += std::to_string(l) + "\n";
  return s;
}

std::vector<std::string> run_simulate(const RunOptions& o) {
  if (o.kind == "mixture") {
    if (o.n == 0) throw UsageError("--n must be positive");
    auto sample = sample_mixture(reference_mixture_spec(), o.n, o.seed);
    const PointSet points = o.rotate ? rotate_translate(sample.points, o.seed + 1) : sample.points;
    io::write_text(out_path(o, "points.csv"), io::format_csv(points));
    io::write_text(out_path(o, "labels.csv"), labels_csv(sample.labels));
    return {"labels.csv", "points.csv"};
  }
  if (o.kind == "network") {
    const auto bn = benchmark_network(o.seed);
    io::write_text(out_path(o, "network.txt"), io::format_edge_list(bn.network, o.one_based));
    io::write_text(out_path(o, "labels.csv"), labels_csv(bn.labels));
    return {"labels.csv", "network.txt"};
  }
  throw UsageError("--kind must be 'mixture' or 'network', got '" + o.kind + "'");
}

void run(RunOptions o) {
  fs::create_directories(o.out);
  std::vector<std::string> outputs;
  if (o.command == "estimate") outputs = run_estimate(o);
  else if (o.command == "sltree") outputs = run_sltree(o);
  else if (o.command == "communities") outputs = run_communities(o);
  else if (o.command == "simulate") outputs = run_simulate(o);
  else throw UsageError("unknown command '" + o.command + "'");
  write_manifest(o, outputs);
}

void add_estimator_flags(CLI::App* app, RunOptions& o) {
  app->add_option("--bins", o.bins, "bins per dimension for the chi-square tests")->capture_default_str();
  app->add_option("--alpha", o.alpha, "Laplace pseudo-count")->capture_default_str();
  app->add_option("--chi-sig", o.chi_sig, "chi-square significance")->capture_default_str();
  app->add_option("--z-sig", o.z_sig, "discrepancy test significance")->capture_default_str();
  app->add_option("--subsample", o.subsample, "discrepancy subsample size or 'none'")->capture_default_str();
  app->add_option("--max-depth", o.max_depth, "maximum partition depth")->capture_default_str();
  app->add_option("--seed", o.seed, "seed for subsampling and simulation")->capture_default_str();
  app->add_flag("--unit-domain", o.unit_domain, "use [0,1)^d instead of the padded bounding box");
}

void add_branch_flags(CLI::App* app, RunOptions& o) {
  app->add_option("--branches", o.branches, "branch count K or 'auto'");
  app->add_option("--min-persistence", o.min_persistence,
                  "persistence threshold for --branches auto (default 5% of max density)");
  app->add_option("--k-rule", o.k_rule, "how K branches are chosen: persistence or count")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binary-partition density estimation and sub-level trees"};
  app.require_subcommand(1);
  RunOptions o;
  std::string manifest;

  auto* est = app.add_subcommand("estimate", "estimate a piecewise-constant density from CSV points");
  est->add_option("--in", o.input, "CSV of points")->required();
  est->add_option("--out", o.out, "output directory")->capture_default_str();
  add_estimator_flags(est, o);

  auto* slt = app.add_subcommand("sltree", "build the sub-level tree of a partition");
  slt->add_option("--in", o.input, "partition.json or CSV of points")->required();
  slt->add_option("--out", o.out, "output directory")->capture_default_str();
  slt->add_option("--trim", o.trim, "collapse the deepest L partition levels first")->capture_default_str();
  add_estimator_flags(slt, o);
  add_branch_flags(slt, o);

  auto* com = app.add_subcommand("communities", "spectral sub-level-tree communities of a network");
  com->add_option("--in", o.input, "edge list")->required();
  com->add_option("--out", o.out, "output directory")->capture_default_str();
  com->add_option("--k", o.k, "number of leading Laplacian eigenvectors")->capture_default_str();
  com->add_flag("--skip-first", o.skip_first, "drop the leading (constant) eigenvector");
  com->add_flag("--one-based", o.one_based, "vertex ids in the edge list start at 1");
  add_estimator_flags(com, o);
  add_branch_flags(com, o);

  auto* sim = app.add_subcommand("simulate", "generate the mixture sample or the benchmark network");
  sim->add_option("--kind", o.kind, "mixture or network")->required();
  sim->add_option("--out", o.out, "output directory")->capture_default_str();
  sim->add_option("--n", o.n, "mixture sample size")->capture_default_str();
  sim->add_option("--seed", o.seed, "generator seed")->capture_default_str();
  sim->add_flag("--rotate", o.rotate, "apply a seeded random rotation and translation");
  sim->add_flag("--one-based", o.one_based, "write 1-based vertex ids");

  auto* rep = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  rep->add_option("--manifest", manifest, "manifest.json")->required();
  rep->add_option("--out", o.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    auto* sub = app.get_subcommands().front();
    if (sub == rep) {
      const auto j = Json::parse(io::read_text(manifest));
      auto replayed = RunOptions::from_json(io::require(j, "options", "manifest"));
      replayed.out = o.out;
      run(std::move(replayed));
    } else {
      o.command = sub->get_name();
      run(o);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const Json::exception& e) {
    std::cerr << "data error: malformed JSON: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
