#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bpslt/error.hpp"
#include "bpslt/geometry.hpp"
#include "bpslt/network.hpp"
#include "bpslt/rng.hpp"

namespace bpslt {

/// Gaussian mixture sum_i pi_i N(mu_i, Sigma) with a shared covariance.
struct MixtureSpec {
  std::vector<double> weights;
  std::vector<std::vector<double>> means;
  Eigen::MatrixXd covariance;

  std::size_t dim() const { return static_cast<std::size_t>(covariance.rows()); }
};

// Four equally weighted components in R^10, unit variances, 0.1 correlation
// between neighbouring coordinates.
inline MixtureSpec reference_mixture_spec() {
  constexpr std::size_t d = 10;
  MixtureSpec spec;
  spec.weights = {0.25, 0.25, 0.25, 0.25};
  spec.means.assign(4, std::vector<double>(d, 0.0));
  spec.means[0][0] = 2.0;
  spec.means[0][1] = 2.0;
  spec.means[1][0] = -2.0;
  spec.means[1][1] = 2.0;
  spec.means[2][1] = -2.0;
  spec.means[2][2] = 2.0;
  spec.means[3][1] = -2.0;
  spec.means[3][2] = -2.0;
  spec.covariance = Eigen::MatrixXd::Identity(d, d);
  for (std::size_t j = 0; j + 1 < d; ++j) {
    spec.covariance(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j + 1)) = 0.1;
    spec.covariance(static_cast<Eigen::Index>(j + 1), static_cast<Eigen::Index>(j)) = 0.1;
  }
  return spec;
}

struct LabeledPoints {
  PointSet points;
  std::vector<std::size_t> labels;
};

/// Draw order per point: one uniform for the component, then d standard
/// normals (Box-Muller pairs) mapped through the lower Cholesky factor.
inline LabeledPoints sample_mixture(const MixtureSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample size must be positive");
  const std::size_t d = spec.dim();
  if (spec.weights.size() != spec.means.size() || spec.weights.empty())
    throw std::invalid_argument("mixture needs one mean per weight");
  for (const auto& mu : spec.means)
    if (mu.size() != d) throw DimensionMismatch(d, mu.size());
  double total = 0.0;
  for (auto w : spec.weights) {
    if (w < 0.0) throw std::invalid_argument("mixture weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("mixture weights must sum to 1");

  Eigen::LLT<Eigen::MatrixXd> llt(spec.covariance);
  if (llt.info() != Eigen::Success || !spec.covariance.isApprox(spec.covariance.transpose()))
    throw NumericalError("mixture covariance is not symmetric positive definite");
  const Eigen::MatrixXd lower = llt.matrixL();

  Rng rng(seed);
  LabeledPoints out{PointSet(d), {}};
  out.points.reserve(n);
  out.labels.reserve(n);
  Eigen::VectorXd z(static_cast<Eigen::Index>(d));
  std::vector<double> x(d);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    std::size_t c = 0;
    double acc = spec.weights[0];
    while (u >= acc && c + 1 < spec.weights.size()) acc += spec.weights[++c];
    for (auto& zj : z) zj = rng.normal();
    const Eigen::VectorXd y = lower * z;
    for (std::size_t j = 0; j < d; ++j) x[j] = spec.means[c][j] + y(static_cast<Eigen::Index>(j));
    out.points.push_back(x);
    out.labels.push_back(c);
  }
  return out;
}

struct RigidMotion {
  Eigen::MatrixXd rotation;     // orthogonal
  Eigen::VectorXd translation;

  PointSet apply(const PointSet& points) const { return transform(points, false); }
  PointSet invert(const PointSet& points) const { return transform(points, true); }

 private:
  PointSet transform(const PointSet& points, bool inverse) const {
    const auto d = static_cast<Eigen::Index>(points.dim());
    if (rotation.rows() != d) throw DimensionMismatch(static_cast<std::size_t>(rotation.rows()), points.dim());
    PointSet out(points.dim());
    out.reserve(points.size());
    Eigen::VectorXd x(d), y(d);
    std::vector<double> row(points.dim());
    for (std::size_t i = 0; i < points.size(); ++i) {
      for (Eigen::Index j = 0; j < d; ++j) x(j) = points.at(i, static_cast<std::size_t>(j));
      y = inverse ? Eigen::VectorXd(rotation.transpose() * (x - translation))
                  : Eigen::VectorXd(rotation * x + translation);
      for (Eigen::Index j = 0; j < d; ++j) row[static_cast<std::size_t>(j)] = y(j);
      out.push_back(row);
    }
    return out;
  }
};

/// Haar-random rotation (QR of a Gaussian matrix, columns sign-corrected so
/// R has a positive diagonal) and a translation uniform on [-5, 5]^d.
inline RigidMotion random_rigid_motion(std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = 0; r < n; ++r) g(r, c) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < n; ++c)
    if (r(c, c) < 0.0) q.col(c) *= -1.0;
  Eigen::VectorXd t(n);
  for (Eigen::Index j = 0; j < n; ++j) t(j) = rng.uniform(-5.0, 5.0);
  return {std::move(q), std::move(t)};
}

inline PointSet rotate_translate(const PointSet& points, std::uint64_t seed) {
  return random_rigid_motion(points.dim(), seed).apply(points);
}

struct LabeledNetwork {
  Network network;
  std::vector<std::size_t> labels;  // 0 = A, 1 = B, 2 = C
};

/// 1,000-vertex three-community benchmark: backbone path edges (i, i+1)
/// always present, then every pair i < j (row-major order, one uniform
/// draw each) linked with its block probability. Communities are
/// A = 0..299, B = 300..599, C = 600..999 (0-based).
inline LabeledNetwork benchmark_network(std::uint64_t seed) {
  constexpr std::size_t n = 1000;
  auto block = [](std::size_t v) -> std::size_t { return v < 300 ? 0 : (v < 600 ? 1 : 2); };
  // symmetric block probabilities: A-A, B-B, C-C, A-B, B-C, C-A
  const double p[3][3] = {{0.01, 0.0001, 0.0005}, {0.0001, 0.02, 0.0001}, {0.0005, 0.0001, 0.008}};

  Rng rng(seed);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double u = rng.uniform();
      if (j != i + 1 && u < p[block(i)][block(j)]) edges.emplace_back(i, j);
    }
  }
  LabeledNetwork out{Network(n, std::move(edges)), {}};
  out.labels.resize(n);
  for (std::size_t v = 0; v < n; ++v) out.labels[v] = block(v);
  return out;
}

}  // namespace bpslt
