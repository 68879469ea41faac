#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "bpslt/error.hpp"
#include "bpslt/geometry.hpp"
#include "bpslt/rng.hpp"

namespace bpslt {

// Cut k (1 <= k < m) of dimension `dim`, i.e. unit coordinate k/m.
struct GapLocation {
  std::size_t dim = 0;
  std::size_t cut = 1;
  friend bool operator==(const GapLocation&, const GapLocation&) = default;
};

/// Per-dimension bin counts B_i and CDF gaps g_jk of a point set in [0,1)^d.
struct BinGapSummary {
  std::size_t dim = 0;
  std::size_t bins = 0;
  std::size_t n = 0;
  std::vector<std::size_t> counts;  // dim x bins, row-major
  std::vector<double> gaps;         // dim x (bins - 1), row-major; gap k stored at k - 1
  GapLocation argmax_gap;

  std::span<const std::size_t> counts_row(std::size_t j) const {
    return {counts.data() + j * bins, bins};
  }
  double gap(std::size_t j, std::size_t k) const { return gaps[j * (bins - 1) + (k - 1)]; }
  double max_gap() const { return gap(argmax_gap.dim, argmax_gap.cut); }
};

enum class TestKind { chi_square, discrepancy };

// Split location in absolute coordinates.
struct SplitHint {
  std::size_t dim = 0;
  double at = 0.0;
  friend bool operator==(const SplitHint&, const SplitHint&) = default;
};

struct TestVerdict {
  bool reject = false;
  double statistic = 0.0;
  TestKind which = TestKind::chi_square;
  std::optional<SplitHint> split_hint;  // set only when reject
};

inline void check_significance(double significance) {
  if (!(significance > 0.0 && significance < 1.0))
    throw std::invalid_argument("significance must lie in (0, 1), got " +
                                std::to_string(significance));
}

inline BinGapSummary bin_counts_and_gaps(const PointSet& unit_points, std::size_t m) {
  if (m < 2) throw std::invalid_argument("need at least 2 bins per dimension");
  if (unit_points.empty()) throw std::invalid_argument("cannot bin an empty point set");
  const std::size_t d = unit_points.dim();
  const std::size_t n = unit_points.size();

  BinGapSummary s;
  s.dim = d;
  s.bins = m;
  s.n = n;
  s.counts.assign(d * m, 0);
  s.gaps.assign(d * (m - 1), 0.0);

  const double md = static_cast<double>(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double x = unit_points.at(i, j);
      if (!(x >= 0.0 && x < 1.0))
        throw DataError("point " + std::to_string(i) + " is outside the unit cube");
      const auto bin = std::min(static_cast<std::size_t>(x * md), m - 1);
      ++s.counts[j * m + bin];
    }
  }

  // #{x_j < k/m} is the prefix count of bins 1..k.
  double best = -1.0;
  const double nd = static_cast<double>(n);
  for (std::size_t j = 0; j < d; ++j) {
    std::size_t prefix = 0;
    for (std::size_t k = 1; k < m; ++k) {
      prefix += s.counts[j * m + (k - 1)];
      const double g = std::abs(static_cast<double>(prefix) / nd - static_cast<double>(k) / md);
      s.gaps[j * (m - 1) + (k - 1)] = g;
      if (g > best) {  // strict: first (smallest j, then k) maximum wins
        best = g;
        s.argmax_gap = {j, k};
      }
    }
  }
  return s;
}

// Absolute coordinate of cut k/m inside region r.
inline SplitHint gap_split_location(const Region& r, GapLocation g, std::size_t m) {
  const std::size_t j = g.dim;
  return {j, r.lower[j] + (r.upper[j] - r.lower[j]) * static_cast<double>(g.cut) /
                              static_cast<double>(m)};
}

// Upper `significance` quantile of chi-square with df degrees of freedom.
inline double chi_square_critical_value(std::size_t df, double significance) {
  check_significance(significance);
  boost::math::chi_squared_distribution<double> dist(static_cast<double>(df));
  return boost::math::quantile(boost::math::complement(dist, significance));
}

// Two-sided standard-normal critical value |z| for the given level.
inline double normal_critical_value(double significance) {
  check_significance(significance);
  boost::math::normal_distribution<double> dist(0.0, 1.0);
  return boost::math::quantile(boost::math::complement(dist, significance / 2.0));
}

/// Pearson's test of equal cell probabilities on m counts.
inline TestVerdict chi_square_uniform(std::span<const std::size_t> counts, double significance,
                                      std::optional<SplitHint> hint = std::nullopt) {
  check_significance(significance);
  const std::size_t m = counts.size();
  if (m < 2) throw std::invalid_argument("chi-square test needs at least 2 cells");
  const std::size_t n = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (n == 0) throw std::invalid_argument("chi-square test needs at least one observation");

  const double expected = static_cast<double>(n) / static_cast<double>(m);
  double stat = 0.0;
  for (auto c : counts) {
    const double diff = static_cast<double>(c) - expected;
    stat += diff * diff / expected;
  }
  TestVerdict v;
  v.which = TestKind::chi_square;
  v.statistic = stat;
  v.reject = stat > chi_square_critical_value(m - 1, significance);
  if (v.reject) v.split_hint = hint;
  return v;
}

enum class SymmetricDiscrepancyForm {
  // B normalised so that E[B] = C under uniformity and
  // eta = (9/5)^d - (16/9)^d; z is asymptotically N(0, 1).
  calibrated,
  // B = 2^(d-1)/(n(n-1)) sum_{i<j} and eta = (9/5)^d - (6/9)^d. Not centred
  // under uniformity; kept for comparison only.
  uncorrected,
};

/// Standardised symmetric-discrepancy statistic
///   z = sqrt(n) [(A - C) + 2 (B - C)] / (5 sqrt(eta))
/// with A = mean_i prod_j (1 + 2x - 2x^2), B the pairwise product kernel
/// prod_k (1 - |x_ik - x_jk|) summed over i < j, C = (4/3)^d.
/// Direct O(n^2 d) evaluation.
inline double symmetric_discrepancy_statistic(
    const PointSet& unit_points,
    SymmetricDiscrepancyForm form = SymmetricDiscrepancyForm::calibrated) {
  const std::size_t n = unit_points.size();
  const std::size_t d = unit_points.dim();
  if (n < 2) throw std::invalid_argument("symmetric discrepancy needs at least 2 points");

  const double nd = static_cast<double>(n);
  const double dd = static_cast<double>(d);

  double a_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double prod = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double x = unit_points.at(i, j);
      prod *= 1.0 + 2.0 * x - 2.0 * x * x;
    }
    a_sum += prod;
  }

  double pair_sum = 0.0;
  const double* data = unit_points.coords().data();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double* xi = data + i * d;
    for (std::size_t k = i + 1; k < n; ++k) {
      const double* xk = data + k * d;
      double prod = 1.0;
      for (std::size_t j = 0; j < d; ++j) prod *= 1.0 - std::abs(xi[j] - xk[j]);
      pair_sum += prod;
    }
  }

  const double a = a_sum / nd;
  const double c = std::pow(4.0 / 3.0, dd);
  double b = 0.0;
  double eta = 0.0;
  if (form == SymmetricDiscrepancyForm::calibrated) {
    b = std::pow(2.0, dd + 1.0) / (nd * (nd - 1.0)) * pair_sum;
    eta = std::pow(9.0 / 5.0, dd) - std::pow(16.0 / 9.0, dd);
  } else {
    b = std::pow(2.0, dd - 1.0) / (nd * (nd - 1.0)) * pair_sum;
    eta = std::pow(9.0 / 5.0, dd) - std::pow(6.0 / 9.0, dd);
  }
  return std::sqrt(nd) * ((a - c) + 2.0 * (b - c)) / (5.0 * std::sqrt(eta));
}

// k distinct indices from [0, n) by a partial Fisher-Yates shuffle, sorted.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                           std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, n);
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Two-sided test of uniformity on [0,1)^d using the symmetric-discrepancy
/// statistic, optionally on a seeded subsample. The split hint, if any, is
/// supplied by the caller (this test does not locate a split).
inline TestVerdict discrepancy_uniformity_test(
    const PointSet& unit_points, double z_significance, std::optional<std::size_t> subsample,
    std::uint64_t seed, std::optional<SplitHint> hint = std::nullopt,
    SymmetricDiscrepancyForm form = SymmetricDiscrepancyForm::calibrated) {
  check_significance(z_significance);
  TestVerdict v;
  v.which = TestKind::discrepancy;
  if (subsample && unit_points.size() > *subsample) {
    if (*subsample < 2) throw std::invalid_argument("subsample must be at least 2");
    // Draw from the points in lexicographic order so the result depends on
    // the point set only, not on how its rows are ordered.
    std::vector<std::size_t> sorted(unit_points.size());
    std::iota(sorted.begin(), sorted.end(), std::size_t{0});
    std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
      const auto x = unit_points[a], y = unit_points[b];
      return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end());
    });
    auto idx = sample_without_replacement(unit_points.size(), *subsample, seed);
    for (auto& i : idx) i = sorted[i];
    v.statistic = symmetric_discrepancy_statistic(unit_points.subset(idx), form);
  } else {
    v.statistic = symmetric_discrepancy_statistic(unit_points, form);
  }
  v.reject = std::abs(v.statistic) > normal_critical_value(z_significance);
  if (v.reject) v.split_hint = hint;
  return v;
}

/// Exact one-dimensional star discrepancy of sorted points in [0,1):
/// max_i max(i/n - x_(i), x_(i) - (i-1)/n).
inline double star_discrepancy_1d(std::span<const double> sorted) {
  if (sorted.empty()) throw std::invalid_argument("star discrepancy of an empty set");
  if (!std::is_sorted(sorted.begin(), sorted.end()))
    throw std::invalid_argument("star_discrepancy_1d expects sorted input");
  const double n = static_cast<double>(sorted.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double x = sorted[i];
    const double hi = static_cast<double>(i + 1) / n - x;
    const double lo = x - static_cast<double>(i) / n;
    worst = std::max({worst, hi, lo});
  }
  return worst;
}

}  // namespace bpslt
