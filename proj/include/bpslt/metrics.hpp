#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <utility>

namespace bpslt {

/// Hubert-Arabie adjusted Rand index between two labelings of the same items.
template <typename A, typename B>
double adjusted_rand_index(std::span<const A> a, std::span<const B> b) {
  if (a.size() != b.size()) throw std::invalid_argument("labelings differ in length");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };

  std::map<std::pair<A, B>, std::size_t> joint;
  std::map<A, std::size_t> rows;
  std::map<B, std::size_t> cols;
  for (std::size_t i = 0; i < n; ++i) {
    ++joint[{a[i], b[i]}];
    ++rows[a[i]];
    ++cols[b[i]];
  }
  double index = 0.0, row_sum = 0.0, col_sum = 0.0;
  for (const auto& [key, c] : joint) index += choose2(static_cast<double>(c));
  for (const auto& [key, c] : rows) row_sum += choose2(static_cast<double>(c));
  for (const auto& [key, c] : cols) col_sum += choose2(static_cast<double>(c));
  const double expected = row_sum * col_sum / choose2(static_cast<double>(n));
  const double max_index = 0.5 * (row_sum + col_sum);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace bpslt
