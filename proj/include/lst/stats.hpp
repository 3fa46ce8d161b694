#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace lst {

/// Nearest-rank percentile: the ceil(fraction * n)-th smallest value
/// (1-based, clamped to [1, n]). Takes its input by value and sorts it.
inline double nearest_rank(std::vector<double> values, double fraction) {
  if (values.empty()) throw std::invalid_argument("nearest_rank of an empty set");
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   values.end());
  return values[rank - 1];
}

}  // namespace lst
