#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

namespace audit::stats {

// Midranks of a pooled sample plus the tie statistics the rank tests need.
struct RankedPool {
  std::vector<double> ranks;  // aligned with the input order, 1-based midranks
  double tie_sum = 0.0;       // sum of (t^3 - t) over tie groups
  bool all_tied = false;
};

inline RankedPool midranks(const std::vector<double>& pooled) {
  RankedPool out;
  const std::size_t n = pooled.size();
  out.ranks.resize(n);
  if (n == 0) return out;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });

  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // mean of ranks i+1..j+1
    for (std::size_t k = i; k <= j; ++k) out.ranks[order[k]] = avg;
    auto t = static_cast<double>(j - i + 1);
    if (t > 1.0) out.tie_sum += t * t * t - t;
    i = j + 1;
  }
  out.all_tied = n > 1 && pooled[order.front()] == pooled[order.back()];
  return out;
}

}  // namespace audit::stats
