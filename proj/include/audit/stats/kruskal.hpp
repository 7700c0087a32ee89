#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "audit/distributions.hpp"
#include "audit/stats/common.hpp"
#include "audit/stats/ranks.hpp"

// Kruskal-Wallis test by ranks with midrank tie correction. Below the exact
// threshold the permutation distribution of H is enumerated outright and used
// as the p-value; the chi-squared approximation is always reported alongside.

namespace audit::stats {

inline constexpr std::size_t kKruskalExactMaxN = 10;

struct KruskalResult {
  double h = 0.0;            // tie-corrected statistic
  double df = 0.0;
  double p_approx = 1.0;     // chi-squared upper tail
  std::optional<double> p_exact;
  double p = 1.0;            // exact when available, else approx
  bool degenerate = false;   // all pooled observations identical
  std::size_t n_total = 0;
};

namespace detail {

inline double kruskal_h_from_rank_sums(const std::vector<double>& rank_sums,
                                       const std::vector<std::size_t>& sizes,
                                       double n_total, double tie_sum) {
  double s = 0.0;
  for (std::size_t g = 0; g < rank_sums.size(); ++g)
    s += rank_sums[g] * rank_sums[g] / static_cast<double>(sizes[g]);
  double h_raw = 12.0 / (n_total * (n_total + 1.0)) * s - 3.0 * (n_total + 1.0);
  double denom = 1.0 - tie_sum / (n_total * n_total * n_total - n_total);
  if (denom <= 0.0) return 0.0;
  return h_raw / denom;
}

// Visits every assignment of the pooled ranks to groups of the given sizes.
// The callback receives the per-group rank sums.
inline void for_each_assignment(const std::vector<double>& ranks,
                                const std::vector<std::size_t>& sizes,
                                const std::function<void(const std::vector<double>&)>& fn) {
  std::vector<std::size_t> remaining = sizes;
  std::vector<double> rank_sums(sizes.size(), 0.0);
  std::function<void(std::size_t)> rec = [&](std::size_t pos) {
    if (pos == ranks.size()) {
      fn(rank_sums);
      return;
    }
    for (std::size_t g = 0; g < sizes.size(); ++g) {
      if (remaining[g] == 0) continue;
      --remaining[g];
      rank_sums[g] += ranks[pos];
      rec(pos + 1);
      rank_sums[g] -= ranks[pos];
      ++remaining[g];
    }
  };
  rec(0);
}

}  // namespace detail

inline KruskalResult kruskal_wallis(const std::vector<SampleGroup>& groups,
                                    ExactPolicy policy = ExactPolicy::automatic) {
  if (groups.size() < 2)
    throw std::invalid_argument("kruskal_wallis: need at least two groups");
  std::vector<double> pooled;
  std::vector<std::size_t> sizes;
  for (const auto& g : groups) {
    if (g.values.empty())
      throw std::invalid_argument("kruskal_wallis: empty group '" + g.label + "'");
    sizes.push_back(g.values.size());
    pooled.insert(pooled.end(), g.values.begin(), g.values.end());
  }
  if (pooled.size() < 3)
    throw std::invalid_argument("kruskal_wallis: need at least three observations");

  KruskalResult res;
  res.n_total = pooled.size();
  res.df = static_cast<double>(groups.size() - 1);

  RankedPool pool = midranks(pooled);
  if (pool.all_tied) {
    res.degenerate = true;
    res.h = 0.0;
    res.p_approx = 1.0;
    res.p = 1.0;
    return res;
  }

  auto n_total = static_cast<double>(pooled.size());
  std::vector<double> rank_sums(groups.size(), 0.0);
  std::size_t idx = 0;
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (std::size_t i = 0; i < sizes[g]; ++i) rank_sums[g] += pool.ranks[idx++];

  res.h = detail::kruskal_h_from_rank_sums(rank_sums, sizes, n_total, pool.tie_sum);
  res.p_approx = chi_squared_sf(res.h, res.df);
  res.p = res.p_approx;

  bool want_exact = policy == ExactPolicy::force_exact ||
                    (policy == ExactPolicy::automatic && pooled.size() <= kKruskalExactMaxN);
  if (want_exact) {
    std::uint64_t total = 0, at_least = 0;
    const double threshold = res.h - 1e-12;
    detail::for_each_assignment(pool.ranks, sizes, [&](const std::vector<double>& sums) {
      ++total;
      if (detail::kruskal_h_from_rank_sums(sums, sizes, n_total, pool.tie_sum) >= threshold)
        ++at_least;
    });
    res.p_exact = static_cast<double>(at_least) / static_cast<double>(total);
    res.p = *res.p_exact;
  }
  return res;
}

}  // namespace audit::stats
