#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "audit/distributions.hpp"
#include "audit/stats/common.hpp"
#include "audit/stats/ranks.hpp"

// Mann-Whitney U with midranks, tie-corrected variance, and a 0.5 continuity
// correction on the normal approximation. Small pools (n1+n2 <= 12) also get
// the exact two-sided p by enumerating every rank split.

namespace audit::stats {

inline constexpr std::size_t kMannWhitneyExactMaxN = 12;

struct MannWhitneyResult {
  double u = 0.0;            // U statistic for group1
  double z = 0.0;            // signed, continuity-corrected
  double p_approx = 1.0;
  std::optional<double> p_exact;
  double p = 1.0;            // exact when available, else approx
  double median_diff = 0.0;  // group1 - group2
  double mean_diff = 0.0;
  bool degenerate = false;
};

namespace detail {

// Exact two-sided tail of |U - mu| by walking all C(N, n1) subsets.
inline double mwu_exact_p(const std::vector<double>& ranks, std::size_t n1,
                          double u_obs) {
  const std::size_t n = ranks.size();
  const double mu = 0.5 * static_cast<double>(n1) * static_cast<double>(n - n1);
  const double extremeness = std::fabs(u_obs - mu) - 1e-12;
  std::uint64_t total = 0, at_least = 0;

  std::vector<std::size_t> pick(n1);
  double half = static_cast<double>(n1) * (static_cast<double>(n1) + 1.0) / 2.0;
  std::function<void(std::size_t, std::size_t, double)> rec =
      [&](std::size_t start, std::size_t chosen, double rank_sum) {
        if (chosen == n1) {
          ++total;
          double u = rank_sum - half;
          if (std::fabs(u - mu) >= extremeness) ++at_least;
          return;
        }
        for (std::size_t i = start; i + (n1 - chosen) <= n; ++i)
          rec(i + 1, chosen + 1, rank_sum + ranks[i]);
      };
  rec(0, 0, 0.0);
  return static_cast<double>(at_least) / static_cast<double>(total);
}

}  // namespace detail

inline MannWhitneyResult mann_whitney_u(const SampleGroup& group1,
                                        const SampleGroup& group2,
                                        ExactPolicy policy = ExactPolicy::automatic) {
  if (group1.values.empty() || group2.values.empty())
    throw std::invalid_argument("mann_whitney_u: both groups must be non-empty");

  const std::size_t n1 = group1.values.size();
  const std::size_t n2 = group2.values.size();
  std::vector<double> pooled = group1.values;
  pooled.insert(pooled.end(), group2.values.begin(), group2.values.end());

  RankedPool pool = midranks(pooled);
  double r1 = 0.0;
  for (std::size_t i = 0; i < n1; ++i) r1 += pool.ranks[i];

  MannWhitneyResult res;
  res.u = r1 - static_cast<double>(n1) * (static_cast<double>(n1) + 1.0) / 2.0;
  res.median_diff = median(group1.values) - median(group2.values);
  res.mean_diff = mean(group1.values) - mean(group2.values);

  const double dn1 = static_cast<double>(n1);
  const double dn2 = static_cast<double>(n2);
  const double n = dn1 + dn2;
  const double mu = 0.5 * dn1 * dn2;
  double var = dn1 * dn2 / 12.0 * ((n + 1.0) - pool.tie_sum / (n * (n - 1.0)));

  if (pool.all_tied || var <= 0.0) {
    res.degenerate = true;
    res.z = 0.0;
    res.p_approx = 1.0;
    res.p = 1.0;
    return res;
  }

  double sd = std::sqrt(var);
  double diff = res.u - mu;
  double shrunk = std::fabs(diff) - 0.5;
  if (shrunk < 0.0) shrunk = 0.0;
  res.z = (diff >= 0.0 ? shrunk : -shrunk) / sd;
  res.p_approx = 2.0 * normal_sf(shrunk / sd);
  if (res.p_approx > 1.0) res.p_approx = 1.0;
  res.p = res.p_approx;

  bool want_exact = policy == ExactPolicy::force_exact ||
                    (policy == ExactPolicy::automatic &&
                     pooled.size() <= kMannWhitneyExactMaxN);
  if (want_exact) {
    res.p_exact = detail::mwu_exact_p(pool.ranks, n1, res.u);
    res.p = *res.p_exact;
  }
  return res;
}

}  // namespace audit::stats
