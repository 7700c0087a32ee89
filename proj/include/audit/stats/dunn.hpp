#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "audit/distributions.hpp"
#include "audit/stats/common.hpp"
#include "audit/stats/kruskal.hpp"
#include "audit/stats/ranks.hpp"

// Dunn's rank-based pairwise comparisons over the pooled midranks, with the
// standard tie adjustment and an unclamped Bonferroni product. Adjusted
// p-values above 1 are reported as-is.

namespace audit::stats {

inline constexpr std::size_t kDunnExactMaxN = 10;

struct PairwiseTestResult {
  std::string group1;
  std::string group2;
  double median_diff = 0.0;  // median(group1) - median(group2), raw values
  double mean_diff = 0.0;
  double z_score = 0.0;      // signed: positive when group1 ranks higher
  double p_raw = 1.0;
  std::optional<double> p_exact;
  double p_adjusted = 1.0;   // p_raw * family_size, unclamped
  std::size_t family_size = 1;
  bool significant = false;
  bool degenerate = false;
};

namespace detail {

inline void dunn_mean_ranks(const std::vector<double>& ranks,
                            const std::vector<std::size_t>& sizes,
                            std::vector<double>& mean_ranks) {
  mean_ranks.assign(sizes.size(), 0.0);
  std::size_t idx = 0;
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    for (std::size_t i = 0; i < sizes[g]; ++i) mean_ranks[g] += ranks[idx++];
    mean_ranks[g] /= static_cast<double>(sizes[g]);
  }
}

}  // namespace detail

// One result per unordered pair, in (i, j) order of the input groups.
// family_size defaults to the number of pairs emitted here; batteries that
// correct across several invocations pass their own count.
inline std::vector<PairwiseTestResult> dunn_pairwise(
    const std::vector<SampleGroup>& groups, std::size_t family_size = 0,
    double significance_threshold = 0.0005,
    ExactPolicy policy = ExactPolicy::automatic) {
  if (groups.size() < 2)
    throw std::invalid_argument("dunn_pairwise: need at least two groups");

  std::vector<double> pooled;
  std::vector<std::size_t> sizes;
  for (const auto& g : groups) {
    if (g.values.empty())
      throw std::invalid_argument("dunn_pairwise: empty group '" + g.label + "'");
    sizes.push_back(g.values.size());
    pooled.insert(pooled.end(), g.values.begin(), g.values.end());
  }
  const auto n = static_cast<double>(pooled.size());
  if (family_size == 0) family_size = groups.size() * (groups.size() - 1) / 2;

  RankedPool pool = midranks(pooled);
  std::vector<double> mean_ranks;
  detail::dunn_mean_ranks(pool.ranks, sizes, mean_ranks);

  // variance core shared by every pair; tie adjustment per Dunn
  double var_core = n * (n + 1.0) / 12.0 - pool.tie_sum / (12.0 * (n - 1.0));

  bool want_exact = policy == ExactPolicy::force_exact ||
                    (policy == ExactPolicy::automatic && pooled.size() <= kDunnExactMaxN);

  std::vector<PairwiseTestResult> out;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      PairwiseTestResult r;
      r.group1 = groups[i].label;
      r.group2 = groups[j].label;
      r.median_diff = median(groups[i].values) - median(groups[j].values);
      r.mean_diff = mean(groups[i].values) - mean(groups[j].values);
      r.family_size = family_size;

      double denom = std::sqrt(var_core * (1.0 / static_cast<double>(sizes[i]) +
                                           1.0 / static_cast<double>(sizes[j])));
      if (pool.all_tied || denom <= 0.0 || !(var_core > 0.0)) {
        r.degenerate = true;
        r.z_score = 0.0;
        r.p_raw = 1.0;
      } else {
        r.z_score = (mean_ranks[i] - mean_ranks[j]) / denom;
        r.p_raw = 2.0 * normal_sf(std::fabs(r.z_score));
        if (r.p_raw > 1.0) r.p_raw = 1.0;
        if (want_exact) {
          // permutation distribution of |mean-rank difference| for this pair,
          // permuting labels across the whole pool
          const double obs = std::fabs(mean_ranks[i] - mean_ranks[j]) - 1e-12;
          std::uint64_t total = 0, at_least = 0;
          const double ni = static_cast<double>(sizes[i]);
          const double nj = static_cast<double>(sizes[j]);
          detail::for_each_assignment(pool.ranks, sizes,
                                      [&](const std::vector<double>& sums) {
                                        ++total;
                                        double d = std::fabs(sums[i] / ni - sums[j] / nj);
                                        if (d >= obs) ++at_least;
                                      });
          r.p_exact = static_cast<double>(at_least) / static_cast<double>(total);
        }
      }
      double p_for_adjust = r.p_exact ? *r.p_exact : r.p_raw;
      r.p_adjusted = p_for_adjust * static_cast<double>(family_size);
      r.significant = r.p_adjusted < significance_threshold;
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace audit::stats
