#pragma once

#include <cstddef>
#include <stdexcept>

namespace audit::stats {

// Multiply-only Bonferroni: adjusted values above 1 are reported unclamped.
struct BonferroniVerdict {
  double p_adjusted = 1.0;
  bool significant = false;
};

inline BonferroniVerdict adjust_bonferroni(double p_raw, std::size_t family_size,
                                           double threshold = 0.0005) {
  if (p_raw < 0.0 || p_raw > 1.0)
    throw std::invalid_argument("adjust_bonferroni: p_raw outside [0,1]");
  if (family_size < 1)
    throw std::invalid_argument("adjust_bonferroni: family_size must be >= 1");
  BonferroniVerdict v;
  v.p_adjusted = p_raw * static_cast<double>(family_size);
  v.significant = v.p_adjusted < threshold;
  return v;
}

}  // namespace audit::stats
