#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "audit/stats/common.hpp"

// Letter-value summaries: the median plus nested boxes whose bounds halve the
// tail percentile at each depth, (25,75), (12.5,87.5), (6.25,93.75), ...

namespace audit {

struct LetterValueBox {
  int depth = 1;        // box k spans percentiles 100/2^(k+1) .. 100(1-1/2^(k+1))
  double lower = 0.0;
  double upper = 0.0;
};

struct LetterValueSummary {
  std::string label;
  std::size_t n = 0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::vector<LetterValueBox> boxes;  // depth 1, 2, ... outward
};

// max_depth = 0 selects the adaptive stop: boxes keep halving while at least
// five observations lie beyond the current one.
inline LetterValueSummary letter_values(std::string label, std::vector<double> values,
                                        int max_depth = 0) {
  if (values.empty()) throw std::invalid_argument("letter_values: empty sample");
  std::sort(values.begin(), values.end());

  LetterValueSummary out;
  out.label = std::move(label);
  out.n = values.size();
  out.median = stats::quantile_sorted(values, 0.5);
  out.min = values.front();
  out.max = values.back();
  if (values.size() < 2) return out;

  double tail = 0.5;
  for (int depth = 1;; ++depth) {
    tail /= 2.0;
    LetterValueBox box;
    box.depth = depth;
    box.lower = stats::quantile_sorted(values, tail);
    box.upper = stats::quantile_sorted(values, 1.0 - tail);
    out.boxes.push_back(box);

    if (max_depth > 0) {
      if (depth >= max_depth) break;
      continue;
    }
    std::size_t beyond = 0;
    for (double v : values)
      if (v < box.lower || v > box.upper) ++beyond;
    if (beyond < 5) break;
    if (box.lower <= out.min && box.upper >= out.max) break;  // nothing left to split
  }
  return out;
}

}  // namespace audit
