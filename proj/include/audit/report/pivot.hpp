#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "audit/stats/common.hpp"

namespace audit {

// Median pivot: rows x columns of a cell statistic over one facet's
// observations. Empty strata stay empty rather than becoming zeros.
struct PivotTable {
  std::string row_axis;
  std::string col_axis;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<std::vector<std::optional<double>>> cells;  // [row][col]
};

struct PivotObservation {
  std::string row;
  std::string col;
  double value = 0.0;
};

inline PivotTable pivot_median(const std::vector<PivotObservation>& observations,
                               std::string row_axis, std::string col_axis,
                               const std::vector<std::string>& row_order,
                               const std::vector<std::string>& col_order) {
  PivotTable table;
  table.row_axis = std::move(row_axis);
  table.col_axis = std::move(col_axis);
  table.row_labels = row_order;
  table.col_labels = col_order;

  std::map<std::string, std::size_t> row_index, col_index;
  for (std::size_t i = 0; i < row_order.size(); ++i) row_index[row_order[i]] = i;
  for (std::size_t i = 0; i < col_order.size(); ++i) col_index[col_order[i]] = i;

  std::vector<std::vector<std::vector<double>>> buckets(
      row_order.size(), std::vector<std::vector<double>>(col_order.size()));
  for (const auto& obs : observations) {
    auto r = row_index.find(obs.row);
    auto c = col_index.find(obs.col);
    if (r == row_index.end() || c == col_index.end()) continue;
    buckets[r->second][c->second].push_back(obs.value);
  }

  table.cells.assign(row_order.size(),
                     std::vector<std::optional<double>>(col_order.size()));
  for (std::size_t r = 0; r < row_order.size(); ++r)
    for (std::size_t c = 0; c < col_order.size(); ++c)
      if (!buckets[r][c].empty())
        table.cells[r][c] = stats::median(buckets[r][c]);
  return table;
}

}  // namespace audit
