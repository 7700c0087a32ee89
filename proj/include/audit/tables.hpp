#pragma once

#include <map>
#include <string>
#include <vector>

#include "audit/csv.hpp"
#include "audit/parser.hpp"
#include "audit/stats/dunn.hpp"
#include "audit/stats/mann_whitney.hpp"

// Column layouts for the emitted analysis tables. The refusal, pairwise, and
// effect tables carry fixed column sets that downstream consumers key on, so
// the schemas live here as named constants rather than inline strings.

namespace audit {

inline const std::vector<std::string> kRefusalTableColumns = {
    "Model",
    "Template type",
    "# of refused queries",
    "% of refused queries",
    "mean response length (in bytes)",
    "# of responses > 100 bytes",
    "% of responses > 100 bytes"};

inline const std::vector<std::string> kModelPairwiseColumns = {
    "Prompt",   "Model 1",     "Model 2",    "Median Diff",
    "Mean Diff", "Z score",    "adj p-value", "p<0.05/100"};

inline const std::vector<std::string> kVoicePairwiseColumns = {
    "Model",    "Group 1", "Group 2", "Median Diff",
    "Mean Diff", "Z score", "p-value", "p<0.05/100"};

inline const std::vector<std::string> kPronounPairwiseColumns = {
    "model",     "prompt type", "Group1",  "Group2", "median diff",
    "mean diff", "Z score",     "p_adj",   "p_adj < 0.05/100"};

inline std::vector<std::string> effect_table_columns(const std::string& label_column,
                                                     const std::vector<std::string>& models,
                                                     const std::string& summary_column) {
  std::vector<std::string> cols{label_column};
  cols.insert(cols.end(), models.begin(), models.end());
  cols.push_back(summary_column);
  return cols;
}

// "Major / Model", per-model effects, cross-model average
inline std::vector<std::string> major_effect_columns(const std::vector<std::string>& models) {
  return effect_table_columns("Major / Model", models, "Average");
}

// "University (Category, USNWR Ranking)", per-model effects, cross-model mean
inline std::vector<std::string> university_effect_columns(
    const std::vector<std::string>& models) {
  return effect_table_columns("University (Category, USNWR Ranking)", models, "Mean");
}

inline CsvWriter refusal_table(const std::vector<RefusalRow>& rows) {
  CsvWriter csv(kRefusalTableColumns);
  for (const auto& r : rows) {
    csv.add_row({r.model_id, r.voice, csv_num(static_cast<double>(r.n_refused)),
                 csv_num(r.pct_refused), csv_num(r.mean_length_bytes),
                 csv_num(static_cast<double>(r.n_over_100_bytes)),
                 csv_num(r.pct_over_100_bytes)});
  }
  return csv;
}

inline std::string bool_cell(bool b) { return b ? "TRUE" : "FALSE"; }

inline CsvWriter model_pairwise_table(
    const std::vector<std::pair<std::string, stats::PairwiseTestResult>>& rows) {
  CsvWriter csv(kModelPairwiseColumns);
  for (const auto& [voice, r] : rows) {
    csv.add_row({voice, r.group1, r.group2, csv_num(r.median_diff), csv_num(r.mean_diff),
                 csv_num(r.z_score), csv_num(r.p_adjusted), bool_cell(r.significant)});
  }
  return csv;
}

struct VoicePairwiseRow {
  std::string model_id;
  stats::MannWhitneyResult result;
  bool significant = false;
};

inline CsvWriter voice_pairwise_table(const std::vector<VoicePairwiseRow>& rows) {
  CsvWriter csv(kVoicePairwiseColumns);
  for (const auto& r : rows) {
    csv.add_row({r.model_id, "employee", "employer", csv_num(r.result.median_diff),
                 csv_num(r.result.mean_diff), csv_num(r.result.z), csv_num(r.result.p),
                 bool_cell(r.significant)});
  }
  return csv;
}

struct PronounPairwiseRow {
  std::string model_id;
  std::string voice;
  stats::PairwiseTestResult result;
};

inline CsvWriter pronoun_pairwise_table(const std::vector<PronounPairwiseRow>& rows) {
  CsvWriter csv(kPronounPairwiseColumns);
  for (const auto& r : rows) {
    csv.add_row({r.model_id, r.voice, r.result.group1, r.result.group2,
                 csv_num(r.result.median_diff), csv_num(r.result.mean_diff),
                 csv_num(r.result.z_score), csv_num(r.result.p_adjusted),
                 bool_cell(r.result.significant)});
  }
  return csv;
}

struct EffectTableRow {
  std::string label;
  std::vector<double> per_model;  // aligned with the model column order
  double summary = 0.0;           // cross-model mean
};

inline CsvWriter effect_table(const std::vector<std::string>& columns,
                              const std::vector<EffectTableRow>& rows) {
  CsvWriter csv(columns);
  for (const auto& r : rows) {
    std::vector<std::string> cells{r.label};
    for (double v : r.per_model) cells.push_back(csv_num(v));
    cells.push_back(csv_num(r.summary));
    csv.add_row(std::move(cells));
  }
  return csv;
}

}  // namespace audit
