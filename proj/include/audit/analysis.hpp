#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "audit/pipeline.hpp"
#include "audit/stats/dunn.hpp"
#include "audit/stats/kruskal.hpp"
#include "audit/stats/mann_whitney.hpp"
#include "audit/stats/ols.hpp"
#include "audit/tables.hpp"

// The analyze stage: refusal summary, the rank-test batteries (models per
// voice, voices per model, pronouns per model x voice), and one OLS per model
// with the control cases absorbed into the intercept. Emits the CSV tables
// under stats/.

namespace audit {

struct OmnibusRow {
  std::string battery;
  std::string facet;
  stats::KruskalResult result;
  bool significant = false;
};

struct AnalyzeOutcome {
  std::size_t rows = 0;
  std::size_t offers = 0;
  ParseOutcome parse;
  std::map<std::string, double> adjusted_r2;  // per model
};

namespace detail {

inline std::vector<std::string> voices_present(const std::vector<AnalysisRow>& rows) {
  std::set<std::string> seen;
  for (const auto& r : rows)
    if (r.status == TransportStatus::ok) seen.insert(to_string(r.voice));
  std::vector<std::string> out(seen.begin(), seen.end());
  return out;  // employee sorts before employer
}

}  // namespace detail

inline std::vector<RefusalRow> summarize_refusals(const std::vector<AnalysisRow>& rows,
                                                  const std::vector<std::string>& models) {
  std::vector<RefusalRow> out;
  for (const auto& model : models) {
    for (const char* voice : {"employee", "employer"}) {
      RefusalRow row;
      row.model_id = model;
      row.voice = voice;
      std::uint64_t length_sum = 0;
      for (const auto& r : rows) {
        if (r.status != TransportStatus::ok || r.model_id != model ||
            std::string(to_string(r.voice)) != voice)
          continue;
        ++row.n_total;
        if (r.refusal) ++row.n_refused;
        length_sum += r.length_bytes;
        if (r.verbose) ++row.n_over_100_bytes;
      }
      if (row.n_total > 0) {
        auto n = static_cast<double>(row.n_total);
        row.pct_refused = 100.0 * static_cast<double>(row.n_refused) / n;
        row.mean_length_bytes = static_cast<double>(length_sum) / n;
        row.pct_over_100_bytes = 100.0 * static_cast<double>(row.n_over_100_bytes) / n;
      }
      out.push_back(std::move(row));
    }
  }
  return out;
}

// Offers (refusals excluded) keyed by (model, voice), then optionally by one
// axis level. Values arrive in deterministic row order.
inline std::map<std::string, std::vector<double>> offers_by_level(
    const std::vector<AnalysisRow>& rows, const std::string& model,
    const std::string& voice, const std::string& axis) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& r : rows) {
    if (r.status != TransportStatus::ok || r.refusal || !r.offer) continue;
    if (r.model_id != model || std::string(to_string(r.voice)) != voice) continue;
    out[r.levels.at(axis)].push_back(*r.offer);
  }
  return out;
}

inline std::vector<double> offers_of(const std::vector<AnalysisRow>& rows,
                                     const std::string& model, const std::string& voice) {
  std::vector<double> out;
  for (const auto& r : rows) {
    if (r.status != TransportStatus::ok || r.refusal || !r.offer) continue;
    if (!model.empty() && r.model_id != model) continue;
    if (!voice.empty() && std::string(to_string(r.voice)) != voice) continue;
    out.push_back(*r.offer);
  }
  return out;
}

struct ModelFitResult {
  std::string model_id;
  stats::OlsFit fit;
  // term name ("axis=level" or "voice=employer") -> index into fit.terms
  std::map<std::string, std::size_t> term_index;
};

// One regression per model over every non-refused offer: a dummy per
// non-control level of each axis plus a voice dummy; controls form the
// intercept. No interaction terms.
inline ModelFitResult fit_model_ols(const ConditionMatrix& design,
                                    const std::vector<AnalysisRow>& rows,
                                    const std::string& model) {
  std::vector<const AnalysisRow*> obs;
  std::set<std::string> voices;
  for (const auto& r : rows) {
    if (r.status != TransportStatus::ok || r.refusal || !r.offer) continue;
    if (r.model_id != model) continue;
    obs.push_back(&r);
    voices.insert(to_string(r.voice));
  }
  if (obs.size() < 2)
    throw StageError("analyze", "model " + model + " has too few offers for OLS");

  stats::DesignMatrix dm;
  dm.n = obs.size();
  std::vector<double> y;
  y.reserve(obs.size());
  for (const auto* r : obs) y.push_back(*r->offer);

  if (voices.size() > 1) {
    std::vector<double> col(obs.size(), 0.0);
    for (std::size_t i = 0; i < obs.size(); ++i)
      col[i] = obs[i]->voice == Voice::employer ? 1.0 : 0.0;
    dm.add_column("voice=employer", std::move(col));
  }
  for (const auto& axis : design.axes) {
    std::vector<std::string> level_names;
    for (const auto& lvl : axis.levels)
      if (lvl.kind != LevelKind::control) level_names.push_back(lvl.name);
    std::sort(level_names.begin(), level_names.end());
    for (const auto& name : level_names) {
      std::vector<double> col(obs.size(), 0.0);
      for (std::size_t i = 0; i < obs.size(); ++i)
        col[i] = obs[i]->levels.at(axis.name) == name ? 1.0 : 0.0;
      dm.add_column(axis.name + "=" + name, std::move(col));
    }
  }

  ModelFitResult result;
  result.model_id = model;
  result.fit = stats::fit_ols(dm, y);
  for (std::size_t i = 0; i < result.fit.terms.size(); ++i)
    result.term_index[result.fit.terms[i].name] = i;
  return result;
}

inline AnalyzeOutcome analyze_stage(const AuditConfig& cfg, const RunPaths& paths,
                                    bool allow_partial = false) {
  auto manifest = load_manifest(paths);
  if (!manifest)
    throw StageError("run", "no manifest in " + paths.dir.string() +
                                "; run the 'run' stage first");
  if (!manifest->run_complete && !allow_partial)
    throw StageError("run", "raw log is incomplete; re-run 'run' to finish or pass "
                            "--partial to analyze anyway");

  AnalyzeOutcome outcome;
  outcome.parse = parse_stage(paths);
  std::vector<AnalysisRow> rows = load_analysis_rows(cfg.design, paths);
  outcome.rows = rows.size();

  fs::create_directories(paths.stats_dir());
  const auto& analysis = cfg.analysis;
  const std::vector<std::string> models = manifest->models;
  const std::vector<std::string> voices = detail::voices_present(rows);

  // refusal rates and response lengths per model and voice
  refusal_table(summarize_refusals(rows, models))
      .save((paths.stats_dir() / "refusals.csv").string());

  std::vector<OmnibusRow> omnibus;

  // models pairwise per voice (Dunn), gated on the omnibus
  std::vector<std::pair<std::string, stats::PairwiseTestResult>> model_rows;
  {
    std::vector<std::pair<std::string, std::vector<stats::SampleGroup>>> invocations;
    for (const auto& voice : voices) {
      std::vector<stats::SampleGroup> groups;
      for (const auto& model : models) {
        auto values = offers_of(rows, model, voice);
        if (!values.empty()) groups.push_back({model, std::move(values)});
      }
      if (groups.size() >= 2) invocations.emplace_back(voice, std::move(groups));
    }
    std::size_t family = 0;
    std::vector<bool> gated_in(invocations.size(), false);
    for (std::size_t i = 0; i < invocations.size(); ++i) {
      auto kw = stats::kruskal_wallis(invocations[i].second);
      bool significant = kw.p < analysis.omnibus_alpha;
      omnibus.push_back({"models", invocations[i].first, kw, significant});
      gated_in[i] = significant || !analysis.gate_pairwise_on_omnibus;
      if (gated_in[i]) {
        std::size_t k = invocations[i].second.size();
        family += k * (k - 1) / 2;
      }
    }
    for (std::size_t i = 0; i < invocations.size(); ++i) {
      if (!gated_in[i]) continue;
      for (auto& r : stats::dunn_pairwise(invocations[i].second, family,
                                          analysis.significance_threshold))
        model_rows.emplace_back(invocations[i].first, std::move(r));
    }
  }
  model_pairwise_table(model_rows).save((paths.stats_dir() / "pairwise_models.csv").string());

  // employee vs employer per model (Mann-Whitney)
  std::vector<VoicePairwiseRow> voice_rows;
  for (const auto& model : models) {
    auto employee = offers_of(rows, model, "employee");
    auto employer = offers_of(rows, model, "employer");
    if (employee.empty() || employer.empty()) continue;
    VoicePairwiseRow row;
    row.model_id = model;
    row.result = stats::mann_whitney_u({"employee", std::move(employee)},
                                       {"employer", std::move(employer)});
    row.significant = row.result.p < analysis.significance_threshold;
    voice_rows.push_back(std::move(row));
  }
  voice_pairwise_table(voice_rows).save((paths.stats_dir() / "pairwise_voices.csv").string());

  // pronoun pairs per model x voice (Dunn), family across the whole battery
  std::vector<PronounPairwiseRow> pronoun_rows;
  const std::string pronoun_axis = cfg.design.find_axis("pronoun") ? "pronoun"
                                   : cfg.design.axes.empty() ? ""
                                                             : cfg.design.axes[0].name;
  if (!pronoun_axis.empty()) {
    struct Invocation {
      std::string model, voice;
      std::vector<stats::SampleGroup> groups;
    };
    std::vector<Invocation> invocations;
    for (const auto& model : models) {
      for (const auto& voice : voices) {
        auto by_level = offers_by_level(rows, model, voice, pronoun_axis);
        std::vector<stats::SampleGroup> groups;
        for (auto& [level, values] : by_level)
          if (!values.empty()) groups.push_back({level, std::move(values)});
        if (groups.size() >= 2) invocations.push_back({model, voice, std::move(groups)});
      }
    }
    std::size_t family = 0;
    std::vector<bool> gated_in(invocations.size(), false);
    for (std::size_t i = 0; i < invocations.size(); ++i) {
      auto kw = stats::kruskal_wallis(invocations[i].groups);
      bool significant = kw.p < analysis.omnibus_alpha;
      omnibus.push_back(
          {"pronouns", invocations[i].model + "/" + invocations[i].voice, kw, significant});
      gated_in[i] = significant || !analysis.gate_pairwise_on_omnibus;
      if (gated_in[i]) {
        std::size_t k = invocations[i].groups.size();
        family += k * (k - 1) / 2;
      }
    }
    for (std::size_t i = 0; i < invocations.size(); ++i) {
      if (!gated_in[i]) continue;
      for (auto& r : stats::dunn_pairwise(invocations[i].groups, family,
                                          analysis.significance_threshold))
        pronoun_rows.push_back({invocations[i].model, invocations[i].voice, std::move(r)});
    }
  }
  pronoun_pairwise_table(pronoun_rows)
      .save((paths.stats_dir() / "pairwise_pronouns.csv").string());

  // omnibus gates
  {
    CsvWriter csv({"battery", "facet", "H", "df", "p", "significant", "degenerate"});
    for (const auto& o : omnibus)
      csv.add_row({o.battery, o.facet, csv_num(o.result.h), csv_num(o.result.df),
                   csv_num(o.result.p), bool_cell(o.significant),
                   bool_cell(o.result.degenerate)});
    csv.save((paths.stats_dir() / "omnibus.csv").string());
  }

  // per-model OLS
  std::vector<ModelFitResult> fits;
  for (const auto& model : models) fits.push_back(fit_model_ols(cfg.design, rows, model));

  {
    CsvWriter csv({"model", "n_observations", "intercept", "intercept_se", "r2",
                   "adjusted_r2"});
    nlohmann::json jterms = nlohmann::json::array();
    for (const auto& f : fits) {
      csv.add_row({f.model_id, csv_num(static_cast<double>(f.fit.n)),
                   csv_num(f.fit.intercept.coef), csv_num(f.fit.intercept.se),
                   csv_num(f.fit.r2), csv_num(f.fit.adjusted_r2)});
      outcome.adjusted_r2[f.model_id] = f.fit.adjusted_r2;
      for (const auto& t : f.fit.terms) {
        auto eq = t.name.find('=');
        jterms.push_back(nlohmann::json{{"model", f.model_id},
                                        {"term", t.name},
                                        {"axis", t.name.substr(0, eq)},
                                        {"level", t.name.substr(eq + 1)},
                                        {"coefficient", t.coef},
                                        {"std_error", t.se},
                                        {"ci95_lo", t.ci_lo},
                                        {"ci95_hi", t.ci_hi}});
      }
    }
    csv.save((paths.stats_dir() / "ols_summary.csv").string());

    CsvWriter terms_csv({"model", "term", "axis", "level", "coefficient", "std_error",
                         "ci95_lo", "ci95_hi"});
    for (const auto& t : jterms)
      terms_csv.add_row({t.at("model").get<std::string>(), t.at("term").get<std::string>(),
                         t.at("axis").get<std::string>(), t.at("level").get<std::string>(),
                         csv_num(t.at("coefficient").get<double>()),
                         csv_num(t.at("std_error").get<double>()),
                         csv_num(t.at("ci95_lo").get<double>()),
                         csv_num(t.at("ci95_hi").get<double>())});
    terms_csv.save((paths.stats_dir() / "ols_terms.csv").string());

    std::ofstream jout(paths.stats_dir() / "ols_terms.json", std::ios::binary);
    jout << jterms.dump(2) << '\n';
  }

  // effect tables: per-axis rows sorted by cross-model mean, descending
  for (const auto& axis : cfg.design.axes) {
    std::vector<EffectTableRow> table_rows;
    for (const auto& lvl : axis.levels) {
      if (lvl.kind == LevelKind::control) continue;
      EffectTableRow row;
      row.label = lvl.name;
      auto desc = lvl.meta.find("descriptor");
      if (desc != lvl.meta.end()) row.label += " (" + desc->second + ")";
      double sum = 0.0;
      bool missing = false;
      for (const auto& f : fits) {
        auto it = f.term_index.find(axis.name + "=" + lvl.name);
        if (it == f.term_index.end()) {
          missing = true;
          break;
        }
        double coef = f.fit.terms[it->second].coef;
        row.per_model.push_back(coef);
        sum += coef;
      }
      if (missing) continue;
      row.summary = sum / static_cast<double>(fits.size());
      table_rows.push_back(std::move(row));
    }
    std::stable_sort(table_rows.begin(), table_rows.end(),
                     [](const EffectTableRow& a, const EffectTableRow& b) {
                       return a.summary > b.summary;
                     });
    std::vector<std::string> columns =
        axis.name == "major"      ? major_effect_columns(models)
        : axis.name == "university" ? university_effect_columns(models)
                                    : effect_table_columns(axis.name + " / Model", models,
                                                           "Average");
    effect_table(columns, table_rows)
        .save((paths.stats_dir() / ("effects_" + axis.name + ".csv")).string());
  }

  outcome.offers = offers_of(rows, "", "").size();
  manifest->analyze_complete = true;
  save_manifest(paths, *manifest);
  return outcome;
}

}  // namespace audit
