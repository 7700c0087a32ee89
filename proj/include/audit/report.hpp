#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "audit/csv.hpp"
#include "audit/pipeline.hpp"
#include "audit/report/letter_values.hpp"
#include "audit/report/pivot.hpp"
#include "audit/report/svg.hpp"

// The report stage: letter-value plots faceted by model and voice, median
// heatmaps, and per-model effect charts, rendered from the parsed table and
// the analyze stage's regression terms. Files follow
// {report}_{model}_{voice}.{ext}, with "all" for aggregated dimensions.

namespace audit {

struct ReportOutcome {
  std::vector<std::string> files;  // paths relative to the run directory
};

namespace detail {

inline std::string safe_name(std::string s) {
  for (auto& c : s)
    if (c == '/' || c == ' ' || c == ':') c = '-';
  return s;
}

// control first, nonce next, then descending overall median
inline std::vector<std::string> order_levels_by_median(
    const Axis& axis, const std::map<std::string, std::vector<double>>& by_level) {
  std::vector<std::string> control, nonce, rest;
  for (const auto& lvl : axis.levels) {
    if (!by_level.count(lvl.name)) continue;
    if (lvl.kind == LevelKind::control) control.push_back(lvl.name);
    else if (lvl.kind == LevelKind::nonce) nonce.push_back(lvl.name);
    else rest.push_back(lvl.name);
  }
  std::sort(rest.begin(), rest.end());
  std::stable_sort(rest.begin(), rest.end(), [&](const std::string& a, const std::string& b) {
    return stats::median(by_level.at(a)) > stats::median(by_level.at(b));
  });
  std::vector<std::string> out = control;
  out.insert(out.end(), nonce.begin(), nonce.end());
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

inline void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write report file: " + path.string());
  out << content;
}

}  // namespace detail

inline ReportOutcome report_stage(const AuditConfig& cfg, const RunPaths& paths) {
  auto manifest = load_manifest(paths);
  if (!manifest)
    throw StageError("run", "no manifest in " + paths.dir.string());
  if (!manifest->analyze_complete)
    throw StageError("analyze", "analyze outputs missing in " + paths.dir.string() +
                                    "; run 'analyze' first");
  if (!fs::exists(paths.stats_dir() / "ols_terms.json"))
    throw StageError("analyze", "stats/ols_terms.json missing; re-run 'analyze'");

  std::vector<AnalysisRow> rows = load_analysis_rows(cfg.design, paths);
  const std::vector<std::string> models = manifest->models;
  std::vector<std::string> voices;
  for (const char* v : {"employee", "employer"})
    for (const auto& r : rows)
      if (r.status == TransportStatus::ok && std::string(to_string(r.voice)) == v) {
        voices.push_back(v);
        break;
      }

  fs::create_directories(paths.reports_dir());
  ReportOutcome outcome;
  auto emit = [&](const std::string& name, const std::string& content) {
    detail::write_file(paths.reports_dir() / name, content);
    outcome.files.push_back("reports/" + name);
  };

  auto offers_in = [&](const std::string& model, const std::string& voice) {
    std::vector<double> out;
    for (const auto& r : rows) {
      if (r.status != TransportStatus::ok || r.refusal || !r.offer) continue;
      if (r.model_id != model || std::string(to_string(r.voice)) != voice) continue;
      out.push_back(*r.offer);
    }
    return out;
  };
  auto offers_by_axis = [&](const std::string& model, const std::string& voice,
                            const std::string& axis) {
    std::map<std::string, std::vector<double>> out;
    for (const auto& r : rows) {
      if (r.status != TransportStatus::ok || r.refusal || !r.offer) continue;
      if (r.model_id != model || std::string(to_string(r.voice)) != voice) continue;
      out[r.levels.at(axis)].push_back(*r.offer);
    }
    return out;
  };

  bool any_offers = false;
  for (const auto& r : rows)
    if (r.status == TransportStatus::ok && !r.refusal) any_offers = true;
  if (!any_offers)
    throw StageError("analyze", "no non-refusal offers to report on");

  // offers by voice, one panel per model
  {
    std::vector<svg::LetterValueFacet> facets;
    for (const auto& model : models) {
      svg::LetterValueFacet facet;
      facet.title = model;
      for (const auto& voice : voices) {
        auto values = offers_in(model, voice);
        if (!values.empty()) facet.groups.push_back(letter_values(voice, values));
      }
      if (!facet.groups.empty()) facets.push_back(std::move(facet));
    }
    if (!facets.empty())
      emit("boxen_offers_all_all.svg",
           svg::letter_value_chart(facets, "Recommended offer by prompt voice and model"));
  }

  // letter-value summaries as data
  {
    CsvWriter csv({"model", "voice", "n", "median", "min", "max", "depth", "lower",
                   "upper"});
    nlohmann::json jout = nlohmann::json::array();
    for (const auto& model : models) {
      for (const auto& voice : voices) {
        auto values = offers_in(model, voice);
        if (values.empty()) continue;
        auto lv = letter_values(voice, values);
        nlohmann::json boxes = nlohmann::json::array();
        for (const auto& b : lv.boxes) {
          csv.add_row({model, voice, csv_num(static_cast<double>(lv.n)),
                       csv_num(lv.median), csv_num(lv.min), csv_num(lv.max),
                       csv_num(static_cast<double>(b.depth)), csv_num(b.lower),
                       csv_num(b.upper)});
          boxes.push_back({{"depth", b.depth}, {"lower", b.lower}, {"upper", b.upper}});
        }
        if (lv.boxes.empty())
          csv.add_row({model, voice, csv_num(static_cast<double>(lv.n)),
                       csv_num(lv.median), csv_num(lv.min), csv_num(lv.max), "0", "", ""});
        jout.push_back({{"model", model},
                        {"voice", voice},
                        {"n", lv.n},
                        {"median", lv.median},
                        {"min", lv.min},
                        {"max", lv.max},
                        {"boxes", boxes}});
      }
    }
    detail::write_file(paths.reports_dir() / "letter_values_all_all.csv", csv.str());
    outcome.files.push_back("reports/letter_values_all_all.csv");
    detail::write_file(paths.reports_dir() / "letter_values_all_all.json",
                       jout.dump(2) + "\n");
    outcome.files.push_back("reports/letter_values_all_all.json");
  }

  // per-axis boxenplots faceted by model x voice
  auto axis_boxen = [&](const std::string& axis_name, const std::string& file,
                        const std::string& title, bool by_category) {
    const Axis* axis = cfg.design.find_axis(axis_name);
    if (!axis) return;
    std::vector<svg::LetterValueFacet> facets;
    for (const auto& model : models) {
      for (const auto& voice : voices) {
        auto by_level = offers_by_axis(model, voice, axis_name);
        if (by_level.empty()) continue;
        std::map<std::string, std::vector<double>> grouped;
        if (by_category) {
          for (const auto& lvl : axis->levels) {
            auto it = by_level.find(lvl.name);
            if (it == by_level.end()) continue;
            auto cat = lvl.meta.find("category");
            std::string key = cat != lvl.meta.end() ? cat->second
                              : lvl.kind == LevelKind::control ? "Control"
                                                               : lvl.name;
            auto& bucket = grouped[key];
            bucket.insert(bucket.end(), it->second.begin(), it->second.end());
          }
        } else {
          grouped = std::move(by_level);
        }

        svg::LetterValueFacet facet;
        facet.title = model + " / " + voice;
        if (by_category) {
          // control first, then categories by median descending
          std::vector<std::string> names;
          for (const auto& [k, v] : grouped)
            if (k != "Control") names.push_back(k);
          std::stable_sort(names.begin(), names.end(),
                           [&](const std::string& a, const std::string& b) {
                             return stats::median(grouped.at(a)) >
                                    stats::median(grouped.at(b));
                           });
          if (grouped.count("Control")) names.insert(names.begin(), "Control");
          for (const auto& k : names)
            facet.groups.push_back(letter_values(k, grouped.at(k)));
        } else if (axis_name == "pronoun") {
          for (const auto& [k, v] : grouped)  // plain name order
            facet.groups.push_back(letter_values(k, v));
        } else {
          for (const auto& k : detail::order_levels_by_median(*axis, grouped))
            facet.groups.push_back(letter_values(k, grouped.at(k)));
        }
        if (!facet.groups.empty()) facets.push_back(std::move(facet));
      }
    }
    if (!facets.empty())
      emit(file, svg::letter_value_chart(facets, title,
                                         static_cast<int>(voices.size())));
  };

  axis_boxen("pronoun", "boxen_pronoun_all_all.svg",
             "Recommended offer by pronoun, voice, and model", false);
  axis_boxen("major", "boxen_major_all_all.svg",
             "Recommended offer by major, voice, and model", false);
  axis_boxen("university", "boxen_university_category_all_all.svg",
             "Recommended offer by university category, voice, and model", true);

  // median heatmaps, major x pronoun, one per model x voice
  const Axis* major_axis = cfg.design.find_axis("major");
  const Axis* pronoun_axis = cfg.design.find_axis("pronoun");
  if (major_axis && pronoun_axis) {
    for (const auto& model : models) {
      for (const auto& voice : voices) {
        std::map<std::string, std::vector<double>> major_offers =
            offers_by_axis(model, voice, "major");
        if (major_offers.empty()) continue;
        std::vector<PivotObservation> obs;
        for (const auto& r : rows) {
          if (r.status != TransportStatus::ok || r.refusal || !r.offer) continue;
          if (r.model_id != model || std::string(to_string(r.voice)) != voice) continue;
          obs.push_back({r.levels.at("major"), r.levels.at("pronoun"), *r.offer});
        }
        std::vector<std::string> col_order;
        for (const auto& lvl : pronoun_axis->levels) col_order.push_back(lvl.name);
        std::sort(col_order.begin(), col_order.end());
        PivotTable pivot = pivot_median(
            obs, "major", "pronoun",
            detail::order_levels_by_median(*major_axis, major_offers), col_order);

        std::string stem = "heatmap_major_pronoun_" + detail::safe_name(model) + "_" +
                           voice;
        emit(stem + ".svg",
             svg::heatmap_chart(pivot, "Median offer by major and pronoun (" + model +
                                           ", " + voice + ")"));

        CsvWriter csv([&] {
          std::vector<std::string> cols{"major"};
          cols.insert(cols.end(), pivot.col_labels.begin(), pivot.col_labels.end());
          return cols;
        }());
        for (std::size_t r = 0; r < pivot.row_labels.size(); ++r) {
          std::vector<std::string> cells{pivot.row_labels[r]};
          for (const auto& cell : pivot.cells[r])
            cells.push_back(cell ? csv_num(*cell) : "");
          csv.add_row(std::move(cells));
        }
        detail::write_file(paths.reports_dir() / (stem + ".csv"), csv.str());
        outcome.files.push_back("reports/" + stem + ".csv");
      }
    }
  }

  // effect charts from the analyze stage's regression terms
  {
    std::ifstream in(paths.stats_dir() / "ols_terms.json", std::ios::binary);
    nlohmann::json terms = nlohmann::json::parse(in);
    for (const auto& model : models) {
      for (const std::string axis : {"major", "university"}) {
        if (!cfg.design.find_axis(axis)) continue;
        std::vector<svg::EffectRow> chart;
        for (const auto& t : terms) {
          if (t.at("model").get<std::string>() != model ||
              t.at("axis").get<std::string>() != axis)
            continue;
          chart.push_back({t.at("level").get<std::string>(),
                           t.at("coefficient").get<double>(),
                           t.at("ci95_lo").get<double>(), t.at("ci95_hi").get<double>()});
        }
        if (chart.empty()) continue;
        std::sort(chart.begin(), chart.end(),
                  [](const svg::EffectRow& a, const svg::EffectRow& b) {
                    return a.estimate != b.estimate ? a.estimate > b.estimate
                                                    : a.label < b.label;
                  });
        emit("effects_" + axis + "_" + detail::safe_name(model) + "_all.svg",
             svg::effect_chart(chart, "Effect of " + axis + " vs control (" + model + ")"));
      }
    }
  }

  manifest->report_complete = true;
  save_manifest(paths, *manifest);
  return outcome;
}

}  // namespace audit
