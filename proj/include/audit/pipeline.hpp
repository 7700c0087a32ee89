#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "audit/client.hpp"
#include "audit/config.hpp"
#include "audit/design.hpp"
#include "audit/jsonl.hpp"
#include "audit/parser.hpp"

// Run-directory plumbing shared by the CLI subcommands: the manifest that
// pins a run to its config, the run stage (plan -> resume -> execute), and
// the parse stage that turns the raw log into the parsed table.
//
// Layout: manifest, raw.log, parsed.table, parsed.review, stats/, reports/

namespace audit {

namespace fs = std::filesystem;

struct RunPaths {
  fs::path dir;

  fs::path manifest() const { return dir / "manifest"; }
  fs::path raw_log() const { return dir / "raw.log"; }
  fs::path parsed_table() const { return dir / "parsed.table"; }
  fs::path review_file() const { return dir / "parsed.review"; }
  fs::path stats_dir() const { return dir / "stats"; }
  fs::path reports_dir() const { return dir / "reports"; }
};

// A stage that cannot run because its inputs are missing or incomplete.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct Manifest {
  int schema_version = 1;
  std::string run_id;
  std::string config_hash;
  std::vector<std::string> models;
  int reps = 0;
  std::uint64_t planned = 0;
  std::int64_t created_ms = 0;
  bool run_complete = false;
  bool analyze_complete = false;
  bool report_complete = false;
};

inline void save_manifest(const RunPaths& paths, const Manifest& m) {
  nlohmann::json j{{"schema_version", m.schema_version},
                   {"run_id", m.run_id},
                   {"config_hash", m.config_hash},
                   {"models", m.models},
                   {"reps", m.reps},
                   {"planned", m.planned},
                   {"created_ms", m.created_ms},
                   {"stages",
                    {{"run", m.run_complete},
                     {"analyze", m.analyze_complete},
                     {"report", m.report_complete}}}};
  std::ofstream out(paths.manifest(), std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest: " + paths.manifest().string());
  out << j.dump(2) << '\n';
}

inline std::optional<Manifest> load_manifest(const RunPaths& paths) {
  std::ifstream in(paths.manifest(), std::ios::binary);
  if (!in) return std::nullopt;
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded())
    throw std::runtime_error("manifest is not valid JSON: " + paths.manifest().string());
  Manifest m;
  m.schema_version = j.value("schema_version", 1);
  m.run_id = j.value("run_id", "");
  m.config_hash = j.value("config_hash", "");
  m.models = j.value("models", std::vector<std::string>{});
  m.reps = j.value("reps", 0);
  m.planned = j.value("planned", std::uint64_t{0});
  m.created_ms = j.value("created_ms", std::int64_t{0});
  if (j.contains("stages")) {
    m.run_complete = j.at("stages").value("run", false);
    m.analyze_complete = j.at("stages").value("analyze", false);
    m.report_complete = j.at("stages").value("report", false);
  }
  return m;
}

struct RunOutcome {
  std::size_t planned = 0;
  std::size_t already_done = 0;
  std::size_t executed_ok = 0;
  std::size_t executed_failed = 0;
  bool complete = false;
  bool aborted = false;
  std::string abort_reason;
  bool log_tail_truncated = false;
};

// plan -> resume -> execute; idempotent, append-only. A rerun over a complete
// log does nothing and reports complete.
inline RunOutcome run_stage(const AuditConfig& cfg, const RunPaths& paths,
                            Transport& transport,
                            const std::vector<std::string>& model_filter = {},
                            std::optional<int> reps_override = std::nullopt) {
  std::vector<MatrixCoordinate> coords = validate_design(cfg.design);

  std::vector<ModelTarget> models;
  for (const auto& m : cfg.models) {
    if (model_filter.empty() ||
        std::find(model_filter.begin(), model_filter.end(), m.model_id) !=
            model_filter.end())
      models.push_back(m);
  }
  if (models.empty()) throw ConfigError("model filter matched no configured model");

  const int reps = reps_override.value_or(cfg.reps);
  std::vector<QueryStub> planned = plan_run(cfg.design, coords, models, reps);

  fs::create_directories(paths.dir);
  Manifest manifest;
  if (auto existing = load_manifest(paths)) {
    manifest = *existing;
    if (manifest.config_hash != cfg.config_hash)
      throw ConfigError("run directory was created from a different config (hash " +
                        manifest.config_hash + " vs " + cfg.config_hash + ")");
  } else {
    manifest.run_id = cfg.config_hash.substr(0, 12);
    manifest.config_hash = cfg.config_hash;
    manifest.created_ms = detail::now_ms();
  }
  manifest.reps = reps;
  manifest.models.clear();
  for (const auto& m : models) manifest.models.push_back(m.model_id);
  manifest.planned = planned.size();

  ResumeState done = read_completed(paths.raw_log());
  std::vector<QueryStub> remaining;
  for (const auto& s : planned)
    if (!done.completed_ids.count(s.query_id)) remaining.push_back(s);

  RunOutcome outcome;
  outcome.planned = planned.size();
  outcome.already_done = planned.size() - remaining.size();
  outcome.log_tail_truncated = done.truncated_tail;

  std::map<std::string, ModelTarget> targets;
  for (const auto& m : models) targets[m.model_id] = m;

  if (!remaining.empty()) {
    JsonlWriter log(paths.raw_log());
    ExecuteResult exec =
        execute(cfg.design, remaining, targets, cfg.execution, transport, log);
    outcome.executed_ok = exec.ok;
    outcome.executed_failed = exec.failed;
    outcome.aborted = exec.aborted;
    outcome.abort_reason = exec.abort_reason;
  }

  outcome.complete =
      outcome.already_done + outcome.executed_ok + outcome.executed_failed ==
      outcome.planned;
  manifest.run_complete = outcome.complete;
  save_manifest(paths, manifest);
  return outcome;
}

// One raw-log record joined with its parse results; the unit every analysis
// consumes. Rows are sorted by (model, coordinate key, rep) so downstream
// outputs do not depend on completion order.
struct AnalysisRow {
  std::string query_id;
  std::string model_id;
  Voice voice = Voice::employee;
  std::map<std::string, std::string> levels;  // axis name -> level name
  int rep = 0;
  TransportStatus status = TransportStatus::ok;
  bool refusal = true;
  std::optional<double> offer;
  std::uint64_t length_bytes = 0;
  bool verbose = false;
};

struct ParseOutcome {
  std::size_t responses = 0;
  std::size_t refusals = 0;
  std::size_t review_flagged = 0;
  std::size_t transport_failures = 0;
};

// raw.log -> parsed.table (+ parsed.review for unparsed magnitude shorthand).
// Pure re-coding of the log: deterministic and idempotent.
inline ParseOutcome parse_stage(const RunPaths& paths) {
  if (!fs::exists(paths.raw_log()))
    throw StageError("run", "raw.log not found in " + paths.dir.string() +
                                "; run the 'run' stage first");
  JsonlReadResult raw = read_jsonl(paths.raw_log());

  ParseOutcome outcome;
  std::ofstream table(paths.parsed_table(), std::ios::binary | std::ios::trunc);
  std::ofstream review(paths.review_file(), std::ios::binary | std::ios::trunc);
  if (!table || !review)
    throw std::runtime_error("cannot write parse outputs in " + paths.dir.string());

  // deterministic output order regardless of completion order
  std::vector<const nlohmann::json*> records;
  records.reserve(raw.records.size());
  for (const auto& rec : raw.records) records.push_back(&rec);
  std::stable_sort(records.begin(), records.end(),
                   [](const nlohmann::json* a, const nlohmann::json* b) {
                     return a->at("query_id").get<std::string>() <
                            b->at("query_id").get<std::string>();
                   });

  for (const auto* recp : records) {
    const auto& rec = *recp;
    if (rec.value("status", "") != "ok") {
      ++outcome.transport_failures;
      continue;
    }
    std::string qid = rec.at("query_id").get<std::string>();
    std::string response = rec.value("response", "");
    ParsedResponse p = parse_response(response, qid);
    ++outcome.responses;
    if (p.refusal) ++outcome.refusals;

    nlohmann::json values = nlohmann::json::array();
    for (const auto& m : p.dollar_values) values.push_back(m.cents);
    nlohmann::json out{{"query_id", p.query_id},
                       {"values_cents", values},
                       {"refusal", p.refusal},
                       {"length_bytes", p.response_length_bytes},
                       {"verbose", p.verbose}};
    if (p.resolved_offer) out["offer"] = *p.resolved_offer;
    table << out.dump() << '\n';

    if (p.needs_review) {
      ++outcome.review_flagged;
      review << nlohmann::json{{"query_id", qid}, {"response", response}}.dump() << '\n';
    }
  }
  return outcome;
}

inline std::vector<AnalysisRow> load_analysis_rows(const ConditionMatrix& design,
                                                   const RunPaths& paths) {
  if (!fs::exists(paths.raw_log()))
    throw StageError("run", "raw.log not found in " + paths.dir.string());
  if (!fs::exists(paths.parsed_table()))
    throw StageError("analyze", "parsed.table not found in " + paths.dir.string() +
                                    "; run 'analyze' first");

  JsonlReadResult parsed_read = read_jsonl(paths.parsed_table());
  std::map<std::string, nlohmann::json> parsed;
  for (auto& rec : parsed_read.records) {
    std::string key = rec.at("query_id").get<std::string>();
    parsed[key] = std::move(rec);
  }

  JsonlReadResult raw_read = read_jsonl(paths.raw_log());
  std::vector<AnalysisRow> rows;
  for (const auto& rec : raw_read.records) {
    AnalysisRow row;
    row.query_id = rec.at("query_id").get<std::string>();
    row.model_id = rec.at("model_id").get<std::string>();
    row.voice = voice_from_string(rec.at("voice").get<std::string>());
    row.rep = rec.value("rep", 0);
    row.status = transport_status_from_string(rec.value("status", "ok"));
    for (const auto& axis : design.axes) {
      auto it = rec.at("levels").find(axis.name);
      if (it == rec.at("levels").end())
        throw std::runtime_error("raw.log record missing axis " + axis.name);
      row.levels[axis.name] = it->get<std::string>();
    }
    auto p = parsed.find(row.query_id);
    if (p != parsed.end()) {
      row.refusal = p->second.value("refusal", true);
      if (p->second.contains("offer")) row.offer = p->second.at("offer").get<double>();
      row.length_bytes = p->second.value("length_bytes", std::uint64_t{0});
      row.verbose = p->second.value("verbose", false);
    }
    rows.push_back(std::move(row));
  }

  std::sort(rows.begin(), rows.end(), [](const AnalysisRow& a, const AnalysisRow& b) {
    if (a.model_id != b.model_id) return a.model_id < b.model_id;
    if (a.voice != b.voice) return a.voice < b.voice;
    if (a.levels != b.levels) return a.levels < b.levels;
    return a.rep < b.rep;
  });
  return rows;
}

}  // namespace audit
