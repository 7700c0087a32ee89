#include <catch2/catch.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "audit/analysis.hpp"
#include "audit/config.hpp"
#include "audit/pipeline.hpp"
#include "audit/report.hpp"
#include "audit/transport.hpp"

using namespace audit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("audit-pipe-" + std::to_string(::getpid()) + "-" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

AuditConfig smoke() {
  return load_config(std::string(AUDIT_CONFIG_DIR) + "/smoke.config");
}

RunOutcome run_mock(const AuditConfig& cfg, const RunPaths& paths) {
  OracleTransport transport(cfg.oracle, cfg.design);
  return run_stage(cfg, paths, transport);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          cur.push_back(c);
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        cells.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    cells.push_back(cur);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

TEST_CASE("run, analyze, and report produce the declared layout", "[pipeline]") {
  TempDir tmp;
  AuditConfig cfg = smoke();
  RunPaths paths{tmp.path / "run"};

  auto outcome = run_mock(cfg, paths);
  CHECK(outcome.planned == 180);
  CHECK(outcome.complete);
  CHECK(fs::exists(paths.raw_log()));
  CHECK(fs::exists(paths.manifest()));

  auto analysis = analyze_stage(cfg, paths);
  CHECK(analysis.rows == 180);
  for (const char* f :
       {"refusals.csv", "pairwise_models.csv", "pairwise_voices.csv",
        "pairwise_pronouns.csv", "omnibus.csv", "ols_summary.csv", "ols_terms.csv",
        "ols_terms.json", "effects_pronoun.csv", "effects_university.csv",
        "effects_major.csv"})
    CHECK(fs::exists(paths.stats_dir() / f));
  CHECK(fs::exists(paths.parsed_table()));

  auto report = report_stage(cfg, paths);
  CHECK_FALSE(report.files.empty());
  for (const auto& f : report.files) CHECK(fs::exists(paths.dir / f));

  auto manifest = load_manifest(paths);
  REQUIRE(manifest.has_value());
  CHECK(manifest->run_complete);
  CHECK(manifest->analyze_complete);
  CHECK(manifest->report_complete);
}

TEST_CASE("analyze without a run is a stage error", "[pipeline]") {
  TempDir tmp;
  AuditConfig cfg = smoke();
  RunPaths paths{tmp.path / "empty"};
  fs::create_directories(paths.dir);
  try {
    analyze_stage(cfg, paths);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "run");
  }
}

TEST_CASE("report before analyze is a stage error", "[pipeline]") {
  TempDir tmp;
  AuditConfig cfg = smoke();
  RunPaths paths{tmp.path / "run"};
  run_mock(cfg, paths);
  try {
    report_stage(cfg, paths);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "analyze");
  }
}

TEST_CASE("a run directory refuses a different config", "[pipeline]") {
  TempDir tmp;
  AuditConfig cfg = smoke();
  RunPaths paths{tmp.path / "run"};
  run_mock(cfg, paths);

  AuditConfig other = cfg;
  other.config_hash = "0000000000000000";
  OracleTransport transport(other.oracle, other.design);
  CHECK_THROWS_AS(run_stage(other, paths, transport), ConfigError);
}

TEST_CASE("incomplete log needs --partial", "[pipeline]") {
  TempDir tmp;
  AuditConfig cfg = smoke();
  RunPaths paths{tmp.path / "run"};
  run_mock(cfg, paths);

  // drop the final record and reset the completion marker
  auto records = read_jsonl(paths.raw_log()).records;
  {
    std::ofstream out(paths.raw_log(), std::ios::binary | std::ios::trunc);
    for (std::size_t i = 0; i + 1 < records.size(); ++i)
      out << records[i].dump() << "\n";
  }
  auto manifest = load_manifest(paths);
  manifest->run_complete = false;
  save_manifest(paths, *manifest);

  CHECK_THROWS_AS(analyze_stage(cfg, paths, false), StageError);
  auto outcome = analyze_stage(cfg, paths, true);
  CHECK(outcome.rows == records.size() - 1);
}

TEST_CASE("refusal summary arithmetic", "[pipeline]") {
  std::vector<AnalysisRow> rows;
  for (int i = 0; i < 10; ++i) {
    AnalysisRow r;
    r.model_id = "m";
    r.voice = Voice::employee;
    r.status = TransportStatus::ok;
    r.refusal = i == 0;
    if (!r.refusal) r.offer = 100000.0;
    r.length_bytes = i == 0 ? 400 : 8;
    r.verbose = i == 0;
    rows.push_back(r);
  }
  auto table = summarize_refusals(rows, {"m"});
  REQUIRE(table.size() == 2);  // employee and employer rows
  CHECK(table[0].n_total == 10);
  CHECK(table[0].n_refused == 1);
  CHECK(table[0].pct_refused == Approx(10.0));
  CHECK(table[0].mean_length_bytes == Approx((400.0 + 9 * 8.0) / 10.0));
  CHECK(table[0].n_over_100_bytes == 1);
  CHECK(table[0].pct_over_100_bytes == Approx(10.0));
  // empty employer stratum: zero counts, percentages defined as zero
  CHECK(table[1].n_total == 0);
  CHECK(table[1].pct_refused == 0.0);
  CHECK(table[1].mean_length_bytes == 0.0);
}

TEST_CASE("all-refusal group still reports lengths", "[pipeline]") {
  std::vector<AnalysisRow> rows;
  for (int i = 0; i < 4; ++i) {
    AnalysisRow r;
    r.model_id = "m";
    r.voice = Voice::employer;
    r.status = TransportStatus::ok;
    r.refusal = true;
    r.length_bytes = 250;
    r.verbose = true;
    rows.push_back(r);
  }
  auto table = summarize_refusals(rows, {"m"});
  CHECK(table[1].pct_refused == Approx(100.0));
  CHECK(table[1].mean_length_bytes == Approx(250.0));
  CHECK(table[1].pct_over_100_bytes == Approx(100.0));
}

TEST_CASE("magnitude shorthand responses land in the review file", "[pipeline]") {
  TempDir tmp;
  RunPaths paths{tmp.path};
  {
    std::ofstream out(paths.raw_log(), std::ios::binary);
    out << nlohmann::json{{"query_id", "q1"},
                          {"voice", "employee"},
                          {"levels", {{"pronoun", "she"}}},
                          {"model_id", "m"},
                          {"rep", 0},
                          {"prompt", "p"},
                          {"status", "ok"},
                          {"response", "$100k"},
                          {"t_request_ms", 0},
                          {"t_response_ms", 0}}
               .dump()
        << "\n";
    out << nlohmann::json{{"query_id", "q2"},
                          {"voice", "employee"},
                          {"levels", {{"pronoun", "she"}}},
                          {"model_id", "m"},
                          {"rep", 1},
                          {"prompt", "p"},
                          {"status", "ok"},
                          {"response", "$120,000"},
                          {"t_request_ms", 0},
                          {"t_response_ms", 0}}
               .dump()
        << "\n";
  }
  auto outcome = parse_stage(paths);
  CHECK(outcome.responses == 2);
  CHECK(outcome.refusals == 1);
  CHECK(outcome.review_flagged == 1);
  auto review = read_jsonl(paths.review_file()).records;
  REQUIRE(review.size() == 1);
  CHECK(review[0].at("query_id").get<std::string>() == "q1");
}

TEST_CASE("planted major effect shows in every pronoun column of the heatmap",
          "[pipeline]") {
  TempDir tmp;
  AuditConfig cfg = smoke();
  cfg.oracle.noise_sd = 0.0;
  cfg.oracle.refusal_prob = 0.0;
  cfg.oracle.range_prob = 0.0;
  cfg.oracle.verbose_prob = 0.0;
  cfg.oracle.effects.clear();
  cfg.oracle.effects["major"]["Computer Science"] = 5000.0;
  RunPaths paths{tmp.path / "run"};
  run_mock(cfg, paths);
  analyze_stage(cfg, paths);
  report_stage(cfg, paths);

  auto table =
      read_csv(paths.reports_dir() / "heatmap_major_pronoun_mock-model_employee.csv");
  REQUIRE(table.size() > 2);
  std::vector<std::string> header = table[0];
  std::vector<std::string> cs_row, control_row;
  for (const auto& row : table) {
    if (row[0] == "Computer Science") cs_row = row;
    if (row[0] == "none") control_row = row;
  }
  REQUIRE_FALSE(cs_row.empty());
  REQUIRE_FALSE(control_row.empty());
  for (std::size_t c = 1; c < header.size(); ++c) {
    double cs = std::stod(cs_row[c]);
    double control = std::stod(control_row[c]);
    CHECK(cs - control == Approx(5000.0).margin(1e-9));
  }
}

TEST_CASE("planted effects surface in the OLS effect tables", "[pipeline]") {
  TempDir tmp;
  AuditConfig cfg = smoke();  // smoke oracle plants CS +6000, History -10000
  RunPaths paths{tmp.path / "run"};
  run_mock(cfg, paths);
  analyze_stage(cfg, paths);

  auto table = read_csv(paths.stats_dir() / "effects_major.csv");
  REQUIRE(table.size() >= 3);
  CHECK(table[0][0] == "Major / Model");
  // sorted by cross-model average, descending: CS on top, History at the bottom
  CHECK(table[1][0] == "Computer Science");
  CHECK(table.back()[0] == "History");
}

TEST_CASE("pipeline stages are byte-idempotent", "[pipeline]") {
  TempDir tmp;
  AuditConfig cfg = smoke();
  RunPaths paths{tmp.path / "run"};
  run_mock(cfg, paths);
  analyze_stage(cfg, paths);
  report_stage(cfg, paths);

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  };
  std::map<std::string, std::string> before;
  for (const auto& entry : fs::recursive_directory_iterator(paths.dir))
    if (entry.is_regular_file() && entry.path().filename() != "manifest")
      before[entry.path().string()] = slurp(entry.path());

  run_mock(cfg, paths);
  analyze_stage(cfg, paths);
  report_stage(cfg, paths);
  for (const auto& [file, content] : before) CHECK(slurp(file) == content);
}

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  TempDir out_dir;
  fs::path out_file = out_dir.path / "out.txt";
  std::string cmd = std::string(AUDIT_CLI_PATH) + " " + args + " > " +
                    out_file.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WEXITSTATUS(status);
  std::ifstream in(out_file, std::ios::binary);
  r.output.assign((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  return r;
}

std::string smoke_path() { return std::string(AUDIT_CONFIG_DIR) + "/smoke.config"; }

}  // namespace

TEST_CASE("cli validate prints the planned counts", "[pipeline]") {
  auto r = run_cli("validate --config " +
                   std::string(AUDIT_CONFIG_DIR) + "/paper-replica.config");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("coordinates: 7600") != std::string::npos);
  CHECK(r.output.find("queries per model (x13 reps): 98800") != std::string::npos);
  CHECK(r.output.find("total queries (4 models): 395200") != std::string::npos);
}

TEST_CASE("cli validate on a singleton design", "[pipeline]") {
  TempDir tmp;
  fs::path cfg = tmp.path / "singleton.config";
  {
    std::ofstream out(cfg);
    out << R"({"design":{"axes":[{"name":"axis","levels":[
            {"name":"only","kind":"control","fragments":{"x":"X"}}]}],
            "templates":[{"voice":"employee","body":"just {x}"}]},
            "models":[{"model_id":"m","endpoint":"mock"}],"reps":4})";
  }
  auto r = run_cli("validate --config " + cfg.string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("coordinates: 1") != std::string::npos);
  CHECK(r.output.find("(x4 reps): 4") != std::string::npos);
}

TEST_CASE("cli validate rejects a design missing its control level", "[pipeline]") {
  TempDir tmp;
  fs::path cfg = tmp.path / "nocontrol.config";
  {
    std::ofstream out(cfg);
    out << R"({"design":{"axes":[{"name":"pronoun","levels":[
            {"name":"she","kind":"treatment","fragments":{"x":"X"}}]}],
            "templates":[{"voice":"employee","body":"just {x}"}]},
            "models":[{"model_id":"m","endpoint":"mock"}],"reps":1})";
  }
  auto r = run_cli("validate --config " + cfg.string());
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("pronoun") != std::string::npos);
  CHECK(r.output.find("control") != std::string::npos);
}

TEST_CASE("cli run --mock on a two-model 2x2x3x5 design writes 360 records",
          "[pipeline]") {
  TempDir tmp;
  // smoke design (2 voices x 2x3x5 axes = 60 coordinates) with a second model
  nlohmann::json cfg_json;
  {
    std::ifstream in(smoke_path());
    cfg_json = nlohmann::json::parse(in);
  }
  cfg_json["models"].push_back({{"model_id", "mock-model-b"}, {"endpoint", "mock"}});
  fs::path cfg = tmp.path / "two-model.config";
  {
    std::ofstream out(cfg);
    out << cfg_json.dump();
  }
  fs::path run_dir = tmp.path / "run";
  auto r = run_cli("run --config " + cfg.string() + " --out " + run_dir.string() +
                   " --mock");
  CHECK(r.exit_code == 0);
  CHECK(read_jsonl(run_dir / "raw.log").records.size() == 360);
}

TEST_CASE("cli run --live without the auth variable fails fast", "[pipeline]") {
  TempDir tmp;
  nlohmann::json cfg_json;
  {
    std::ifstream in(smoke_path());
    cfg_json = nlohmann::json::parse(in);
  }
  cfg_json["models"] = nlohmann::json::array(
      {{{"model_id", "live-model"},
        {"endpoint", "https://api.example.com/v1/chat/completions"},
        {"auth_env", "AUDIT_TEST_TOKEN_THAT_IS_NOT_SET"}}});
  fs::path cfg = tmp.path / "live.config";
  {
    std::ofstream out(cfg);
    out << cfg_json.dump();
  }
  auto r = run_cli("run --config " + cfg.string() + " --out " +
                   (tmp.path / "run").string() + " --live");
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("AUDIT_TEST_TOKEN_THAT_IS_NOT_SET") != std::string::npos);
}

TEST_CASE("cli requires exactly one of --mock or --live", "[pipeline]") {
  auto r = run_cli("run --config " + smoke_path() + " --out /tmp/never-used");
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("--mock or --live") != std::string::npos);
}

TEST_CASE("cli analyze on an empty run dir names the missing stage", "[pipeline]") {
  TempDir tmp;
  fs::create_directories(tmp.path / "empty");
  auto r = run_cli("analyze " + (tmp.path / "empty").string());
  CHECK(r.exit_code == 3);
  CHECK(r.output.find("missing stage 'run'") != std::string::npos);
}

TEST_CASE("cli report before analyze names the missing stage", "[pipeline]") {
  TempDir tmp;
  fs::path run_dir = tmp.path / "run";
  auto r1 = run_cli("run --config " + smoke_path() + " --out " + run_dir.string() +
                    " --mock");
  REQUIRE(r1.exit_code == 0);
  auto r2 = run_cli("report " + run_dir.string());
  CHECK(r2.exit_code == 3);
  CHECK(r2.output.find("missing stage 'analyze'") != std::string::npos);
}

TEST_CASE("cli full pipeline exits cleanly", "[pipeline]") {
  TempDir tmp;
  fs::path run_dir = tmp.path / "run";
  CHECK(run_cli("run --config " + smoke_path() + " --out " + run_dir.string() +
                " --mock")
            .exit_code == 0);
  CHECK(run_cli("analyze " + run_dir.string()).exit_code == 0);
  auto rep = run_cli("report " + run_dir.string());
  CHECK(rep.exit_code == 0);
  CHECK(rep.output.find("report files written") != std::string::npos);
}

TEST_CASE("battery family size multiplies across gated-in invocations", "[pipeline]") {
  // constant oracle: every Dunn invocation is degenerate, p_raw = 1, so the
  // adjusted value in the emitted table equals the battery family exactly
  TempDir tmp;
  AuditConfig cfg = smoke();
  cfg.oracle.noise_sd = 0.0;
  cfg.oracle.refusal_prob = 0.0;
  cfg.oracle.range_prob = 0.0;
  cfg.oracle.verbose_prob = 0.0;
  cfg.oracle.effects.clear();
  cfg.oracle.base_offers.clear();
  cfg.oracle.base_offers["*"] = {{"employee", 100000.0}, {"employer", 100000.0}};
  cfg.analysis.gate_pairwise_on_omnibus = false;

  RunPaths paths{tmp.path / "run"};
  run_mock(cfg, paths);
  analyze_stage(cfg, paths);

  // 1 model x 2 voices x C(2,2)=1 pronoun pair each -> family 2
  auto rows = read_csv(paths.stats_dir() / "pairwise_pronouns.csv");
  REQUIRE(rows.size() == 3);  // header + one row per voice
  for (std::size_t r = 1; r < rows.size(); ++r) {
    CHECK(rows[r][7] == "2");      // p_adj = 1 * family
    CHECK(rows[r][8] == "FALSE");
  }

  // with the gate on, degenerate omnibus suppresses every pairwise row
  cfg.analysis.gate_pairwise_on_omnibus = true;
  analyze_stage(cfg, paths);
  auto gated = read_csv(paths.stats_dir() / "pairwise_pronouns.csv");
  CHECK(gated.size() == 1);  // header only
  auto omnibus = read_csv(paths.stats_dir() / "omnibus.csv");
  bool all_degenerate = true;
  for (std::size_t r = 1; r < omnibus.size(); ++r)
    if (omnibus[r][6] != "TRUE") all_degenerate = false;
  CHECK(all_degenerate);
}
