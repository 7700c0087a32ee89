// audit: controlled-perturbation harness for salary-offer bias audits.
//
//   audit validate --config FILE
//   audit run      --config FILE --out DIR (--mock | --live) [--models ...]
//                  [--reps N] [--parallel N] [--seed N]
//   audit analyze  RUN_DIR [--partial]
//   audit report   RUN_DIR
//
// Exit codes: 0 ok, 1 validation/config error, 2 transport failure,
// 3 incomplete stage.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "audit/analysis.hpp"
#include "audit/config.hpp"
#include "audit/pipeline.hpp"
#include "audit/report.hpp"
#include "audit/transport.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitTransport = 2;
constexpr int kExitIncompleteStage = 3;

int cmd_validate(const std::string& config_path) {
  audit::AuditConfig cfg = audit::load_config(config_path);
  std::vector<audit::MatrixCoordinate> coords = audit::validate_design(cfg.design);

  std::cout << "design ok (config hash " << cfg.config_hash << ")\n";
  for (const auto& axis : cfg.design.axes)
    std::cout << "  axis " << axis.name << ": " << axis.levels.size() << " levels\n";
  std::cout << "  voices: " << cfg.design.templates.size() << "\n";
  std::cout << "  coordinates: " << coords.size() << "\n";
  std::cout << "  queries per model (x" << cfg.reps << " reps): "
            << coords.size() * static_cast<std::size_t>(cfg.reps) << "\n";
  std::cout << "  total queries (" << cfg.models.size() << " models): "
            << coords.size() * cfg.models.size() * static_cast<std::size_t>(cfg.reps)
            << "\n";
  return kExitOk;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, bool mock,
            bool live, const std::vector<std::string>& models,
            std::optional<int> reps, std::optional<int> parallel,
            std::optional<std::uint64_t> seed) {
  audit::AuditConfig cfg = audit::load_config(config_path);
  if (mock == live)
    throw audit::ConfigError("pass exactly one of --mock or --live");
  if (mock) {
    for (auto& m : cfg.models) m.endpoint_url = "mock";
  } else {
    for (const auto& m : cfg.models) {
      if (m.is_mock()) continue;
      if (m.auth_env.empty())
        throw audit::ConfigError("model " + m.model_id +
                                 " has no auth_env configured for --live");
      const char* token = std::getenv(m.auth_env.c_str());
      if (!token || !*token)
        throw audit::ConfigError("environment variable " + m.auth_env +
                                 " is not set (required by model " + m.model_id + ")");
    }
  }
  if (parallel) cfg.execution.parallel = *parallel;
  if (seed) cfg.oracle.seed = *seed;

  audit::RunPaths paths{fs::path(out_dir)};
  fs::create_directories(paths.dir);
  // pin the exact config next to the log so analyze/report need no flags
  fs::path pinned = paths.dir / "config";
  if (!fs::exists(pinned)) fs::copy_file(config_path, pinned);

  audit::RoutingTransport transport(cfg.oracle, cfg.design, cfg.execution.timeout_s);
  audit::RunOutcome outcome = audit::run_stage(cfg, paths, transport, models, reps);

  std::cout << "planned " << outcome.planned << ", already complete "
            << outcome.already_done << ", executed ok " << outcome.executed_ok
            << ", failed " << outcome.executed_failed << "\n";
  if (outcome.log_tail_truncated)
    std::cerr << "warning: dropped a torn trailing record from raw.log\n";
  if (outcome.aborted) {
    std::cerr << "aborted: " << outcome.abort_reason << " (run is resumable)\n";
    return kExitTransport;
  }
  if (!outcome.complete) {
    std::cerr << "run incomplete\n";
    return kExitTransport;
  }
  std::cout << "raw log complete: " << paths.raw_log().string() << "\n";
  return kExitOk;
}

audit::AuditConfig load_run_config(const audit::RunPaths& paths) {
  fs::path pinned = paths.dir / "config";
  if (!fs::exists(pinned))
    throw audit::StageError("run", "no pinned config in " + paths.dir.string() +
                                       "; run the 'run' stage first");
  return audit::load_config(pinned);
}

int cmd_analyze(const std::string& run_dir, bool partial) {
  audit::RunPaths paths{fs::path(run_dir)};
  audit::AuditConfig cfg = load_run_config(paths);
  audit::AnalyzeOutcome outcome = audit::analyze_stage(cfg, paths, partial);
  std::cout << "analyzed " << outcome.rows << " records, " << outcome.offers
            << " offers, " << outcome.parse.refusals << " refusals";
  if (outcome.parse.review_flagged)
    std::cout << " (" << outcome.parse.review_flagged << " flagged for review)";
  std::cout << "\n";
  for (const auto& [model, r2] : outcome.adjusted_r2)
    std::cout << "  " << model << ": adjusted r2 " << r2 << "\n";
  std::cout << "tables written to " << paths.stats_dir().string() << "\n";
  return kExitOk;
}

int cmd_report(const std::string& run_dir) {
  audit::RunPaths paths{fs::path(run_dir)};
  audit::AuditConfig cfg = load_run_config(paths);
  audit::ReportOutcome outcome = audit::report_stage(cfg, paths);
  for (const auto& f : outcome.files) std::cout << f << "\n";
  std::cout << outcome.files.size() << " report files written\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"controlled-perturbation audit harness for salary-offer bias"};
  app.require_subcommand(1);

  std::string config_path, out_dir, run_dir;
  bool mock = false, live = false, partial = false;
  std::vector<std::string> models;
  std::optional<int> reps, parallel;
  std::optional<std::uint64_t> seed;

  auto* validate = app.add_subcommand("validate", "check a design and print its counts");
  validate->add_option("--config", config_path, "audit config file")->required();

  auto* run = app.add_subcommand("run", "execute the planned queries into a run directory");
  run->add_option("--config", config_path, "audit config file")->required();
  run->add_option("--out", out_dir, "run directory")->required();
  run->add_flag("--mock", mock, "use the built-in synthetic oracle for every model");
  run->add_flag("--live", live, "query the configured live endpoints");
  run->add_option("--models", models, "restrict to these model ids");
  run->add_option(
      "--reps",
      [&reps](const std::vector<std::string>& v) {
        reps = std::stoi(v.at(0));
        return true;
      },
      "override repetitions per prompt");
  run->add_option(
      "--parallel",
      [&parallel](const std::vector<std::string>& v) {
        parallel = std::stoi(v.at(0));
        return true;
      },
      "max in-flight requests");
  run->add_option(
      "--seed",
      [&seed](const std::vector<std::string>& v) {
        seed = std::stoull(v.at(0));
        return true;
      },
      "override the oracle seed");

  auto* analyze = app.add_subcommand("analyze", "parse the raw log and emit stats tables");
  analyze->add_option("run_dir", run_dir, "run directory")->required();
  analyze->add_flag("--partial", partial, "analyze an incomplete raw log");

  auto* report = app.add_subcommand("report", "render SVG/CSV reports from a run");
  report->add_option("run_dir", run_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(validate)) return cmd_validate(config_path);
    if (app.got_subcommand(run))
      return cmd_run(config_path, out_dir, mock, live, models, reps, parallel, seed);
    if (app.got_subcommand(analyze)) return cmd_analyze(run_dir, partial);
    if (app.got_subcommand(report)) return cmd_report(run_dir);
  } catch (const audit::StageError& e) {
    std::cerr << "error (missing stage '" << e.stage() << "'): " << e.what() << "\n";
    return kExitIncompleteStage;
  } catch (const audit::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const audit::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const audit::stats::OlsRankError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitTransport;
  }
  return kExitOk;
}
