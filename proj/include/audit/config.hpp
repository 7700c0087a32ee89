#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "audit/design.hpp"
#include "audit/rng.hpp"

// Loads the declarative audit config: the factorial design, model targets,
// repetition count, execution policy, oracle parameters, and analysis knobs.
// One file drives the whole pipeline; its hash pins a run to its design.

namespace audit {

struct ModelTarget {
  std::string model_id;
  std::string endpoint_url;  // "mock" selects the in-process oracle
  std::string auth_env;      // environment variable holding the bearer token
  nlohmann::json request_params = nlohmann::json::object();  // sent verbatim

  bool is_mock() const { return endpoint_url == "mock" || endpoint_url.empty(); }
};

struct ExecutionPolicy {
  int parallel = 8;
  int max_retries = 4;
  int backoff_initial_ms = 250;
  double backoff_factor = 2.0;
  int timeout_s = 120;
  double rate_limit_rps = 0.0;  // per model; 0 disables
};

struct OracleSpec {
  std::uint64_t seed = 1;
  // base offer by model_id ("*" as fallback), then voice
  std::map<std::string, std::map<std::string, double>> base_offers;
  // additive effect by axis name, then level name; missing levels contribute 0
  std::map<std::string, std::map<std::string, double>> effects;
  double noise_sd = 0.0;
  double rounding_quantum = 5000.0;
  double refusal_prob = 0.0;
  double range_prob = 0.0;
  double verbose_prob = 0.0;
  int latency_ms = 0;  // simulated per-request service time

  double base_offer(const std::string& model_id, Voice voice) const {
    auto by_model = base_offers.find(model_id);
    if (by_model == base_offers.end()) by_model = base_offers.find("*");
    if (by_model == base_offers.end())
      throw std::runtime_error("oracle spec has no base offer for model " + model_id);
    auto by_voice = by_model->second.find(to_string(voice));
    if (by_voice == by_model->second.end())
      throw std::runtime_error("oracle spec has no base offer for voice " +
                               std::string(to_string(voice)));
    return by_voice->second;
  }

  double effect(const std::string& axis, const std::string& level) const {
    auto a = effects.find(axis);
    if (a == effects.end()) return 0.0;
    auto l = a->second.find(level);
    return l == a->second.end() ? 0.0 : l->second;
  }
};

struct AnalysisSettings {
  double significance_threshold = 0.0005;  // 0.05 / 100
  double omnibus_alpha = 0.05;
  bool gate_pairwise_on_omnibus = true;
};

struct AuditConfig {
  ConditionMatrix design;
  std::vector<ModelTarget> models;
  int reps = 1;
  ExecutionPolicy execution;
  OracleSpec oracle;
  AnalysisSettings analysis;
  std::string config_hash;  // hex fnv1a64 of the file bytes
};

class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline LevelKind level_kind_from_string(const std::string& s) {
  if (s == "treatment") return LevelKind::treatment;
  if (s == "control") return LevelKind::control;
  if (s == "nonce") return LevelKind::nonce;
  throw ConfigError("unknown level kind: " + s);
}

inline std::map<std::string, std::string> string_map(const nlohmann::json& j) {
  std::map<std::string, std::string> out;
  for (auto it = j.begin(); it != j.end(); ++it)
    out[it.key()] = it.value().get<std::string>();
  return out;
}

}  // namespace detail

inline ConditionMatrix design_from_json(const nlohmann::json& j) {
  ConditionMatrix design;
  for (const auto& ja : j.at("axes")) {
    Axis axis;
    axis.name = ja.at("name").get<std::string>();
    for (const auto& jl : ja.at("levels")) {
      ConditionLevel lvl;
      lvl.name = jl.at("name").get<std::string>();
      lvl.kind = detail::level_kind_from_string(jl.value("kind", "treatment"));
      if (jl.contains("fragments")) lvl.fragments = detail::string_map(jl.at("fragments"));
      if (jl.contains("meta")) lvl.meta = detail::string_map(jl.at("meta"));
      axis.levels.push_back(std::move(lvl));
    }
    design.axes.push_back(std::move(axis));
  }
  for (const auto& jt : j.at("templates")) {
    PromptTemplate t;
    t.voice = voice_from_string(jt.at("voice").get<std::string>());
    t.body = jt.at("body").get<std::string>();
    if (jt.contains("control_variants"))
      t.control_variants = detail::string_map(jt.at("control_variants"));
    design.templates.push_back(std::move(t));
  }
  return design;
}

inline OracleSpec oracle_from_json(const nlohmann::json& j) {
  OracleSpec spec;
  spec.seed = j.value("seed", std::uint64_t{1});
  if (j.contains("base_offers"))
    for (auto it = j.at("base_offers").begin(); it != j.at("base_offers").end(); ++it)
      for (auto v = it.value().begin(); v != it.value().end(); ++v)
        spec.base_offers[it.key()][v.key()] = v.value().get<double>();
  if (j.contains("effects"))
    for (auto it = j.at("effects").begin(); it != j.at("effects").end(); ++it)
      for (auto l = it.value().begin(); l != it.value().end(); ++l)
        spec.effects[it.key()][l.key()] = l.value().get<double>();
  spec.noise_sd = j.value("noise_sd", 0.0);
  spec.rounding_quantum = j.value("rounding_quantum", 5000.0);
  spec.refusal_prob = j.value("refusal_prob", 0.0);
  spec.range_prob = j.value("range_prob", 0.0);
  spec.verbose_prob = j.value("verbose_prob", 0.0);
  spec.latency_ms = j.value("latency_ms", 0);
  if (spec.refusal_prob < 0 || spec.refusal_prob > 1 || spec.range_prob < 0 ||
      spec.range_prob > 1 || spec.verbose_prob < 0 || spec.verbose_prob > 1)
    throw ConfigError("oracle probabilities must lie in [0,1]");
  if (!(spec.rounding_quantum > 0)) throw ConfigError("oracle rounding_quantum must be > 0");
  return spec;
}

inline AuditConfig config_from_json(const nlohmann::json& j) {
  AuditConfig cfg;
  cfg.design = design_from_json(j.at("design"));

  if (!j.contains("models") || j.at("models").empty())
    throw ConfigError("config must declare at least one model target");
  for (const auto& jm : j.at("models")) {
    ModelTarget m;
    m.model_id = jm.at("model_id").get<std::string>();
    if (m.model_id.empty()) throw ConfigError("model_id must be non-empty");
    m.endpoint_url = jm.value("endpoint", "mock");
    m.auth_env = jm.value("auth_env", "");
    if (jm.contains("params")) m.request_params = jm.at("params");
    cfg.models.push_back(std::move(m));
  }

  cfg.reps = j.value("reps", 1);
  if (cfg.reps < 1) throw ConfigError("reps must be >= 1");

  if (j.contains("execution")) {
    const auto& je = j.at("execution");
    cfg.execution.parallel = je.value("parallel", 8);
    cfg.execution.max_retries = je.value("max_retries", 4);
    cfg.execution.backoff_initial_ms = je.value("backoff_initial_ms", 250);
    cfg.execution.backoff_factor = je.value("backoff_factor", 2.0);
    cfg.execution.timeout_s = je.value("timeout_s", 120);
    cfg.execution.rate_limit_rps = je.value("rate_limit_rps", 0.0);
    if (cfg.execution.parallel < 1) throw ConfigError("execution.parallel must be >= 1");
  }

  if (j.contains("oracle")) cfg.oracle = oracle_from_json(j.at("oracle"));

  if (j.contains("analysis")) {
    const auto& ja = j.at("analysis");
    cfg.analysis.significance_threshold = ja.value("significance_threshold", 0.0005);
    cfg.analysis.omnibus_alpha = ja.value("omnibus_alpha", 0.05);
    cfg.analysis.gate_pairwise_on_omnibus = ja.value("gate_pairwise_on_omnibus", true);
  }
  return cfg;
}

inline AuditConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string bytes = buf.str();

  nlohmann::json j = nlohmann::json::parse(bytes, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON: " + path.string());

  AuditConfig cfg = config_from_json(j);
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  cfg.config_hash = hex;
  return cfg;
}

}  // namespace audit
