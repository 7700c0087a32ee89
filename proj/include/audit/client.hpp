#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "audit/config.hpp"
#include "audit/design.hpp"
#include "audit/jsonl.hpp"
#include "audit/rng.hpp"

// Query planning and execution: expands (coordinates x models x reps) into
// stubs with stable ids, runs them through a transport with bounded
// parallelism and retry/backoff, and appends one immutable record per
// resolved query to the raw log. Partial progress is durable; resume() walks
// the log and returns only what is missing.

namespace audit {

enum class TransportStatus { ok, http_error, timeout, exhausted_retries };

inline const char* to_string(TransportStatus s) {
  switch (s) {
    case TransportStatus::ok: return "ok";
    case TransportStatus::http_error: return "http_error";
    case TransportStatus::timeout: return "timeout";
    case TransportStatus::exhausted_retries: return "exhausted_retries";
  }
  return "?";
}

inline TransportStatus transport_status_from_string(const std::string& s) {
  if (s == "ok") return TransportStatus::ok;
  if (s == "http_error") return TransportStatus::http_error;
  if (s == "timeout") return TransportStatus::timeout;
  if (s == "exhausted_retries") return TransportStatus::exhausted_retries;
  throw std::invalid_argument("unknown transport status: " + s);
}

// Prompts are not materialized at plan time: rendering is pure, so execute()
// re-renders per request instead of holding ~400k prompt strings in memory.
struct QueryStub {
  std::string query_id;
  MatrixCoordinate coordinate;
  std::string coord_key;
  std::string model_id;
  int repetition_index = 0;
};

struct QueryRecord {
  QueryStub stub;
  std::string rendered_prompt;
  TransportStatus status = TransportStatus::ok;
  std::optional<std::string> raw_response;  // present iff status == ok
  std::string error_detail;                 // raw body / reason when not ok
  std::int64_t t_request_ms = 0;
  std::int64_t t_response_ms = 0;
};

inline std::string make_query_id(const std::string& coord_key, const std::string& model_id,
                                 int rep) {
  std::string key = coord_key + '\x1e' + model_id + '\x1e' + std::to_string(rep);
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(fnv1a64(key)));
  return hex;
}

// |coordinates| x |models| x reps stubs, in plan order (model, coordinate,
// rep). Ids are collision-checked: a clash would corrupt resume bookkeeping.
inline std::vector<QueryStub> plan_run(const ConditionMatrix& design,
                                       const std::vector<MatrixCoordinate>& coordinates,
                                       const std::vector<ModelTarget>& models, int reps) {
  if (reps < 1) throw std::invalid_argument("plan_run: reps must be >= 1");
  if (models.empty()) throw std::invalid_argument("plan_run: need at least one model");

  std::vector<QueryStub> stubs;
  stubs.reserve(coordinates.size() * models.size() * static_cast<std::size_t>(reps));
  std::set<std::string> seen;
  for (const auto& model : models) {
    for (const auto& coord : coordinates) {
      QueryStub base;
      base.coordinate = coord;
      base.coord_key = coordinate_key(design, coord);
      base.model_id = model.model_id;
      for (int r = 0; r < reps; ++r) {
        QueryStub stub = base;
        stub.repetition_index = r;
        stub.query_id = make_query_id(stub.coord_key, stub.model_id, r);
        if (!seen.insert(stub.query_id).second)
          throw std::runtime_error("query id collision: " + stub.query_id);
        stubs.push_back(std::move(stub));
      }
    }
  }
  return stubs;
}

inline nlohmann::json record_to_json(const ConditionMatrix& design, const QueryRecord& rec) {
  nlohmann::json levels = nlohmann::json::object();
  for (std::size_t a = 0; a < design.axes.size(); ++a)
    levels[design.axes[a].name] = level_of(design, rec.stub.coordinate, a).name;
  nlohmann::json j{{"query_id", rec.stub.query_id},
                   {"voice", to_string(rec.stub.coordinate.voice)},
                   {"levels", levels},
                   {"model_id", rec.stub.model_id},
                   {"rep", rec.stub.repetition_index},
                   {"prompt", rec.rendered_prompt},
                   {"status", to_string(rec.status)},
                   {"t_request_ms", rec.t_request_ms},
                   {"t_response_ms", rec.t_response_ms}};
  if (rec.raw_response) j["response"] = *rec.raw_response;
  if (!rec.error_detail.empty()) j["error"] = rec.error_detail;
  return j;
}

struct TransportReply {
  enum class Kind { ok, http_error, timeout, network_error };
  Kind kind = Kind::ok;
  int status_code = 0;
  std::string content;  // assistant message text when ok
  std::string detail;

  bool retryable() const {
    if (kind == Kind::timeout || kind == Kind::network_error) return true;
    if (kind == Kind::http_error)
      return status_code == 408 || status_code == 409 || status_code == 429 ||
             status_code >= 500;
    return false;
  }
  bool fatal_auth() const {
    return kind == Kind::http_error && (status_code == 401 || status_code == 403);
  }
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportReply send(const ModelTarget& target, const QueryStub& stub,
                              const std::string& prompt) = 0;
};

class FatalTransportError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExecuteResult {
  std::size_t ok = 0;
  std::size_t failed = 0;  // resolved but not ok
  bool aborted = false;    // fatal auth error; log remains a valid checkpoint
  std::string abort_reason;
};

namespace detail {

inline std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// per-model minimum spacing between request starts
class RateGate {
 public:
  explicit RateGate(double rps) : interval_ms_(rps > 0 ? 1000.0 / rps : 0.0) {}

  void wait(const std::string& model_id) {
    if (interval_ms_ <= 0.0) return;
    std::int64_t wake;
    {
      std::lock_guard<std::mutex> lock(mu_);
      std::int64_t now = now_ms();
      auto& next = next_start_[model_id];
      if (next < now) next = now;
      wake = next;
      next += static_cast<std::int64_t>(interval_ms_);
    }
    std::int64_t delay = wake - now_ms();
    if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));
  }

 private:
  double interval_ms_;
  std::mutex mu_;
  std::map<std::string, std::int64_t> next_start_;
};

}  // namespace detail

// Resolves every stub to exactly one record appended to the log. Bounded
// in-flight window, exponential backoff on transient failures; exhausted
// retries become a resolved exhausted_retries record rather than an abort.
inline ExecuteResult execute(const ConditionMatrix& design,
                             const std::vector<QueryStub>& stubs,
                             const std::map<std::string, ModelTarget>& targets,
                             const ExecutionPolicy& policy, Transport& transport,
                             JsonlWriter& log) {
  std::atomic<std::size_t> cursor{0};
  std::atomic<bool> abort{false};
  std::mutex write_mu;
  ExecuteResult result;
  std::string abort_reason;
  detail::RateGate gate(policy.rate_limit_rps);

  auto worker = [&]() {
    while (!abort.load()) {
      std::size_t i = cursor.fetch_add(1);
      if (i >= stubs.size()) return;
      const QueryStub& stub = stubs[i];
      auto target_it = targets.find(stub.model_id);
      if (target_it == targets.end())
        throw std::runtime_error("no target for model " + stub.model_id);

      QueryRecord rec;
      rec.stub = stub;
      rec.rendered_prompt = render_prompt(design, stub.coordinate);
      rec.t_request_ms = detail::now_ms();

      int attempt = 0;
      while (true) {
        gate.wait(stub.model_id);
        TransportReply reply =
            transport.send(target_it->second, stub, rec.rendered_prompt);
        if (reply.kind == TransportReply::Kind::ok) {
          rec.status = TransportStatus::ok;
          rec.raw_response = reply.content;
          break;
        }
        if (reply.fatal_auth()) {
          abort.store(true);
          std::lock_guard<std::mutex> lock(write_mu);
          if (abort_reason.empty())
            abort_reason = "authentication rejected (HTTP " +
                           std::to_string(reply.status_code) + "): " + reply.detail;
          return;  // no record: the stub stays pending and resumable
        }
        if (reply.retryable() && attempt < policy.max_retries) {
          double delay = policy.backoff_initial_ms *
                         std::pow(policy.backoff_factor, static_cast<double>(attempt));
          std::this_thread::sleep_for(
              std::chrono::milliseconds(static_cast<std::int64_t>(delay)));
          ++attempt;
          continue;
        }
        if (reply.retryable()) {
          rec.status = TransportStatus::exhausted_retries;
        } else if (reply.kind == TransportReply::Kind::timeout) {
          rec.status = TransportStatus::timeout;
        } else {
          rec.status = TransportStatus::http_error;
        }
        rec.error_detail = reply.detail.empty()
                               ? "HTTP " + std::to_string(reply.status_code)
                               : reply.detail;
        break;
      }
      rec.t_response_ms = detail::now_ms();

      std::lock_guard<std::mutex> lock(write_mu);
      log.append(record_to_json(design, rec));
      if (rec.status == TransportStatus::ok) ++result.ok;
      else ++result.failed;
    }
  };

  int n_workers = std::max(1, std::min<int>(policy.parallel,
                                            static_cast<int>(stubs.size())));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_workers));
  for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  result.aborted = abort.load();
  result.abort_reason = abort_reason;
  return result;
}

struct ResumeState {
  std::set<std::string> completed_ids;
  bool truncated_tail = false;
};

inline ResumeState read_completed(const std::filesystem::path& log_path) {
  ResumeState state;
  if (!std::filesystem::exists(log_path)) return state;
  JsonlReadResult raw = read_jsonl(log_path);
  state.truncated_tail = raw.truncated_tail;
  for (const auto& rec : raw.records) {
    std::string id = rec.at("query_id").get<std::string>();
    if (!state.completed_ids.insert(id).second)
      throw std::runtime_error("raw log contains duplicate query_id " + id);
  }
  return state;
}

// Exactly the planned stubs that have no completed record yet, in plan order.
inline std::vector<QueryStub> resume(const std::filesystem::path& log_path,
                                     const std::vector<QueryStub>& planned) {
  ResumeState state = read_completed(log_path);
  std::vector<QueryStub> remaining;
  for (const auto& s : planned)
    if (!state.completed_ids.count(s.query_id)) remaining.push_back(s);
  return remaining;
}

}  // namespace audit
