#pragma once

// Operational surface shared by the CLI and the scoring service: the config
// document, position resolution, the single scoring path and the
// newline-delimited JSON protocol.

#include "vps/judge_http.hpp"
#include "vps/metrics.hpp"
#include "vps/rewards.hpp"
#include "vps/scheduler.hpp"
#include "vps/uci.hpp"

#include <nlohmann/json.hpp>

#include <sys/socket.h>
#include <netinet/in.h>
#include <unistd.h>

#include <condition_variable>
#include <deque>
#include <fstream>
#include <functional>
#include <istream>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace vps {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitEngine = 3 };

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EngineSettings {
  std::string path;
  std::vector<std::string> args;
  int multipv = 5;
  int depth = 25;        // analysis depth for scoring and evaluation
  int train_depth = 30;  // analysis depth when backfilling training data
  int threads = 1;
  int hash_mb = 64;
  int timeout_s = 60;
  std::size_t pool_size = 1;
};

struct ServiceSettings {
  std::size_t max_in_flight = 4;
  int port = 0;  // 0: stdio
};

struct HarnessConfig {
  std::string store;
  EngineSettings engine;
  RewardConfig reward;
  SchedulerParams scheduler;
  MetricsConfig metrics;
  ServiceSettings service;
  std::vector<HttpJudgeConfig> judges;
};

namespace detail {

template <class T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

inline void read_shape(const nlohmann::json& j, RewardShape& s) {
  read_if(j, "flat", s.flat);
  read_if(j, "zero", s.zero);
}

}  // namespace detail

/// Fields absent from the document keep their defaults.
inline HarnessConfig config_from_json(const nlohmann::json& j) {
  using detail::read_if;
  HarnessConfig c;
  read_if(j, "store", c.store);
  if (j.contains("engine")) {
    const auto& e = j["engine"];
    read_if(e, "path", c.engine.path);
    read_if(e, "args", c.engine.args);
    read_if(e, "multipv", c.engine.multipv);
    read_if(e, "depth", c.engine.depth);
    read_if(e, "train_depth", c.engine.train_depth);
    read_if(e, "threads", c.engine.threads);
    read_if(e, "hash_mb", c.engine.hash_mb);
    read_if(e, "timeout_s", c.engine.timeout_s);
    read_if(e, "pool_size", c.engine.pool_size);
  }
  if (j.contains("reward")) {
    const auto& r = j["reward"];
    if (r.contains("win_rate")) detail::read_shape(r["win_rate"], c.reward.win_rate);
    if (r.contains("pawn")) detail::read_shape(r["pawn"], c.reward.pawn);
    read_if(r, "pawn_cap_above", c.reward.pawn_cap_above);
    read_if(r, "pawn_cap", c.reward.pawn_cap);
    read_if(r, "pv_weights", c.reward.pv_weights);
    read_if(r, "mate_tolerance", c.reward.mate_tolerance);
    read_if(r, "lambda", c.reward.lambda);
    if (r.contains("accuracy")) c.reward.accuracy = parse_accuracy_provider(r["accuracy"].get<std::string>());
  }
  if (j.contains("scheduler")) {
    const auto& s = j["scheduler"];
    read_if(s, "alpha", c.scheduler.alpha);
    read_if(s, "base_temperature", c.scheduler.base_temperature);
    read_if(s, "w_min", c.scheduler.w_min);
    if (s.contains("mode")) c.scheduler.mode = parse_temperature_mode(s["mode"].get<std::string>());
  }
  if (j.contains("metrics")) read_if(j["metrics"], "k_cov", c.metrics.k_cov);
  if (j.contains("service")) {
    read_if(j["service"], "max_in_flight", c.service.max_in_flight);
    read_if(j["service"], "port", c.service.port);
  }
  if (j.contains("judges"))
    for (const auto& jj : j["judges"]) {
      HttpJudgeConfig h;
      read_if(jj, "name", h.name);
      read_if(jj, "base_url", h.base_url);
      read_if(jj, "path", h.path);
      read_if(jj, "model", h.model);
      read_if(jj, "api_key_env", h.api_key_env);
      read_if(jj, "timeout_s", h.timeout_s);
      c.judges.push_back(h);
    }
  c.reward.live_depth = c.engine.depth;
  return c;
}

inline HarnessConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config " + path);
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad config " + path + ": " + e.what());
  }
}

inline EngineConfig engine_config(const EngineSettings& e) {
  EngineConfig c;
  c.path = e.path;
  c.args = e.args;
  c.threads = e.threads;
  c.hash_mb = e.hash_mb;
  c.timeout = std::chrono::seconds(e.timeout_s);
  return c;
}

/// Store plus optional engine pool; the ground truth behind every command.
class Workspace {
 public:
  explicit Workspace(const HarnessConfig& cfg)
      : cfg_(cfg), store_(cfg.store.empty() ? AnalysisStore() : AnalysisStore(cfg.store)) {
    if (!cfg.engine.path.empty()) pool_ = std::make_unique<EnginePool>(engine_config(cfg.engine), cfg.engine.pool_size);
    oracle_ = std::make_unique<Oracle>(store_, pool_.get());
  }

  const HarnessConfig& config() const { return cfg_; }
  AnalysisStore& store() { return store_; }
  Oracle& oracle() { return *oracle_; }
  Oracle* live() { return pool_ ? oracle_.get() : nullptr; }

  /// A sample for `fen` with its stored record, analyzing live when allowed.
  PositionSample resolve(std::string_view fen, const std::string& id = {}) {
    PositionSample s;
    s.id = id;
    try {
      s.position = parse_fen(fen, {.allow_missing_clocks = true});
    } catch (const FenError& e) {
      throw DataError(std::string("bad fen: ") + e.what());
    }
    s.record = store_.query(s.position);
    if (!s.record) {
      if (!pool_) throw DataError("no analysis for position " + serialize_fen(s.position) + " (offline)");
      s.record = oracle_->engine_analyze(s.position, cfg_.engine.depth, cfg_.engine.multipv);
    }
    return s;
  }

 private:
  HarnessConfig cfg_;
  AnalysisStore store_;
  std::unique_ptr<EnginePool> pool_;
  std::unique_ptr<Oracle> oracle_;
};

/// The one scoring path: {id?, fen, trace} -> breakdown.
inline RewardBreakdown score_request(Workspace& ws, const nlohmann::json& req, const WeightState& weights) {
  if (!req.is_object() || !req.contains("fen") || !req["fen"].is_string())
    throw DataError("request needs a string 'fen'");
  if (!req.contains("trace") || !req["trace"].is_string()) throw DataError("request needs a string 'trace'");
  PositionSample sample = ws.resolve(req["fen"].get<std::string>());
  return score_trace(parse_trace(req["trace"].get<std::string>()), sample, weights, ws.config().reward, ws.live());
}

inline nlohmann::ordered_json request_id(const nlohmann::json& req) {
  if (req.is_object() && req.contains("id")) return nlohmann::ordered_json(req["id"]);
  return nullptr;
}

inline nlohmann::ordered_json breakdown_reply(const nlohmann::json& req, const RewardBreakdown& b) {
  nlohmann::ordered_json out;
  out["id"] = request_id(req);
  out["breakdown"] = to_json(b);
  return out;
}

inline nlohmann::ordered_json error_reply(const nlohmann::ordered_json& id, const std::string& message) {
  nlohmann::ordered_json out;
  out["id"] = id;
  out["error"] = message;
  return out;
}

inline bool is_batch_marker(const nlohmann::json& req) {
  return req.is_object() && req.contains("batch_end") && req["batch_end"].is_boolean() && req["batch_end"].get<bool>();
}

/// One protocol session: concurrent scoring with scheduler updates applied at
/// batch-boundary markers once all earlier requests have been answered.
class ScoringSession {
 public:
  using Emit = std::function<void(const std::string&)>;

  ScoringSession(Workspace& ws, WeightState initial, Emit emit, std::size_t max_in_flight, bool adaptive = true)
      : ws_(ws), state_(std::move(initial)), emit_(std::move(emit)), adaptive_(adaptive) {
    const std::size_t n = std::max<std::size_t>(1, max_in_flight);
    for (std::size_t i = 0; i < n; ++i) workers_.emplace_back([this] { work(); });
  }

  ~ScoringSession() { finish(); }

  void submit(const std::string& line) {
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      send(error_reply(nullptr, std::string("malformed request: ") + e.what()).dump());
      return;
    }
    if (is_batch_marker(req)) {
      drain();
      apply_batch(req);
      return;
    }
    std::unique_lock lock(mu_);
    queue_.push_back({std::move(req), snapshot_locked()});
    ++pending_;
    cv_.notify_one();
  }

  void finish() {
    {
      std::lock_guard lock(mu_);
      if (stopping_) return;
      stopping_ = true;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
  }

  WeightState weights() const {
    std::lock_guard lock(mu_);
    return state_;
  }

 private:
  struct Job {
    nlohmann::json req;
    std::shared_ptr<const WeightState> weights;
  };

  std::shared_ptr<const WeightState> snapshot_locked() {
    if (!snapshot_ || snapshot_->step != state_.step) snapshot_ = std::make_shared<const WeightState>(state_);
    return snapshot_;
  }

  void send(const std::string& s) {
    std::lock_guard lock(out_mu_);
    emit_(s);
  }

  void work() {
    for (;;) {
      Job job;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
        if (queue_.empty()) return;
        job = std::move(queue_.front());
        queue_.pop_front();
      }
      std::string reply;
      try {
        RewardBreakdown b = score_request(ws_, job.req, *job.weights);
        reply = breakdown_reply(job.req, b).dump();
        std::lock_guard lock(mu_);
        batch_.push_back(std::move(b));
      } catch (const EngineError& e) {
        reply = error_reply(request_id(job.req), e.what()).dump();
      } catch (const std::exception& e) {
        reply = error_reply(request_id(job.req), e.what()).dump();
      }
      send(reply);
      {
        std::lock_guard lock(mu_);
        --pending_;
      }
      done_cv_.notify_all();
    }
  }

  void drain() {
    std::unique_lock lock(mu_);
    done_cv_.wait(lock, [&] { return pending_ == 0; });
  }

  void apply_batch(const nlohmann::json& req) {
    nlohmann::ordered_json out;
    {
      std::lock_guard lock(mu_);
      const std::size_t scored = batch_.size();
      if (adaptive_ && !batch_.empty()) state_ = update_weights(state_, batch_means(batch_));
      else if (!batch_.empty()) ++state_.step;
      batch_.clear();
      out["id"] = request_id(req);
      out["batch_end"] = true;
      out["scored"] = scored;
      out["weights_step"] = state_.step;
      out["weights"] = state_.w;
    }
    send(out.dump());
  }

  Workspace& ws_;
  WeightState state_;
  std::shared_ptr<const WeightState> snapshot_;
  Emit emit_;
  bool adaptive_;
  std::vector<RewardBreakdown> batch_;
  std::deque<Job> queue_;
  std::size_t pending_ = 0;
  bool stopping_ = false;
  mutable std::mutex mu_;
  std::mutex out_mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  std::vector<std::thread> workers_;
};

inline void serve_stream(Workspace& ws, const WeightState& initial, std::istream& in, std::ostream& out,
                         std::size_t max_in_flight) {
  ScoringSession session(
      ws, initial, [&](const std::string& s) { out << s << '\n' << std::flush; }, max_in_flight);
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    session.submit(line);
  }
  session.finish();
}

namespace detail {

inline bool send_all(int fd, const std::string& s) {
  std::size_t off = 0;
  while (off < s.size()) {
    ssize_t n = ::send(fd, s.data() + off, s.size() - off, MSG_NOSIGNAL);
    if (n <= 0) return false;
    off += static_cast<std::size_t>(n);
  }
  return true;
}

inline void serve_connection(Workspace& ws, WeightState initial, int fd, std::size_t max_in_flight) {
  {
    ScoringSession session(
        ws, std::move(initial), [fd](const std::string& s) { send_all(fd, s + "\n"); }, max_in_flight);
    std::string buf;
    char chunk[4096];
    for (;;) {
      ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
      if (n <= 0) break;
      buf.append(chunk, static_cast<std::size_t>(n));
      std::size_t nl;
      while ((nl = buf.find('\n')) != std::string::npos) {
        std::string line = buf.substr(0, nl);
        buf.erase(0, nl + 1);
        if (!trim(line).empty()) session.submit(line);
      }
    }
    if (!trim(buf).empty()) session.submit(buf);
    session.finish();
  }
  ::close(fd);
}

}  // namespace detail

/// Listens on 127.0.0.1:`port`; each connection gets its own session. Returns
/// the bound port through `on_ready` (useful with port 0) and serves until
/// `stop` becomes true or accept fails.
inline void serve_tcp(Workspace& ws, const WeightState& initial, int port, std::size_t max_in_flight,
                      const std::function<void(int)>& on_ready = {}, const std::atomic<bool>* stop = nullptr) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw std::runtime_error("socket() failed");
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<uint16_t>(port));
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 16) != 0) {
    ::close(fd);
    throw std::runtime_error("cannot listen on port " + std::to_string(port));
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  if (on_ready) on_ready(ntohs(addr.sin_port));
  std::vector<std::thread> conns;
  while (!stop || !stop->load()) {
    pollfd p{fd, POLLIN, 0};
    if (::poll(&p, 1, 200) <= 0) continue;
    int c = ::accept(fd, nullptr, nullptr);
    if (c < 0) break;
    conns.emplace_back(detail::serve_connection, std::ref(ws), initial, c, max_in_flight);
  }
  ::close(fd);
  for (auto& t : conns) t.join();
}

}  // namespace vps
