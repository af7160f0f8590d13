#pragma once

// UCI engine client over child-process pipes, an engine pool, and the oracle
// facade that serves analysis from the store and falls back to the engine.

#include "vps/oracle.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace vps {

enum class EngineErrorKind { Unavailable, Timeout, Protocol, NoLegalMoves };

class EngineError : public std::runtime_error {
 public:
  EngineError(EngineErrorKind kind, const std::string& what) : std::runtime_error("engine: " + what), kind_(kind) {}
  EngineErrorKind kind() const { return kind_; }

 private:
  EngineErrorKind kind_;
};

struct EngineConfig {
  std::string path;
  std::vector<std::string> args;
  std::chrono::milliseconds timeout{60000};
  int threads = 1;
  int hash_mb = 0;  // 0 leaves the engine default
};

/// Child process with line-oriented stdin/stdout pipes.
class EngineProcess {
 public:
  explicit EngineProcess(const EngineConfig& cfg) {
    ::signal(SIGPIPE, SIG_IGN);
    int to_child[2], from_child[2], exec_err[2];
    if (::pipe(to_child) || ::pipe(from_child) || ::pipe(exec_err))
      throw EngineError(EngineErrorKind::Unavailable, "pipe: " + std::string(std::strerror(errno)));
    ::fcntl(exec_err[1], F_SETFD, FD_CLOEXEC);

    pid_ = ::fork();
    if (pid_ < 0) throw EngineError(EngineErrorKind::Unavailable, "fork failed");
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(exec_err[0]);
      std::vector<char*> argv;
      argv.push_back(const_cast<char*>(cfg.path.c_str()));
      for (const auto& a : cfg.args) argv.push_back(const_cast<char*>(a.c_str()));
      argv.push_back(nullptr);
      ::execvp(cfg.path.c_str(), argv.data());
      int err = errno;
      [[maybe_unused]] auto n = ::write(exec_err[1], &err, sizeof err);
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    ::close(exec_err[1]);
    in_fd_ = to_child[1];
    out_fd_ = from_child[0];

    int err = 0;
    if (::read(exec_err[0], &err, sizeof err) == static_cast<ssize_t>(sizeof err)) {
      ::close(exec_err[0]);
      reap();
      throw EngineError(EngineErrorKind::Unavailable, "cannot start '" + cfg.path + "': " + std::strerror(err));
    }
    ::close(exec_err[0]);
  }

  EngineProcess(const EngineProcess&) = delete;
  EngineProcess& operator=(const EngineProcess&) = delete;

  ~EngineProcess() {
    if (in_fd_ >= 0) {
      static const char quit[] = "quit\n";
      [[maybe_unused]] auto n = ::write(in_fd_, quit, sizeof quit - 1);
      ::close(in_fd_);
    }
    if (out_fd_ >= 0) ::close(out_fd_);
    reap();
  }

  void send(const std::string& line) {
    std::string data = line + "\n";
    const char* p = data.data();
    std::size_t left = data.size();
    while (left) {
      ssize_t n = ::write(in_fd_, p, left);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw EngineError(EngineErrorKind::Unavailable, "engine closed its input");
      p += n;
      left -= static_cast<std::size_t>(n);
    }
  }

  std::string read_line(std::chrono::steady_clock::time_point deadline) {
    for (;;) {
      auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw EngineError(EngineErrorKind::Timeout, "protocol timeout");
      pollfd pfd{out_fd_, POLLIN, 0};
      int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (rc < 0 && errno == EINTR) continue;
      if (rc == 0) throw EngineError(EngineErrorKind::Timeout, "protocol timeout");
      char buf[4096];
      ssize_t n = ::read(out_fd_, buf, sizeof buf);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw EngineError(EngineErrorKind::Unavailable, "engine exited");
      buffer_.append(buf, static_cast<std::size_t>(n));
    }
  }

 private:
  void reap() {
    if (pid_ > 0) {
      int status = 0;
      ::waitpid(pid_, &status, 0);
      pid_ = -1;
    }
  }

  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  std::string buffer_;
};

/// Parsed "info" line fields relevant to multipv analysis.
struct UciInfo {
  int depth = 0;
  int multipv = 1;
  std::optional<int> cp;
  std::optional<int> mate;
  bool bound = false;
  std::vector<std::string> pv;
};

inline std::optional<UciInfo> parse_info_line(const std::string& line) {
  auto toks = detail::tokens(line);
  if (toks.empty() || toks[0] != "info") return std::nullopt;
  UciInfo info;
  bool has_score = false;
  for (std::size_t i = 1; i < toks.size(); ++i) {
    const auto& t = toks[i];
    auto next_int = [&]() -> int {
      if (i + 1 >= toks.size()) throw EngineError(EngineErrorKind::Protocol, "truncated info line");
      return std::stoi(toks[++i]);
    };
    if (t == "depth") info.depth = next_int();
    else if (t == "multipv") info.multipv = next_int();
    else if (t == "score") {
      if (i + 2 >= toks.size()) throw EngineError(EngineErrorKind::Protocol, "truncated score");
      const std::string kind = toks[++i];
      int v = std::stoi(toks[++i]);
      if (kind == "cp") info.cp = v;
      else if (kind == "mate") info.mate = v;
      has_score = true;
    } else if (t == "lowerbound" || t == "upperbound") info.bound = true;
    else if (t == "pv") {
      info.pv.assign(toks.begin() + static_cast<std::ptrdiff_t>(i) + 1, toks.end());
      break;
    } else if (t == "string") break;
  }
  if (!has_score || info.pv.empty()) return std::nullopt;
  return info;
}

class UciEngine {
 public:
  explicit UciEngine(EngineConfig cfg) : cfg_(std::move(cfg)), proc_(cfg_) {
    proc_.send("uci");
    wait_for("uciok");
    if (cfg_.threads > 1) proc_.send("setoption name Threads value " + std::to_string(cfg_.threads));
    if (cfg_.hash_mb > 0) proc_.send("setoption name Hash value " + std::to_string(cfg_.hash_mb));
    sync();
  }

  /// Runs `go depth N` with MultiPV and converts the final-depth lines into a
  /// record. Restricting to `only` uses UCI searchmoves.
  AnalysisRecord analyze(const Position& pos, int depth, int multipv, const std::vector<Move>& only = {}) {
    if (multipv != multipv_) {
      proc_.send("setoption name MultiPV value " + std::to_string(multipv));
      multipv_ = multipv;
    }
    sync();
    proc_.send("position fen " + serialize_fen(pos));
    std::string go = "go depth " + std::to_string(depth);
    if (!only.empty()) {
      go += " searchmoves";
      for (const auto& m : only) go += " " + to_uci(m);
    }
    proc_.send(go);

    std::map<int, UciInfo> lines;
    const auto deadline = std::chrono::steady_clock::now() + cfg_.timeout;
    for (;;) {
      std::string line = proc_.read_line(deadline);
      if (line.rfind("bestmove", 0) == 0) {
        auto toks = detail::tokens(line);
        if (toks.size() < 2 || toks[1] == "(none)" || toks[1] == "0000")
          throw EngineError(EngineErrorKind::NoLegalMoves, "no legal moves in " + serialize_fen(pos));
        break;
      }
      auto info = parse_info_line(line);
      if (!info || info->bound) continue;
      auto& slot = lines[info->multipv];
      if (info->depth >= slot.depth) slot = *info;
    }
    if (lines.empty()) throw EngineError(EngineErrorKind::Protocol, "no scored lines before bestmove");

    int reached = 0;
    for (const auto& [k, info] : lines) reached = std::max(reached, info.depth);
    std::vector<ScoredMove> moves;
    for (const auto& [k, info] : lines) {
      if (static_cast<int>(moves.size()) >= multipv) break;
      // PVs can contain moves the replay rejects if the engine is buggy; keep
      // the longest legal prefix
      std::vector<std::string> pv;
      Position cur = pos;
      for (const auto& u : info.pv) {
        try {
          Move m = parse_uci(cur, u);
          pv.push_back(to_san(cur, m));
          cur = detail::make(cur, m);
        } catch (const ChessError&) {
          break;
        }
      }
      if (pv.empty()) throw EngineError(EngineErrorKind::Protocol, "illegal pv move " + info.pv.front());
      moves.push_back(make_scored_move(pos, pv.front(), info.cp, info.cp ? std::nullopt : info.mate, pv));
    }
    return make_record(pos, std::move(moves), reached, to_string(RecordSource::LiveEngine));
  }

 private:
  void sync() {
    proc_.send("isready");
    wait_for("readyok");
  }
  void wait_for(const std::string& token) {
    const auto deadline = std::chrono::steady_clock::now() + cfg_.timeout;
    for (;;) {
      if (proc_.read_line(deadline) == token) return;
    }
  }

  EngineConfig cfg_;
  EngineProcess proc_;
  int multipv_ = 1;
};

/// Fixed set of engine processes; each request holds one engine exclusively.
class EnginePool {
 public:
  EnginePool(const EngineConfig& cfg, std::size_t size) {
    for (std::size_t i = 0; i < std::max<std::size_t>(size, 1); ++i) {
      engines_.push_back(std::make_unique<UciEngine>(cfg));
      free_.push_back(engines_.back().get());
    }
  }

  template <class Fn>
  auto with_engine(Fn&& fn) {
    UciEngine* e = nullptr;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return !free_.empty(); });
      e = free_.back();
      free_.pop_back();
    }
    struct Release {
      EnginePool* pool;
      UciEngine* e;
      ~Release() {
        {
          std::lock_guard lock(pool->mu_);
          pool->free_.push_back(e);
        }
        pool->cv_.notify_one();
      }
    } release{this, e};
    return fn(*e);
  }

 private:
  std::vector<std::unique_ptr<UciEngine>> engines_;
  std::vector<UciEngine*> free_;
  std::mutex mu_;
  std::condition_variable cv_;
};

/// Store-backed ground truth with optional live engine fallback.
class Oracle {
 public:
  explicit Oracle(AnalysisStore& store, EnginePool* engines = nullptr) : store_(store), engines_(engines) {}

  std::optional<AnalysisRecord> query(const Position& pos) const { return store_.query(pos); }
  std::optional<AnalysisRecord> query(std::string_view fen) const { return store_.query(fen); }

  bool live() const { return engines_ != nullptr; }

  /// Cached by (position, depth, multipv) through the store.
  AnalysisRecord engine_analyze(const Position& pos, int depth, int multipv = 5) {
    const auto legal = detail::legal_moves_plain(pos);
    if (legal.empty()) throw EngineError(EngineErrorKind::NoLegalMoves, "no legal moves in " + serialize_fen(pos));
    const std::size_t expect = std::min<std::size_t>(static_cast<std::size_t>(multipv), legal.size());
    const std::string source = to_string(RecordSource::LiveEngine);
    if (auto cached = store_.find_cached(pos, depth, expect, source)) return *cached;
    if (!engines_) throw EngineError(EngineErrorKind::Unavailable, "no engine configured");
    AnalysisRecord r = engines_->with_engine([&](UciEngine& e) { return e.analyze(pos, depth, multipv); });
    r.depth = depth;
    store_.append(r);
    return r;
  }

  AnalysisRecord engine_analyze(std::string_view fen, int depth, int multipv = 5) {
    return engine_analyze(parse_fen(fen, {.allow_missing_clocks = true}), depth, multipv);
  }

  /// Engine score for one specific move via searchmoves; not persisted.
  std::optional<ScoredMove> analyze_move(const Position& pos, const Move& m, int depth) {
    if (!engines_) return std::nullopt;
    AnalysisRecord r = engines_->with_engine([&](UciEngine& e) { return e.analyze(pos, depth, 1, {m}); });
    if (const ScoredMove* sm = r.find(m)) return *sm;
    return std::nullopt;
  }

  AnalysisStore& store() { return store_; }

 private:
  AnalysisStore& store_;
  EnginePool* engines_;
};

}  // namespace vps
