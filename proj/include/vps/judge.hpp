#pragma once

// LLM-judge evaluation: rubric prompts with engine-summary context, expected
// scores from score-token probabilities, and a multi-judge panel over a
// pluggable transport.

#include "vps/oracle.hpp"
#include "vps/prompts.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <regex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace vps {

enum class Dimension { Relevance, Completeness, Clarity, Fluency };

inline constexpr std::array<Dimension, 4> kDimensions = {Dimension::Relevance, Dimension::Completeness,
                                                         Dimension::Clarity, Dimension::Fluency};

inline std::string dimension_name(Dimension d) {
  switch (d) {
    case Dimension::Relevance: return "relevance";
    case Dimension::Completeness: return "completeness";
    case Dimension::Clarity: return "clarity";
    case Dimension::Fluency: return "fluency";
  }
  return "unknown";
}

inline Dimension parse_dimension(const std::string& s) {
  for (Dimension d : kDimensions)
    if (dimension_name(d) == s) return d;
  throw std::invalid_argument("unknown judge dimension '" + s + "'");
}

inline std::string_view rubric(Dimension d) {
  switch (d) {
    case Dimension::Relevance: return prompts::kRelevance;
    case Dimension::Completeness: return prompts::kCompleteness;
    case Dimension::Clarity: return prompts::kClarity;
    case Dimension::Fluency: return prompts::kFluency;
  }
  return {};
}

class JudgeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline std::string describe_score(const ScoredMove& sm) {
  if (sm.mate) {
    int n = *sm.mate;
    return "mate in " + std::to_string(std::abs(n)) + (n > 0 ? " for the side to move" : " against the side to move");
  }
  return fmt("%+.2f pawns", sm.pawns()) + ", win rate " + fmt("%.1f%%", sm.win_rate);
}

}  // namespace detail

/// Relational quality of a move against the engine's best move.
inline std::string quality_bucket(const ScoredMove& best, const ScoredMove& move) {
  if (best.win_rate - move.win_rate <= 2.0) return "similar to best move";
  bool over_a_pawn;
  if (best.cp && move.cp) over_a_pawn = (*best.cp - *move.cp) / 100.0 > 1.0;
  else over_a_pawn = (best.mate && *best.mate > 0) || (move.mate && *move.mate < 0);
  return over_a_pawn ? "significantly worse than best move (over a pawn)" : "somewhat worse than best move";
}

inline std::string engine_summary(const AnalysisRecord& record, const std::optional<Move>& analyzed) {
  if (record.moves.empty()) throw JudgeError("engine summary needs at least one scored move");
  std::string out = "Top engine moves:\n";
  const std::size_t n = std::min<std::size_t>(5, record.moves.size());
  std::vector<std::string> mating;
  for (std::size_t i = 0; i < n; ++i) {
    const ScoredMove& sm = record.moves[i];
    out += std::to_string(i + 1) + ". " + sm.san + " (" + detail::describe_score(sm) + ")\n";
    if (sm.mate && *sm.mate > 0) mating.push_back(sm.san);
  }
  if (mating.empty()) {
    out += "None of these moves lead to forced checkmate.\n";
  } else {
    out += "Moves that lead to forced checkmate:";
    for (const auto& m : mating) out += " " + m;
    out += "\n";
  }
  if (analyzed) {
    const std::string san = to_san(record.position, *analyzed);
    if (const ScoredMove* sm = record.find(*analyzed))
      out += "The chosen move " + san + " is " + quality_bucket(record.best(), *sm) + ".\n";
    else
      out += "The chosen move " + san + " is not among the engine's top moves.\n";
  } else {
    out += "The trace does not choose a legal move.\n";
  }
  return out;
}

struct JudgeRequest {
  Dimension dimension = Dimension::Relevance;
  std::string prompt;
  std::string fen;
  std::string summary;
};

inline bool uses_engine_summary(Dimension d) { return d == Dimension::Relevance || d == Dimension::Completeness; }

inline JudgeRequest build_prompt(Dimension d, std::string_view trace_text, std::string_view fen,
                                 std::string_view summary) {
  JudgeRequest r{d, std::string(rubric(d)), std::string(fen), std::string(summary)};
  r.prompt += "\n### Position\nFEN: " + r.fen + "\n";
  if (uses_engine_summary(d)) r.prompt += "\n### Engine summary\n" + r.summary;
  r.prompt += "\n### Reasoning trace\n";
  r.prompt += trace_text;
  if (r.prompt.back() != '\n') r.prompt += '\n';
  return r;
}

struct JudgeResponse {
  std::string raw;
  std::optional<int> parsed;
  std::optional<std::array<double, 5>> probs;  // p(1..5), not necessarily normalized
};

/// Reads the integer "score" from a JSON reply, or from the first "score: N".
inline std::optional<int> parse_score_text(std::string_view raw) {
  static const std::regex re(R"re("?score"?\s*[:=]\s*"?([1-5])(?![0-9]))re", std::regex::icase);
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(raw.begin(), raw.end(), m, re)) return m[1].str()[0] - '0';
  return std::nullopt;
}

inline double expected_score(const JudgeResponse& r) {
  if (r.probs) {
    double mass = 0.0, acc = 0.0;
    for (int s = 1; s <= 5; ++s) {
      const double p = (*r.probs)[s - 1];
      if (!(p >= 0.0) || !std::isfinite(p)) throw JudgeError("invalid score probability");
      mass += p;
      acc += s * p;
    }
    if (mass > 0.0) return acc / mass;
  }
  if (r.parsed && *r.parsed >= 1 && *r.parsed <= 5) return *r.parsed;
  throw JudgeError("judge reply has neither score probabilities nor a parseable score");
}

class JudgeTransport {
 public:
  virtual ~JudgeTransport() = default;
  virtual std::string name() const = 0;
  virtual JudgeResponse complete(const JudgeRequest& req) = 0;
};

/// Deterministic transport: a fixed distribution per dimension, optionally
/// failing the first few calls.
class MockTransport : public JudgeTransport {
 public:
  using Fn = std::function<JudgeResponse(const JudgeRequest&)>;

  MockTransport(std::string name, Fn fn, int fail_first = 0) : name_(std::move(name)), fn_(std::move(fn)), fail_(fail_first) {}

  static std::unique_ptr<MockTransport> fixed(std::string name, std::array<std::array<double, 5>, 4> dist,
                                              int fail_first = 0) {
    return std::make_unique<MockTransport>(
        std::move(name),
        [dist](const JudgeRequest& req) {
          JudgeResponse r;
          const auto& p = dist[static_cast<std::size_t>(req.dimension)];
          int mode = 1;
          for (int s = 2; s <= 5; ++s)
            if (p[s - 1] > p[mode - 1]) mode = s;
          r.raw = "{\"score\": " + std::to_string(mode) + ", \"justification\": \"mock\"}";
          r.parsed = mode;
          r.probs = p;
          return r;
        },
        fail_first);
  }

  std::string name() const override { return name_; }
  JudgeResponse complete(const JudgeRequest& req) override {
    if (fail_.fetch_sub(1) > 0) throw JudgeError("mock transport failure");
    ++calls_;
    return fn_(req);
  }
  int calls() const { return calls_; }

 private:
  std::string name_;
  Fn fn_;
  std::atomic<int> fail_;
  std::atomic<int> calls_{0};
};

struct PanelItem {
  std::string id;
  std::string trace;
  std::string fen;
  std::string summary;
};

struct PanelOptions {
  int attempts = 3;
  std::chrono::milliseconds backoff{200};
  std::size_t max_in_flight = 4;
};

struct Transcript {
  std::string trace_id;
  std::string dimension;
  std::string judge;
  std::string prompt_hash;
  std::string raw;
  std::optional<double> expected_score;
  std::string error;
};

struct PanelReport {
  std::vector<std::string> judges;
  // scores[trace][judge][dimension]; absent when every attempt failed
  std::vector<std::vector<std::array<std::optional<double>, 4>>> scores;
  std::vector<std::array<std::optional<double>, 4>> cross_judge;  // per trace
  std::vector<std::optional<double>> overall;                     // per trace
  std::array<std::optional<double>, 4> dimension_means;          // over traces
  std::optional<double> overall_mean;
  std::vector<Transcript> transcripts;
};

inline std::string prompt_hash(std::string_view prompt) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(prompt)));
  return buf;
}

namespace detail {

inline std::optional<double> mean_present(const std::vector<std::optional<double>>& v) {
  double s = 0.0;
  int n = 0;
  for (const auto& x : v)
    if (x) {
      s += *x;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return s / n;
}

}  // namespace detail

inline PanelReport run_panel(const std::vector<PanelItem>& items, const std::vector<JudgeTransport*>& judges,
                             const PanelOptions& opts = {}) {
  if (judges.empty()) throw JudgeError("panel needs at least one judge");
  PanelReport rep;
  for (auto* j : judges) rep.judges.push_back(j->name());
  const std::size_t nj = judges.size();
  const std::size_t tasks = items.size() * nj * kDimensions.size();
  rep.scores.assign(items.size(), std::vector<std::array<std::optional<double>, 4>>(nj));
  std::vector<Transcript> slots(tasks);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t; (t = next.fetch_add(1)) < tasks;) {
      const std::size_t item = t / (nj * 4), judge = (t / 4) % nj, dim = t % 4;
      const PanelItem& it = items[item];
      const JudgeRequest req = build_prompt(kDimensions[dim], it.trace, it.fen, it.summary);
      Transcript& tr = slots[t];
      tr = {it.id, dimension_name(kDimensions[dim]), judges[judge]->name(), prompt_hash(req.prompt), "", {}, ""};
      auto delay = opts.backoff;
      for (int attempt = 1; attempt <= opts.attempts; ++attempt) {
        try {
          JudgeResponse resp = judges[judge]->complete(req);
          tr.raw = resp.raw;
          tr.expected_score = expected_score(resp);
          tr.error.clear();
          break;
        } catch (const std::exception& e) {
          tr.error = e.what();
          if (attempt < opts.attempts) {
            std::this_thread::sleep_for(delay);
            delay *= 2;
          }
        }
      }
      rep.scores[item][judge][dim] = tr.expected_score;
    }
  };
  const std::size_t nthreads = std::max<std::size_t>(1, std::min(opts.max_in_flight, tasks));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < nthreads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  rep.transcripts = std::move(slots);

  for (std::size_t i = 0; i < items.size(); ++i) {
    std::array<std::optional<double>, 4> cj;
    for (std::size_t d = 0; d < 4; ++d) {
      std::vector<std::optional<double>> per_judge;
      for (std::size_t j = 0; j < nj; ++j) per_judge.push_back(rep.scores[i][j][d]);
      cj[d] = detail::mean_present(per_judge);
    }
    rep.cross_judge.push_back(cj);
    rep.overall.push_back(detail::mean_present({cj.begin(), cj.end()}));
  }
  for (std::size_t d = 0; d < 4; ++d) {
    std::vector<std::optional<double>> col;
    for (const auto& cj : rep.cross_judge) col.push_back(cj[d]);
    rep.dimension_means[d] = detail::mean_present(col);
  }
  rep.overall_mean = detail::mean_present(rep.overall);
  return rep;
}

inline nlohmann::ordered_json to_json(const Transcript& t) {
  nlohmann::ordered_json j;
  j["trace_id"] = t.trace_id;
  j["dimension"] = t.dimension;
  j["judge"] = t.judge;
  j["prompt_hash"] = t.prompt_hash;
  j["raw"] = t.raw;
  j["expected_score"] = t.expected_score ? nlohmann::ordered_json(*t.expected_score) : nlohmann::ordered_json(nullptr);
  if (!t.error.empty()) j["error"] = t.error;
  return j;
}

inline nlohmann::ordered_json to_json(const PanelReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr); };
  nlohmann::ordered_json j;
  j["judges"] = r.judges;
  nlohmann::ordered_json dims = nlohmann::ordered_json::object();
  for (std::size_t d = 0; d < 4; ++d) dims[dimension_name(kDimensions[d])] = opt(r.dimension_means[d]);
  j["dimensions"] = dims;
  j["overall"] = opt(r.overall_mean);
  nlohmann::ordered_json per_judge = nlohmann::ordered_json::object();
  for (std::size_t jj = 0; jj < r.judges.size(); ++jj) {
    nlohmann::ordered_json dj = nlohmann::ordered_json::object();
    for (std::size_t d = 0; d < 4; ++d) {
      std::vector<std::optional<double>> col;
      for (const auto& per_trace : r.scores) col.push_back(per_trace[jj][d]);
      dj[dimension_name(kDimensions[d])] = opt(detail::mean_present(col));
    }
    per_judge[r.judges[jj]] = dj;
  }
  j["per_judge"] = per_judge;
  return j;
}

}  // namespace vps
