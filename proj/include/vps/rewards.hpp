#pragma once

// The verifier: per-claim checks against rule and engine truth, per-subtask
// aggregation over candidates and the composed total reward.

#include "vps/scheduler.hpp"
#include "vps/trace.hpp"
#include "vps/uci.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vps {

enum class Subtask { WinRate, PawnScore, Pv, Capture, Check, Mate, Logic };

inline constexpr std::size_t kSubtaskCount = 7;
inline constexpr std::array<Subtask, kSubtaskCount> kSubtasks = {Subtask::WinRate, Subtask::PawnScore, Subtask::Pv,
                                                                 Subtask::Capture, Subtask::Check,     Subtask::Mate,
                                                                 Subtask::Logic};

inline constexpr std::size_t index_of(Subtask s) { return static_cast<std::size_t>(s); }

inline std::string subtask_name(Subtask s) {
  switch (s) {
    case Subtask::WinRate: return "win_rate";
    case Subtask::PawnScore: return "pawn_score";
    case Subtask::Pv: return "pv";
    case Subtask::Capture: return "capture";
    case Subtask::Check: return "check";
    case Subtask::Mate: return "mate";
    case Subtask::Logic: return "logic_consistency";
  }
  return "unknown";
}

inline Subtask parse_subtask(const std::string& name) {
  for (Subtask s : kSubtasks)
    if (subtask_name(s) == name) return s;
  throw std::invalid_argument("unknown subtask '" + name + "'");
}

inline std::vector<std::string> subtask_names() {
  std::vector<std::string> out;
  for (Subtask s : kSubtasks) out.push_back(subtask_name(s));
  return out;
}

struct RewardShape {
  double flat = 0.1;   // full reward up to this distance
  double zero = 10.0;  // no reward from this distance on
};

enum class AccuracyProvider { EngineDense, ExactMatch };

inline std::string to_string(AccuracyProvider p) { return p == AccuracyProvider::EngineDense ? "engine-dense" : "exact-match"; }

inline AccuracyProvider parse_accuracy_provider(const std::string& s) {
  if (s == "engine-dense") return AccuracyProvider::EngineDense;
  if (s == "exact-match") return AccuracyProvider::ExactMatch;
  throw std::invalid_argument("unknown accuracy provider '" + s + "'");
}

struct RewardConfig {
  RewardShape win_rate{0.1, 10.0};
  RewardShape pawn{0.1, 3.0};
  double pawn_cap_above = 5.0;  // both sides beyond this many pawns ...
  double pawn_cap = 2.0;        // ... caps the distance at this value
  std::array<double, 4> pv_weights{0.4, 0.3, 0.2, 0.1};
  double mate_tolerance = 3.0;
  double lambda = 1.0;
  AccuracyProvider accuracy = AccuracyProvider::EngineDense;
  int live_depth = 25;
};

inline double flat_zone_reward(double d, const RewardShape& shape) {
  if (!(shape.flat >= 0.0 && shape.flat < shape.zero)) throw std::invalid_argument("reward shape needs 0 <= flat < zero");
  if (!(d >= 0.0)) throw std::invalid_argument("distance must be non-negative");
  if (d <= shape.flat) return 1.0;
  if (d >= shape.zero) return 0.0;
  return 1.0 - (d - shape.flat) / (shape.zero - shape.flat);
}

inline double verify_win_rate(double claim, double truth, const RewardConfig& cfg = {}) {
  return flat_zone_reward(std::abs(claim - truth), cfg.win_rate);
}

inline double pawn_distance(double claim, double truth, const RewardConfig& cfg = {}) {
  double d = std::abs(claim - truth);
  if (std::abs(claim) > cfg.pawn_cap_above && std::abs(truth) > cfg.pawn_cap_above) d = std::min(d, cfg.pawn_cap);
  return d;
}

inline double verify_pawn_score(double claim, double truth, const RewardConfig& cfg = {}) {
  if (claim != 0.0 && truth != 0.0 && ((claim > 0.0) != (truth > 0.0))) return 0.0;
  return flat_zone_reward(pawn_distance(claim, truth, cfg), cfg.pawn);
}

/// Depth-weighted prefix agreement after a mandatory first-move match. When
/// the reference line is shorter than five plies the weights of the missing
/// depths are dropped and the rest renormalized.
inline double verify_pv(const std::vector<std::string>& claimed, const std::vector<std::string>& truth,
                        const Position& pos, const std::array<double, 4>& weights = {0.4, 0.3, 0.2, 0.1}) {
  if (claimed.empty() || truth.empty()) return 0.0;
  auto c = replay_san(pos, claimed);
  auto t = replay_san(pos, truth);
  if (!c || !t) return 0.0;
  if (!(*c)[0].same_as((*t)[0])) return 0.0;
  const std::size_t depths = std::min(t->size(), kMaxPvPlies) - 1;
  if (depths == 0) return 1.0;
  double got = 0.0;
  double available = 0.0;
  std::size_t matched = 0;
  for (std::size_t i = 1; i <= depths; ++i) {
    available += weights[i - 1];
    if (matched == i - 1 && i < c->size() && (*c)[i].same_as((*t)[i])) {
      got += weights[i - 1];
      ++matched;
    }
  }
  if (matched == depths) return 1.0;
  return depths == weights.size() ? got : got / available;
}

inline double verify_capture(const CaptureClaim& claim, const MoveClass& truth) {
  if (!truth.is_capture) return claim.captures ? 0.0 : 1.0;
  return claim.captures && claim.piece == truth.captured->kind && claim.square == truth.captured->square ? 1.0 : 0.0;
}

inline double verify_capture(const CaptureClaim& claim, const Position& pos, const Move& move) {
  return verify_capture(claim, classify_move(pos, move));
}

inline double verify_check(bool claim, const Position& pos, const Move& move) {
  return claim == classify_move(pos, move).gives_check ? 1.0 : 0.0;
}

/// `truth` is a signed mate distance in moves (positive: the mover mates).
inline double verify_mate(const MateClaim& claim, int truth, double tolerance = 3.0) {
  if (!claim.moves || truth == 0) return 0.0;
  if ((*claim.moves > 0) != (truth > 0)) return 0.0;
  const int gap = std::abs(std::abs(*claim.moves) - std::abs(truth));
  if (gap == 0) return 1.0;
  return std::max(0.0, 1.0 - gap / tolerance);
}

/// Compares two move texts, resolving them as SAN when a position is given.
inline bool same_move_text(std::string_view a, std::string_view b, const Position* pos) {
  if (pos) {
    auto ma = try_parse_san(*pos, a);
    auto mb = try_parse_san(*pos, b);
    if (ma && mb) return ma->same_as(*mb);
    if (ma || mb) return false;
  }
  return detail::strip_move_marks(a) == detail::strip_move_marks(b);
}

/// 1 iff the answer is the first candidate carrying the highest claimed win rate.
inline double logic_consistency(const ReasoningTrace& trace, const Position* pos = nullptr) {
  const CandidateClaim* best = nullptr;
  for (const auto& c : trace.candidates)
    if (c.win_rate && (!best || *c.win_rate > *best->win_rate)) best = &c;
  if (!best || !trace.answer) return 0.0;
  return same_move_text(*trace.answer, best->move, pos) ? 1.0 : 0.0;
}

struct CandidateDetail {
  std::string move;
  bool legal = false;
  std::string truth_source = "none";  // "record", "live" or "none"
  std::array<std::optional<double>, kSubtaskCount> reward;
  std::optional<double> win_rate_claim, win_rate_truth;
  std::optional<double> pawn_claim, pawn_truth;
  std::optional<int> mate_claim, mate_truth;
};

struct RewardBreakdown {
  std::array<double, kSubtaskCount> r{};
  std::array<bool, kSubtaskCount> applicable{};
  std::array<double, kSubtaskCount> weights{};  // renormalized over the applicable set
  double r_reason = 0.0;
  double r_form = 0.0;
  double r_acc = 0.0;
  double lambda = 1.0;
  double total = 0.0;
  long weights_step = 0;
  std::size_t truth_gaps = 0;
  std::vector<CandidateDetail> candidates;
};

namespace detail {

struct Truth {
  std::optional<ScoredMove> scored;
  std::string source = "none";
};

inline Truth lookup_truth(const AnalysisRecord& record, const Move& m, Oracle* live, int depth) {
  if (const ScoredMove* sm = record.find(m)) return {*sm, "record"};
  if (live)
    if (auto sm = live->analyze_move(record.position, m, depth)) return {*sm, "live"};
  return {};
}

inline void put_optional(nlohmann::ordered_json& j, const char* key, const std::optional<double>& v) {
  j[key] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline void put_optional(nlohmann::ordered_json& j, const char* key, const std::optional<int>& v) {
  j[key] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace detail

/// Accuracy reward for the final answer; `truth_gaps` counts answers that had
/// no engine truth available.
inline double accuracy_reward(const PositionSample& sample, const std::optional<std::string>& answer,
                              const RewardConfig& cfg = {}, Oracle* live = nullptr, std::size_t* truth_gaps = nullptr) {
  if (!answer) return 0.0;
  auto move = try_parse_san(sample.position, *answer);
  if (!move) return 0.0;
  if (cfg.accuracy == AccuracyProvider::ExactMatch) {
    auto best = sample.best_move();
    return best && best->same_as(*move) ? 1.0 : 0.0;
  }
  if (!sample.record) return 0.0;
  detail::Truth t = detail::lookup_truth(*sample.record, *move, live, cfg.live_depth);
  if (!t.scored) {
    if (truth_gaps) ++*truth_gaps;
    return 0.0;
  }
  return t.scored->win_rate / 100.0;
}

inline RewardBreakdown score_trace(const ReasoningTrace& raw_trace, const PositionSample& sample,
                                   const std::vector<double>& weights, const RewardConfig& cfg = {},
                                   Oracle* live = nullptr) {
  if (weights.size() != kSubtaskCount) throw std::invalid_argument("expected one weight per subtask");
  PositionSample s = sample;
  if (!s.record) {
    if (!live || !live->live()) throw OracleError("no analysis record for " + serialize_fen(s.position));
    s.record = live->engine_analyze(s.position, cfg.live_depth);
  }
  const AnalysisRecord& record = *s.record;
  const Position& pos = s.position;
  const ReasoningTrace trace = dedupe_candidates(raw_trace, &pos);

  RewardBreakdown out;
  out.lambda = cfg.lambda;
  std::array<double, kSubtaskCount> sum{};
  std::array<int, kSubtaskCount> count{};
  auto add = [&](CandidateDetail& d, Subtask k, double r) {
    d.reward[index_of(k)] = r;
    sum[index_of(k)] += r;
    ++count[index_of(k)];
  };

  for (const CandidateClaim& c : trace.candidates) {
    CandidateDetail d;
    d.move = c.move;
    auto move = try_parse_san(pos, c.move);
    d.legal = move.has_value();
    if (!move) {
      for (Subtask k : {Subtask::WinRate, Subtask::PawnScore, Subtask::Pv, Subtask::Capture, Subtask::Check}) add(d, k, 0.0);
      out.candidates.push_back(std::move(d));
      continue;
    }
    const MoveClass mc = classify_move(pos, *move);
    add(d, Subtask::Capture, c.capture ? verify_capture(*c.capture, mc) : 0.0);
    add(d, Subtask::Check, c.check ? (*c.check == mc.gives_check ? 1.0 : 0.0) : 0.0);

    detail::Truth truth = detail::lookup_truth(record, *move, live, cfg.live_depth);
    d.truth_source = truth.source;
    d.win_rate_claim = c.win_rate;
    d.pawn_claim = c.pawn_score;
    if (c.mate && c.mate->moves) d.mate_claim = *c.mate->moves;

    std::optional<int> mate_truth = mc.mates_in;
    if (truth.scored) {
      const ScoredMove& t = *truth.scored;
      d.win_rate_truth = t.win_rate;
      add(d, Subtask::WinRate, c.win_rate ? verify_win_rate(*c.win_rate, t.win_rate, cfg) : 0.0);
      if (t.cp) {
        d.pawn_truth = t.pawns();
        add(d, Subtask::PawnScore, c.pawn_score ? verify_pawn_score(*c.pawn_score, t.pawns(), cfg) : 0.0);
      }
      add(d, Subtask::Pv, c.pv ? verify_pv(*c.pv, t.pv, pos, cfg.pv_weights) : 0.0);
      mate_truth = t.mate;
    } else {
      ++out.truth_gaps;
      add(d, Subtask::WinRate, 0.0);
      add(d, Subtask::PawnScore, 0.0);
      add(d, Subtask::Pv, 0.0);
    }
    if (mate_truth) {
      d.mate_truth = mate_truth;
      add(d, Subtask::Mate, c.mate ? verify_mate(*c.mate, *mate_truth, cfg.mate_tolerance) : 0.0);
    }
    out.candidates.push_back(std::move(d));
  }

  if (trace.candidates.empty()) {
    for (Subtask k : kSubtasks) out.applicable[index_of(k)] = true;
    out.applicable[index_of(Subtask::Mate)] = record.forced_mate().has_value();
  } else {
    for (std::size_t k = 0; k < kSubtaskCount; ++k) {
      out.applicable[k] = count[k] > 0;
      if (count[k] > 0) out.r[k] = sum[k] / count[k];
    }
    out.applicable[index_of(Subtask::Logic)] = true;
  }
  out.r[index_of(Subtask::Logic)] = logic_consistency(trace, &pos);

  const std::vector<double> eff =
      effective_weights(weights, std::vector<bool>(out.applicable.begin(), out.applicable.end()));
  double mass = 0.0;
  for (std::size_t k = 0; k < kSubtaskCount; ++k) {
    out.weights[k] = eff[k];
    out.r_reason += eff[k] * out.r[k];
    mass += eff[k];
  }
  out.r_reason = std::clamp(out.r_reason / mass, 0.0, 1.0);
  out.r_form = trace.format_ok() ? 1.0 : 0.0;
  out.r_acc = accuracy_reward(s, trace.answer, cfg, live, &out.truth_gaps);
  out.total = out.r_form + out.r_acc + cfg.lambda * out.r_reason;
  return out;
}

inline RewardBreakdown score_trace(const ReasoningTrace& trace, const PositionSample& sample, const WeightState& state,
                                   const RewardConfig& cfg = {}, Oracle* live = nullptr) {
  RewardBreakdown b = score_trace(trace, sample, state.w, cfg, live);
  b.weights_step = state.step;
  return b;
}

inline std::vector<double> uniform_weights() { return std::vector<double>(kSubtaskCount, 1.0 / kSubtaskCount); }

inline nlohmann::ordered_json to_json(const RewardBreakdown& b) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json subtasks = nlohmann::ordered_json::object();
  for (Subtask k : kSubtasks) {
    const std::size_t i = index_of(k);
    subtasks[subtask_name(k)] = {{"r", b.r[i]}, {"applicable", b.applicable[i]}, {"weight", b.weights[i]}};
  }
  j["subtasks"] = std::move(subtasks);
  j["r_reason"] = b.r_reason;
  j["r_form"] = b.r_form;
  j["r_acc"] = b.r_acc;
  j["lambda"] = b.lambda;
  j["total"] = b.total;
  j["weights_step"] = b.weights_step;
  j["truth_gaps"] = b.truth_gaps;
  auto cands = nlohmann::ordered_json::array();
  for (const auto& d : b.candidates) {
    nlohmann::ordered_json c;
    c["move"] = d.move;
    c["legal"] = d.legal;
    c["truth"] = d.truth_source;
    nlohmann::ordered_json rewards = nlohmann::ordered_json::object();
    for (Subtask k : kSubtasks)
      if (d.reward[index_of(k)]) rewards[subtask_name(k)] = *d.reward[index_of(k)];
    c["rewards"] = std::move(rewards);
    detail::put_optional(c, "win_rate_claim", d.win_rate_claim);
    detail::put_optional(c, "win_rate_truth", d.win_rate_truth);
    detail::put_optional(c, "pawn_claim", d.pawn_claim);
    detail::put_optional(c, "pawn_truth", d.pawn_truth);
    detail::put_optional(c, "mate_claim", d.mate_claim);
    detail::put_optional(c, "mate_truth", d.mate_truth);
    cands.push_back(std::move(c));
  }
  j["candidates"] = std::move(cands);
  return j;
}

/// Per-subtask means for a scheduler step; subtasks never applicable stay empty.
inline std::vector<std::optional<double>> batch_means(const std::vector<RewardBreakdown>& batch) {
  std::vector<std::optional<double>> out(kSubtaskCount);
  for (std::size_t k = 0; k < kSubtaskCount; ++k) {
    double sum = 0.0;
    int n = 0;
    for (const auto& b : batch)
      if (b.applicable[k]) {
        sum += b.r[k];
        ++n;
      }
    if (n > 0) out[k] = sum / n;
  }
  return out;
}

}  // namespace vps
