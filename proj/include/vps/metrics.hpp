#pragma once

// Held-out evaluation: prediction accuracy, coverage and reasoning-quality
// metrics over deduplicated candidates, with worst-case penalties for missing
// claims and applicability-aware denominators.

#include "vps/rewards.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace vps {

struct MetricPenalties {
  double win_rate = 100.0;  // percentage points
  double pawns = 10.0;
  double pv_overlap = 0.0;
  double mate = 10.0;  // moves
};

struct MetricsConfig {
  std::size_t k_cov = 3;
  MetricPenalties penalties;
};

struct SampleEvaluation {
  std::string id;
  bool top1 = false;
  double coverage = 0.0;
  std::vector<double> win_rate_errors;
  std::vector<double> pawn_errors;
  std::vector<double> pv_overlaps;
  bool consistent = false;
  std::optional<bool> capture_correct;
  std::optional<bool> check_correct;
  std::optional<double> mate_error;
  std::size_t unique_candidates = 0;
  bool format_error = false;
  std::size_t truth_gaps = 0;
};

/// Fraction of available depths d (1..5) at which the first d plies agree.
inline double pv_overlap(const std::vector<std::string>& claimed, const std::vector<std::string>& truth,
                         const Position& pos) {
  auto t = replay_san(pos, truth);
  if (!t || t->empty()) return 0.0;
  const std::size_t depths = std::min(t->size(), kMaxPvPlies);
  std::vector<Move> c;
  Position cur = pos;
  for (const auto& san : claimed) {
    auto m = try_parse_san(cur, san);
    if (!m) break;
    c.push_back(*m);
    cur = detail::make(cur, *m);
  }
  std::size_t prefix = 0;
  while (prefix < depths && prefix < c.size() && c[prefix].same_as((*t)[prefix])) ++prefix;
  return static_cast<double>(prefix) / static_cast<double>(depths);
}

namespace detail {

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace detail

inline SampleEvaluation evaluate_sample(const ReasoningTrace& raw_trace, const PositionSample& sample,
                                        const MetricsConfig& cfg = {}) {
  if (!sample.record) throw OracleError("sample " + sample.id + " has no analysis record");
  const AnalysisRecord& record = *sample.record;
  const Position& pos = sample.position;
  const ReasoningTrace trace = dedupe_candidates(raw_trace, &pos);
  const MetricPenalties& pen = cfg.penalties;

  SampleEvaluation e;
  e.id = sample.id;
  e.format_error = !trace.format_ok();
  e.unique_candidates = trace.candidates.size();
  e.consistent = logic_consistency(trace, &pos) == 1.0;
  if (trace.answer) {
    auto ans = try_parse_san(pos, *trace.answer);
    auto best = sample.best_move();
    e.top1 = ans && best && ans->same_as(*best);
  }

  if (trace.candidates.empty()) {
    e.win_rate_errors.push_back(pen.win_rate);
    e.pawn_errors.push_back(pen.pawns);
    e.pv_overlaps.push_back(pen.pv_overlap);
    if (record.forced_mate()) e.mate_error = pen.mate;
    return e;
  }

  std::vector<Move> legal_candidates;
  std::vector<double> mate_errors;
  bool any_capture = false, all_capture_ok = true;
  bool any_check = false, all_check_ok = true;
  for (const CandidateClaim& c : trace.candidates) {
    auto move = try_parse_san(pos, c.move);
    if (!move) {
      ++e.truth_gaps;
      continue;
    }
    legal_candidates.push_back(*move);
    const MoveClass mc = classify_move(pos, *move);
    any_capture = any_capture || mc.is_capture;
    all_capture_ok = all_capture_ok && c.capture && verify_capture(*c.capture, mc) == 1.0;
    any_check = any_check || mc.gives_check;
    all_check_ok = all_check_ok && c.check && *c.check == mc.gives_check;

    const ScoredMove* t = record.find(*move);
    std::optional<int> mate_truth = t ? t->mate : mc.mates_in;
    if (mate_truth) {
      const bool same_side = c.mate && c.mate->moves && ((*c.mate->moves > 0) == (*mate_truth > 0));
      mate_errors.push_back(same_side ? std::abs(std::abs(*c.mate->moves) - std::abs(*mate_truth)) : pen.mate);
    }
    if (!t) {
      ++e.truth_gaps;
      continue;
    }
    e.win_rate_errors.push_back(c.win_rate ? std::abs(*c.win_rate - t->win_rate) : pen.win_rate);
    if (t->cp) e.pawn_errors.push_back(c.pawn_score ? std::min(std::abs(*c.pawn_score - t->pawns()), pen.pawns) : pen.pawns);
    e.pv_overlaps.push_back(c.pv ? pv_overlap(*c.pv, t->pv, pos) : pen.pv_overlap);
  }

  const std::size_t k = std::min(cfg.k_cov, record.moves.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < k; ++i)
    for (const Move& m : legal_candidates)
      if (m.same_as(record.moves[i].move)) {
        ++hits;
        break;
      }
  e.coverage = k == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(k);
  if (any_capture) e.capture_correct = all_capture_ok;
  if (any_check) e.check_correct = all_check_ok;
  if (!mate_errors.empty()) e.mate_error = detail::mean(mate_errors);
  return e;
}

struct MeanAccumulator {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
};

struct MetricsReport {
  std::size_t samples = 0;
  MeanAccumulator top1, coverage, win_rate_mae, pawn_mae, pv_overlap, consistency, capture, check, mate_mae,
      diversity, format_error;
  std::size_t truth_gaps = 0;
};

/// Per-sample means first, then the mean over samples that define the field.
inline MetricsReport aggregate(const std::vector<SampleEvaluation>& evals) {
  if (evals.empty()) throw std::invalid_argument("cannot aggregate an empty evaluation set");
  MetricsReport r;
  for (const auto& e : evals) {
    ++r.samples;
    r.top1.add(e.top1 ? 1.0 : 0.0);
    r.coverage.add(e.coverage);
    if (!e.win_rate_errors.empty()) r.win_rate_mae.add(detail::mean(e.win_rate_errors));
    if (!e.pawn_errors.empty()) r.pawn_mae.add(detail::mean(e.pawn_errors));
    if (!e.pv_overlaps.empty()) r.pv_overlap.add(detail::mean(e.pv_overlaps));
    r.consistency.add(e.consistent ? 1.0 : 0.0);
    if (e.capture_correct) r.capture.add(*e.capture_correct ? 1.0 : 0.0);
    if (e.check_correct) r.check.add(*e.check_correct ? 1.0 : 0.0);
    if (e.mate_error) r.mate_mae.add(*e.mate_error);
    r.diversity.add(static_cast<double>(e.unique_candidates));
    r.format_error.add(e.format_error ? 1.0 : 0.0);
    r.truth_gaps += e.truth_gaps;
  }
  return r;
}

namespace detail {

inline nlohmann::ordered_json metric_json(const MeanAccumulator& m) {
  return {{"value", m.n ? nlohmann::ordered_json(m.mean()) : nlohmann::ordered_json(nullptr)}, {"n", m.n}};
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const MetricsReport& r) {
  using detail::metric_json;
  nlohmann::ordered_json j;
  j["samples"] = r.samples;
  j["top1_accuracy"] = metric_json(r.top1);
  j["coverage"] = metric_json(r.coverage);
  j["win_rate_mae"] = metric_json(r.win_rate_mae);
  j["pawn_mae"] = metric_json(r.pawn_mae);
  j["pv_overlap"] = metric_json(r.pv_overlap);
  j["consistency"] = metric_json(r.consistency);
  j["capture_accuracy"] = metric_json(r.capture);
  j["check_accuracy"] = metric_json(r.check);
  j["mate_mae"] = metric_json(r.mate_mae);
  j["move_diversity"] = metric_json(r.diversity);
  j["format_error_rate"] = metric_json(r.format_error);
  j["truth_gaps"] = r.truth_gaps;
  return j;
}

inline nlohmann::ordered_json to_json(const SampleEvaluation& e) {
  nlohmann::ordered_json j;
  j["id"] = e.id;
  j["top1"] = e.top1;
  j["coverage"] = e.coverage;
  j["win_rate_errors"] = e.win_rate_errors;
  j["pawn_errors"] = e.pawn_errors;
  j["pv_overlaps"] = e.pv_overlaps;
  j["consistent"] = e.consistent;
  j["capture_correct"] = e.capture_correct ? nlohmann::ordered_json(*e.capture_correct) : nlohmann::ordered_json(nullptr);
  j["check_correct"] = e.check_correct ? nlohmann::ordered_json(*e.check_correct) : nlohmann::ordered_json(nullptr);
  j["mate_error"] = e.mate_error ? nlohmann::ordered_json(*e.mate_error) : nlohmann::ordered_json(nullptr);
  j["unique_candidates"] = e.unique_candidates;
  j["format_error"] = e.format_error;
  j["truth_gaps"] = e.truth_gaps;
  return j;
}

/// Aligned text table with the usual column names.
inline std::string render_table(const MetricsReport& r) {
  struct Col {
    const char* name;
    const MeanAccumulator* m;
    double scale;
  };
  const Col cols[] = {{"Top-1 Acc.", &r.top1, 100.0},       {"Coverage", &r.coverage, 100.0},
                      {"WR MAE", &r.win_rate_mae, 1.0},     {"Pawn MAE", &r.pawn_mae, 1.0},
                      {"PV Overlap", &r.pv_overlap, 100.0}, {"Consist.", &r.consistency, 100.0},
                      {"Capture", &r.capture, 100.0},       {"Check", &r.check, 100.0},
                      {"Mate MAE", &r.mate_mae, 1.0},       {"Move Div.", &r.diversity, 1.0},
                      {"Form. Err.", &r.format_error, 100.0}};
  std::string head, row;
  char buf[64];
  for (const auto& c : cols) {
    std::snprintf(buf, sizeof buf, "%-12s", c.name);
    head += buf;
    if (c.m->n) std::snprintf(buf, sizeof buf, "%-12.2f", c.m->mean() * c.scale);
    else std::snprintf(buf, sizeof buf, "%-12s", "n/a");
    row += buf;
  }
  while (!head.empty() && head.back() == ' ') head.pop_back();
  while (!row.empty() && row.back() == ' ') row.pop_back();
  return head + "\n" + row + "\n";
}

}  // namespace vps
