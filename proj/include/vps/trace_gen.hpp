#pragma once

// Synthetic reasoning traces built from engine analysis: one candidate block
// per top-k move, with rule facts from the move generator and engine facts
// copied from the record.

#include "vps/oracle.hpp"
#include "vps/prompts.hpp"
#include "vps/trace.hpp"

#include <nlohmann/json.hpp>

#include <istream>
#include <ostream>
#include <string>

namespace vps {

/// The chess reasoning prompt with the board and the legal moves filled in.
inline std::string render_reasoning_prompt(const Position& pos) {
  std::string moves;
  for (const Move& m : legal_moves(pos)) {
    if (!moves.empty()) moves += ", ";
    moves += to_san(pos, m);
  }
  std::string out(prompts::kReasoning);
  auto replace = [&](std::string_view key, const std::string& value) {
    auto at = out.find(key);
    if (at != std::string::npos) out.replace(at, key.size(), value);
  };
  replace("<board>", serialize_fen(pos));
  replace("<legal moves>", moves);
  return out;
}

/// Claims for one scored move that are all true by construction.
inline CandidateClaim truthful_claim(const Position& pos, const ScoredMove& sm) {
  CandidateClaim c;
  c.move = sm.san;
  MoveClass mc = classify_move(pos, sm.move);
  c.capture = mc.captured ? CaptureClaim{true, mc.captured->kind, mc.captured->square} : CaptureClaim{};
  c.check = mc.gives_check;
  c.mate = MateClaim{sm.mate};
  if (sm.cp) c.pawn_score = *sm.cp / 100.0;
  c.win_rate = sm.win_rate;
  std::vector<std::string> pv = sm.pv;
  if (pv.size() > kMaxPvPlies) pv.resize(kMaxPvPlies);
  c.pv = pv;
  return c;
}

inline ReasoningTrace truthful_trace(const AnalysisRecord& record, std::size_t k = 3) {
  if (record.moves.empty()) throw OracleError("cannot build a trace from an empty record");
  ReasoningTrace t;
  const std::size_t n = std::min(k == 0 ? std::size_t{1} : k, record.moves.size());
  for (std::size_t i = 0; i < n; ++i) t.candidates.push_back(truthful_claim(record.position, record.moves[i]));
  t.stated_best = record.best().san;
  t.answer = record.best().san;
  return t;
}

inline std::string generate_trace(const PositionSample& sample, std::size_t k = 3) {
  if (!sample.record) throw OracleError("sample " + sample.id + " has no analysis record");
  return serialize_trace(truthful_trace(*sample.record, k));
}

struct CorpusStats {
  std::size_t written = 0;
  std::size_t skipped = 0;
};

inline nlohmann::ordered_json sft_line(const PositionSample& sample, std::size_t k) {
  nlohmann::ordered_json j;
  j["fen"] = serialize_fen(sample.position);
  j["prompt"] = render_reasoning_prompt(sample.position);
  j["trace"] = generate_trace(sample, k);
  return j;
}

/// Writes one {fen, prompt, trace} line per sample that carries a record.
template <class Range>
CorpusStats generate_corpus(const Range& samples, std::size_t k, std::ostream& out) {
  CorpusStats stats;
  for (const PositionSample& s : samples) {
    if (!s.record || s.record->moves.empty()) {
      ++stats.skipped;
      continue;
    }
    out << sft_line(s, k).dump() << '\n';
    ++stats.written;
  }
  return stats;
}

}  // namespace vps
