#pragma once

// Brute-force recomputation of the evaluation report from raw traces, kept
// apart from the metrics module so the two can be compared field by field.

#include "vps/oracle.hpp"
#include "vps/trace.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vps::fixtures {

struct OracleReport {
  std::map<std::string, std::optional<double>> value;
  std::map<std::string, std::size_t> n;
};

inline OracleReport oracle_report(const std::vector<ReasoningTrace>& traces, const std::vector<PositionSample>& samples,
                                  std::size_t k_cov = 3) {
  std::map<std::string, std::vector<double>> per;
  auto same = [](const Move& a, const Move& b) { return a.from == b.from && a.to == b.to && a.promotion == b.promotion; };
  auto resolve = [](const Position& p, const std::string& s) -> std::optional<Move> {
    try {
      return parse_san(p, s);
    } catch (const ChessError&) {
      return std::nullopt;
    }
  };
  auto strip = [](std::string s) {
    while (!s.empty() && std::string("+#!?").find(s.back()) != std::string::npos) s.pop_back();
    return s;
  };

  for (std::size_t i = 0; i < traces.size(); ++i) {
    const Position& pos = samples[i].position;
    const AnalysisRecord& rec = *samples[i].record;
    const ReasoningTrace& tr = traces[i];

    std::vector<CandidateClaim> cands;
    std::vector<std::optional<Move>> res;
    for (const auto& c : tr.candidates) {
      auto m = resolve(pos, c.move);
      bool dup = false;
      for (std::size_t j = 0; j < cands.size(); ++j)
        if ((m && res[j] && same(*m, *res[j])) || (!m && !res[j] && strip(c.move) == strip(cands[j].move))) dup = true;
      if (!dup) {
        cands.push_back(c);
        res.push_back(m);
      }
    }

    bool fmt = tr.flags.think_tags && tr.flags.answer_tags && tr.flags.schema_ok && tr.answer.has_value();
    per["format_error_rate"].push_back(fmt ? 0.0 : 1.0);
    per["move_diversity"].push_back(static_cast<double>(cands.size()));

    const Move best = rec.moves[0].move;
    std::optional<Move> ans = tr.answer ? resolve(pos, *tr.answer) : std::nullopt;
    per["top1_accuracy"].push_back(ans && same(*ans, best) ? 1.0 : 0.0);

    int arg = -1;
    for (std::size_t j = 0; j < cands.size(); ++j)
      if (cands[j].win_rate && (arg < 0 || *cands[j].win_rate > *cands[arg].win_rate)) arg = static_cast<int>(j);
    double cons = 0.0;
    if (arg >= 0 && tr.answer) {
      if (ans && res[arg]) cons = same(*ans, *res[arg]) ? 1.0 : 0.0;
      else if (!ans && !res[arg]) cons = strip(*tr.answer) == strip(cands[arg].move) ? 1.0 : 0.0;
    }
    per["consistency"].push_back(cons);

    const std::size_t k = std::min(k_cov, rec.moves.size());
    double hit = 0;
    for (std::size_t j = 0; j < k; ++j)
      for (const auto& m : res)
        if (m && same(*m, rec.moves[j].move)) {
          hit += 1;
          break;
        }
    per["coverage"].push_back(hit / static_cast<double>(k));

    if (cands.empty()) {
      per["win_rate_mae"].push_back(100.0);
      per["pawn_mae"].push_back(10.0);
      per["pv_overlap"].push_back(0.0);
      bool forced = false;
      for (const auto& sm : rec.moves)
        if (sm.mate && *sm.mate > 0) forced = true;
      if (forced) per["mate_mae"].push_back(10.0);
      continue;
    }

    std::vector<double> wr, pawn, pv, mate;
    bool any_cap = false, cap_ok = true, any_chk = false, chk_ok = true;
    for (std::size_t j = 0; j < cands.size(); ++j) {
      if (!res[j]) continue;
      const CandidateClaim& c = cands[j];
      const Move m = *res[j];
      Position after = apply_move(pos, m);
      const bool check = in_check(after, after.side_to_move);
      const bool mated = check && legal_moves(after).empty();

      PieceKind victim = pos.at(m.to).kind;
      Square vsq = m.to;
      if (victim == PieceKind::None && pos.at(m.from).kind == PieceKind::Pawn && m.from.file() != m.to.file()) {
        victim = PieceKind::Pawn;
        vsq = Square::at(m.to.file(), m.from.rank());
      }
      if (victim != PieceKind::None) any_cap = true;
      bool cap_claim_ok = c.capture && (victim == PieceKind::None
                                            ? !c.capture->captures
                                            : c.capture->captures && c.capture->piece == victim && c.capture->square == vsq);
      cap_ok = cap_ok && cap_claim_ok;
      if (check) any_chk = true;
      chk_ok = chk_ok && c.check && *c.check == check;

      const ScoredMove* t = nullptr;
      for (const auto& sm : rec.moves)
        if (same(sm.move, m)) t = &sm;
      std::optional<int> mt = t ? t->mate : (mated ? std::optional<int>(1) : std::nullopt);
      if (mt) {
        if (c.mate && c.mate->moves && ((*c.mate->moves > 0) == (*mt > 0)))
          mate.push_back(std::abs(std::abs(*c.mate->moves) - std::abs(*mt)));
        else
          mate.push_back(10.0);
      }
      if (!t) continue;
      wr.push_back(c.win_rate ? std::fabs(*c.win_rate - t->win_rate) : 100.0);
      if (t->cp) pawn.push_back(c.pawn_score ? std::min(10.0, std::fabs(*c.pawn_score - *t->cp / 100.0)) : 10.0);

      double ov = 0.0;
      if (c.pv) {
        std::vector<Move> tm;
        Position p = pos;
        for (const auto& s : t->pv) {
          tm.push_back(*resolve(p, s));
          p = apply_move(p, tm.back());
        }
        const std::size_t depth = std::min<std::size_t>(5, tm.size());
        std::size_t agree = 0;
        p = pos;
        for (std::size_t d = 0; d < depth && d < c.pv->size(); ++d) {
          auto cm = resolve(p, (*c.pv)[d]);
          if (!cm || !same(*cm, tm[d])) break;
          ++agree;
          p = apply_move(p, *cm);
        }
        ov = static_cast<double>(agree) / static_cast<double>(depth);
      }
      pv.push_back(ov);
    }
    auto avg = [](const std::vector<double>& v) {
      double s = 0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    if (!wr.empty()) per["win_rate_mae"].push_back(avg(wr));
    if (!pawn.empty()) per["pawn_mae"].push_back(avg(pawn));
    if (!pv.empty()) per["pv_overlap"].push_back(avg(pv));
    if (!mate.empty()) per["mate_mae"].push_back(avg(mate));
    if (any_cap) per["capture_accuracy"].push_back(cap_ok ? 1.0 : 0.0);
    if (any_chk) per["check_accuracy"].push_back(chk_ok ? 1.0 : 0.0);
  }

  OracleReport out;
  for (const char* key : {"top1_accuracy", "coverage", "win_rate_mae", "pawn_mae", "pv_overlap", "consistency",
                          "capture_accuracy", "check_accuracy", "mate_mae", "move_diversity", "format_error_rate"}) {
    const auto& v = per[key];
    out.n[key] = v.size();
    if (v.empty()) {
      out.value[key] = std::nullopt;
      continue;
    }
    double s = 0;
    for (double x : v) s += x;
    out.value[key] = s / static_cast<double>(v.size());
  }
  return out;
}

}  // namespace vps::fixtures
