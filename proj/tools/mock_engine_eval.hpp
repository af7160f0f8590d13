#pragma once

// Deterministic stand-in for a real engine: material balance plus a hashed
// jitter, with exact mate-in-1 detection for both sides and mate-in-2 for
// checking moves. Good enough to drive the protocol and to build fixtures.

#include "vps/chess.hpp"
#include "vps/oracle.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace vps::mock {

struct MockLine {
  Move move;
  std::optional<int> cp;
  std::optional<int> mate;
  std::vector<Move> pv;
};

inline int piece_value(PieceKind k) {
  switch (k) {
    case PieceKind::Pawn: return 100;
    case PieceKind::Knight: return 300;
    case PieceKind::Bishop: return 310;
    case PieceKind::Rook: return 500;
    case PieceKind::Queen: return 900;
    default: return 0;
  }
}

inline int material(const Position& pos, Color side) {
  int v = 0;
  for (const Piece& p : pos.board)
    if (!p.empty()) v += p.color == side ? piece_value(p.kind) : -piece_value(p.kind);
  return v;
}

inline int jitter(const Position& pos, const Move& m) {
  return static_cast<int>(fnv1a64(position_key(pos) + to_uci(m)) % 41) - 20;
}

/// Quick static score of `m` for the mover.
inline int quick_score(const Position& pos, const Move& m) {
  return material(detail::make(pos, m), pos.side_to_move) + jitter(pos, m);
}

inline std::optional<Move> mating_move(const Position& pos) {
  for (const Move& m : legal_moves(pos))
    if (m.is_checkmate) return m;
  return std::nullopt;
}

inline Move greedy_reply(const Position& pos, const std::vector<Move>& moves) {
  const Move* best = &moves.front();
  int best_score = -1000000;
  for (const Move& m : moves) {
    int s = m.is_checkmate ? 1000000 : quick_score(pos, m);
    if (s > best_score) {
      best_score = s;
      best = &m;
    }
  }
  return *best;
}

inline MockLine evaluate(const Position& pos, const Move& m) {
  MockLine line;
  line.move = m;
  line.pv.push_back(m);
  Position child = detail::make(pos, m);
  if (m.is_checkmate) {
    line.mate = 1;
    return line;
  }
  auto replies = legal_moves(child);
  if (replies.empty()) {  // stalemate
    line.cp = 0;
    return line;
  }
  for (const Move& r : replies) {
    if (r.is_checkmate) {
      line.mate = -1;
      line.pv.push_back(r);
      return line;
    }
  }
  if (m.gives_check) {
    bool forced = true;
    std::vector<Move> mate_line;
    for (const Move& r : replies) {
      auto finisher = mating_move(detail::make(child, r));
      if (!finisher) {
        forced = false;
        break;
      }
      if (mate_line.empty()) mate_line = {r, *finisher};
    }
    if (forced) {
      line.mate = 2;
      line.pv.insert(line.pv.end(), mate_line.begin(), mate_line.end());
      return line;
    }
  }
  line.cp = quick_score(pos, m);
  Position cur = child;
  for (int ply = 1; ply < 5; ++ply) {
    auto moves = legal_moves(cur);
    if (moves.empty()) break;
    Move next = greedy_reply(cur, moves);
    line.pv.push_back(next);
    cur = detail::make(cur, next);
  }
  return line;
}

inline int order_key(const MockLine& l) {
  if (l.mate) return *l.mate > 0 ? 100000 - *l.mate : -100000 - *l.mate;
  return *l.cp;
}

/// All legal moves scored and sorted best-first.
inline std::vector<MockLine> analyze_all(const Position& pos, const std::vector<Move>& only = {}) {
  std::vector<MockLine> out;
  for (const Move& m : legal_moves(pos)) {
    if (!only.empty() && std::none_of(only.begin(), only.end(), [&](const Move& o) { return o.same_as(m); })) continue;
    out.push_back(evaluate(pos, m));
  }
  std::stable_sort(out.begin(), out.end(), [](const MockLine& a, const MockLine& b) { return order_key(a) > order_key(b); });
  return out;
}

}  // namespace vps::mock
