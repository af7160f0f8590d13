#pragma once

// Rules-complete chess model: FEN/SAN/UCI notation, legal move generation,
// move application and move classification (capture, check, mate-in-one).
// Mailbox board; every type is an immutable-after-construction value.

#include <array>
#include <cctype>
#include <cstdlib>
#include <charconv>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vps {

enum class Color : std::uint8_t { White, Black };

constexpr Color opposite(Color c) { return c == Color::White ? Color::Black : Color::White; }

enum class PieceKind : std::uint8_t { None, Pawn, Knight, Bishop, Rook, Queen, King };

struct Piece {
  PieceKind kind = PieceKind::None;
  Color color = Color::White;

  constexpr bool empty() const { return kind == PieceKind::None; }
  constexpr bool is(PieceKind k, Color c) const { return kind == k && color == c; }
  friend constexpr bool operator==(const Piece& a, const Piece& b) {
    return a.kind == b.kind && (a.kind == PieceKind::None || a.color == b.color);
  }
};

/// Board square, a1 = 0 ... h8 = 63.
struct Square {
  int index = -1;

  constexpr Square() = default;
  constexpr explicit Square(int i) : index(i) {}
  static constexpr Square at(int file, int rank) { return Square(rank * 8 + file); }

  constexpr int file() const { return index & 7; }
  constexpr int rank() const { return index >> 3; }
  constexpr bool valid() const { return index >= 0 && index < 64; }

  std::string name() const {
    return {static_cast<char>('a' + file()), static_cast<char>('1' + rank())};
  }
  static std::optional<Square> parse(std::string_view s) {
    if (s.size() != 2 || s[0] < 'a' || s[0] > 'h' || s[1] < '1' || s[1] > '8') return std::nullopt;
    return Square::at(s[0] - 'a', s[1] - '1');
  }

  friend constexpr bool operator==(Square a, Square b) { return a.index == b.index; }
  friend constexpr auto operator<=>(Square a, Square b) { return a.index <=> b.index; }
};

enum CastlingFlag : std::uint8_t {
  kWhiteKingside = 1,
  kWhiteQueenside = 2,
  kBlackKingside = 4,
  kBlackQueenside = 8,
};

enum class CastleSide : std::uint8_t { None, King, Queen };

struct Position {
  std::array<Piece, 64> board{};
  Color side_to_move = Color::White;
  std::uint8_t castling = 0;
  std::optional<Square> en_passant;
  int halfmove_clock = 0;
  int fullmove_number = 1;

  const Piece& at(Square s) const { return board[static_cast<std::size_t>(s.index)]; }
  Piece& at(Square s) { return board[static_cast<std::size_t>(s.index)]; }

  std::optional<Square> king_square(Color c) const {
    for (int i = 0; i < 64; ++i)
      if (board[static_cast<std::size_t>(i)].is(PieceKind::King, c)) return Square(i);
    return std::nullopt;
  }

  static Position start();

  friend bool operator==(const Position&, const Position&) = default;
};

struct Move {
  Square from;
  Square to;
  PieceKind piece = PieceKind::None;
  PieceKind promotion = PieceKind::None;
  bool capture = false;
  bool en_passant = false;
  CastleSide castle = CastleSide::None;
  bool gives_check = false;
  bool is_checkmate = false;

  /// Identity of a move: flags are derived data and do not participate.
  bool same_as(const Move& o) const {
    return from == o.from && to == o.to && promotion == o.promotion;
  }
  friend bool operator==(const Move&, const Move&) = default;
};

struct CapturedPiece {
  PieceKind kind = PieceKind::None;
  Square square;
  friend bool operator==(const CapturedPiece&, const CapturedPiece&) = default;
};

struct MoveClass {
  bool is_capture = false;
  std::optional<CapturedPiece> captured;
  bool gives_check = false;
  std::optional<int> mates_in;  // 1 iff the move mates immediately
};

// ---------------------------------------------------------------------------
// Errors

class ChessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FenErrorKind {
  FieldCount,
  RankCount,
  RankLength,
  BadPiece,
  BadSideToMove,
  BadCastling,
  BadEnPassant,
  BadClock,
  MissingKing,
  ExtraKing,
  PawnOnBackRank,
  OpponentInCheck,
};

class FenError : public ChessError {
 public:
  FenError(FenErrorKind kind, const std::string& what) : ChessError("FEN: " + what), kind_(kind) {}
  FenErrorKind kind() const { return kind_; }

 private:
  FenErrorKind kind_;
};

enum class SanErrorKind { Malformed, NoMatch, Ambiguous, AnnotationMismatch };

class SanError : public ChessError {
 public:
  SanError(SanErrorKind kind, const std::string& what) : ChessError("SAN: " + what), kind_(kind) {}
  SanErrorKind kind() const { return kind_; }

 private:
  SanErrorKind kind_;
};

class IllegalMoveError : public ChessError {
 public:
  using ChessError::ChessError;
};

// ---------------------------------------------------------------------------
// Piece helpers

inline char piece_letter(PieceKind k) {
  switch (k) {
    case PieceKind::Pawn: return 'P';
    case PieceKind::Knight: return 'N';
    case PieceKind::Bishop: return 'B';
    case PieceKind::Rook: return 'R';
    case PieceKind::Queen: return 'Q';
    case PieceKind::King: return 'K';
    default: return '?';
  }
}

inline std::optional<PieceKind> piece_from_letter(char c) {
  switch (std::toupper(static_cast<unsigned char>(c))) {
    case 'P': return PieceKind::Pawn;
    case 'N': return PieceKind::Knight;
    case 'B': return PieceKind::Bishop;
    case 'R': return PieceKind::Rook;
    case 'Q': return PieceKind::Queen;
    case 'K': return PieceKind::King;
    default: return std::nullopt;
  }
}

inline const char* piece_name(PieceKind k) {
  switch (k) {
    case PieceKind::Pawn: return "Pawn";
    case PieceKind::Knight: return "Knight";
    case PieceKind::Bishop: return "Bishop";
    case PieceKind::Rook: return "Rook";
    case PieceKind::Queen: return "Queen";
    case PieceKind::King: return "King";
    default: return "None";
  }
}

inline std::optional<PieceKind> piece_from_name(std::string_view name) {
  std::string lower;
  for (char c : name) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "pawn" || lower == "p") return PieceKind::Pawn;
  if (lower == "knight" || lower == "n") return PieceKind::Knight;
  if (lower == "bishop" || lower == "b") return PieceKind::Bishop;
  if (lower == "rook" || lower == "r") return PieceKind::Rook;
  if (lower == "queen" || lower == "q") return PieceKind::Queen;
  if (lower == "king" || lower == "k") return PieceKind::King;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Attacks and generation internals

namespace detail {

inline constexpr int kKnightSteps[8][2] = {{1, 2}, {2, 1}, {2, -1}, {1, -2}, {-1, -2}, {-2, -1}, {-2, 1}, {-1, 2}};
inline constexpr int kKingSteps[8][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
inline constexpr int kRookDirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
inline constexpr int kBishopDirs[4][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};

constexpr bool on_board(int f, int r) { return f >= 0 && f < 8 && r >= 0 && r < 8; }

inline bool slider_hits(const Position& pos, Square sq, Color by, const int (&dirs)[4][2], PieceKind a, PieceKind b) {
  for (const auto& d : dirs) {
    int f = sq.file() + d[0], r = sq.rank() + d[1];
    while (on_board(f, r)) {
      const Piece& p = pos.at(Square::at(f, r));
      if (!p.empty()) {
        if (p.color == by && (p.kind == a || p.kind == b)) return true;
        break;
      }
      f += d[0];
      r += d[1];
    }
  }
  return false;
}

}  // namespace detail

inline bool is_attacked(const Position& pos, Square sq, Color by) {
  using namespace detail;
  // pawns attack diagonally forward, so look backward from the target
  const int pawn_dr = by == Color::White ? -1 : 1;
  for (int df : {-1, 1}) {
    int f = sq.file() + df, r = sq.rank() + pawn_dr;
    if (on_board(f, r) && pos.at(Square::at(f, r)).is(PieceKind::Pawn, by)) return true;
  }
  for (const auto& s : kKnightSteps) {
    int f = sq.file() + s[0], r = sq.rank() + s[1];
    if (on_board(f, r) && pos.at(Square::at(f, r)).is(PieceKind::Knight, by)) return true;
  }
  for (const auto& s : kKingSteps) {
    int f = sq.file() + s[0], r = sq.rank() + s[1];
    if (on_board(f, r) && pos.at(Square::at(f, r)).is(PieceKind::King, by)) return true;
  }
  return slider_hits(pos, sq, by, kRookDirs, PieceKind::Rook, PieceKind::Queen) ||
         slider_hits(pos, sq, by, kBishopDirs, PieceKind::Bishop, PieceKind::Queen);
}

inline bool in_check(const Position& pos, Color c) {
  auto k = pos.king_square(c);
  return k && is_attacked(pos, *k, opposite(c));
}

namespace detail {

inline void add_pawn_moves(const Position& pos, Square from, std::vector<Move>& out) {
  const Color us = pos.side_to_move;
  const int dir = us == Color::White ? 1 : -1;
  const int start_rank = us == Color::White ? 1 : 6;
  const int last_rank = us == Color::White ? 7 : 0;
  const int f = from.file(), r = from.rank();

  auto push = [&](Square to, bool capture, bool ep) {
    if (to.rank() == last_rank) {
      for (PieceKind promo : {PieceKind::Queen, PieceKind::Rook, PieceKind::Bishop, PieceKind::Knight}) {
        Move m{from, to, PieceKind::Pawn, promo, capture, false};
        out.push_back(m);
      }
    } else {
      Move m{from, to, PieceKind::Pawn, PieceKind::None, capture, ep};
      out.push_back(m);
    }
  };

  if (on_board(f, r + dir) && pos.at(Square::at(f, r + dir)).empty()) {
    push(Square::at(f, r + dir), false, false);
    if (r == start_rank && pos.at(Square::at(f, r + 2 * dir)).empty()) push(Square::at(f, r + 2 * dir), false, false);
  }
  for (int df : {-1, 1}) {
    if (!on_board(f + df, r + dir)) continue;
    Square to = Square::at(f + df, r + dir);
    const Piece& target = pos.at(to);
    if (!target.empty() && target.color != us && target.kind != PieceKind::King) {
      push(to, true, false);
    } else if (target.empty() && pos.en_passant && *pos.en_passant == to) {
      push(to, true, true);
    }
  }
}

inline void add_step_moves(const Position& pos, Square from, PieceKind kind, const int (&steps)[8][2],
                           std::vector<Move>& out) {
  for (const auto& s : steps) {
    int f = from.file() + s[0], r = from.rank() + s[1];
    if (!on_board(f, r)) continue;
    Square to = Square::at(f, r);
    const Piece& target = pos.at(to);
    if (target.empty()) {
      out.push_back(Move{from, to, kind});
    } else if (target.color != pos.side_to_move && target.kind != PieceKind::King) {
      out.push_back(Move{from, to, kind, PieceKind::None, true});
    }
  }
}

inline void add_slider_moves(const Position& pos, Square from, PieceKind kind, const int (&dirs)[4][2],
                             std::vector<Move>& out) {
  for (const auto& d : dirs) {
    int f = from.file() + d[0], r = from.rank() + d[1];
    while (on_board(f, r)) {
      Square to = Square::at(f, r);
      const Piece& target = pos.at(to);
      if (target.empty()) {
        out.push_back(Move{from, to, kind});
      } else {
        if (target.color != pos.side_to_move && target.kind != PieceKind::King)
          out.push_back(Move{from, to, kind, PieceKind::None, true});
        break;
      }
      f += d[0];
      r += d[1];
    }
  }
}

inline void add_castling(const Position& pos, Square king_from, std::vector<Move>& out) {
  const Color us = pos.side_to_move;
  const Color them = opposite(us);
  const int rank = us == Color::White ? 0 : 7;
  if (king_from != Square::at(4, rank) || is_attacked(pos, king_from, them)) return;
  const std::uint8_t ks = us == Color::White ? kWhiteKingside : kBlackKingside;
  const std::uint8_t qs = us == Color::White ? kWhiteQueenside : kBlackQueenside;
  auto empty = [&](int f) { return pos.at(Square::at(f, rank)).empty(); };
  auto safe = [&](int f) { return !is_attacked(pos, Square::at(f, rank), them); };
  if ((pos.castling & ks) && pos.at(Square::at(7, rank)).is(PieceKind::Rook, us) && empty(5) && empty(6) &&
      safe(5) && safe(6)) {
    Move m{king_from, Square::at(6, rank), PieceKind::King};
    m.castle = CastleSide::King;
    out.push_back(m);
  }
  if ((pos.castling & qs) && pos.at(Square::at(0, rank)).is(PieceKind::Rook, us) && empty(1) && empty(2) &&
      empty(3) && safe(3) && safe(2)) {
    Move m{king_from, Square::at(2, rank), PieceKind::King};
    m.castle = CastleSide::Queen;
    out.push_back(m);
  }
}

inline std::vector<Move> pseudo_moves(const Position& pos) {
  std::vector<Move> out;
  out.reserve(64);
  for (int i = 0; i < 64; ++i) {
    const Piece& p = pos.board[static_cast<std::size_t>(i)];
    if (p.empty() || p.color != pos.side_to_move) continue;
    Square from(i);
    switch (p.kind) {
      case PieceKind::Pawn: add_pawn_moves(pos, from, out); break;
      case PieceKind::Knight: add_step_moves(pos, from, PieceKind::Knight, kKnightSteps, out); break;
      case PieceKind::Bishop: add_slider_moves(pos, from, PieceKind::Bishop, kBishopDirs, out); break;
      case PieceKind::Rook: add_slider_moves(pos, from, PieceKind::Rook, kRookDirs, out); break;
      case PieceKind::Queen:
        add_slider_moves(pos, from, PieceKind::Queen, kBishopDirs, out);
        add_slider_moves(pos, from, PieceKind::Queen, kRookDirs, out);
        break;
      case PieceKind::King:
        add_step_moves(pos, from, PieceKind::King, kKingSteps, out);
        add_castling(pos, from, out);
        break;
      default: break;
    }
  }
  return out;
}

inline void clear_rights_for(Position& pos, Square sq) {
  if (sq == Square::at(0, 0)) pos.castling &= ~kWhiteQueenside;
  if (sq == Square::at(7, 0)) pos.castling &= ~kWhiteKingside;
  if (sq == Square::at(0, 7)) pos.castling &= ~kBlackQueenside;
  if (sq == Square::at(7, 7)) pos.castling &= ~kBlackKingside;
  if (sq == Square::at(4, 0)) pos.castling &= ~(kWhiteKingside | kWhiteQueenside);
  if (sq == Square::at(4, 7)) pos.castling &= ~(kBlackKingside | kBlackQueenside);
}

/// Applies a pseudo-legal move without legality checks. The en-passant square
/// is left raw (set after every double push); callers normalise it.
inline Position make_raw(const Position& pos, const Move& m) {
  Position next = pos;
  const Color us = pos.side_to_move;
  Piece moving = pos.at(m.from);
  const bool capture = !pos.at(m.to).empty() || m.en_passant;

  next.at(m.from) = Piece{};
  if (m.en_passant) next.at(Square::at(m.to.file(), m.from.rank())) = Piece{};
  if (m.promotion != PieceKind::None) moving.kind = m.promotion;
  next.at(m.to) = moving;

  if (m.castle != CastleSide::None) {
    const int rank = m.from.rank();
    const int rook_from = m.castle == CastleSide::King ? 7 : 0;
    const int rook_to = m.castle == CastleSide::King ? 5 : 3;
    next.at(Square::at(rook_to, rank)) = next.at(Square::at(rook_from, rank));
    next.at(Square::at(rook_from, rank)) = Piece{};
  }

  clear_rights_for(next, m.from);
  clear_rights_for(next, m.to);

  next.en_passant.reset();
  if (m.piece == PieceKind::Pawn && std::abs(m.to.rank() - m.from.rank()) == 2)
    next.en_passant = Square::at(m.from.file(), (m.from.rank() + m.to.rank()) / 2);

  next.halfmove_clock = (m.piece == PieceKind::Pawn || capture) ? 0 : pos.halfmove_clock + 1;
  if (us == Color::Black) ++next.fullmove_number;
  next.side_to_move = opposite(us);
  return next;
}

inline bool leaves_king_safe(const Position& pos, const Move& m) {
  Position next = make_raw(pos, m);
  return !in_check(next, pos.side_to_move);
}

/// Legal moves without check/mate annotation.
inline std::vector<Move> legal_moves_plain(const Position& pos) {
  std::vector<Move> out;
  for (const Move& m : pseudo_moves(pos))
    if (leaves_king_safe(pos, m)) out.push_back(m);
  return out;
}

inline bool has_legal_move(const Position& pos) {
  for (const Move& m : pseudo_moves(pos))
    if (leaves_king_safe(pos, m)) return true;
  return false;
}

/// Keeps the en-passant target only when a legal en-passant capture exists.
inline void normalize_en_passant(Position& pos) {
  if (!pos.en_passant) return;
  const Square target = *pos.en_passant;
  const Color us = pos.side_to_move;
  const int from_rank = us == Color::White ? 4 : 3;
  for (int df : {-1, 1}) {
    int f = target.file() + df;
    if (!on_board(f, from_rank)) continue;
    Square from = Square::at(f, from_rank);
    if (!pos.at(from).is(PieceKind::Pawn, us)) continue;
    Move m{from, target, PieceKind::Pawn, PieceKind::None, true, true};
    if (leaves_king_safe(pos, m)) return;
  }
  pos.en_passant.reset();
}

inline Position make(const Position& pos, const Move& m) {
  Position next = make_raw(pos, m);
  normalize_en_passant(next);
  return next;
}

inline void annotate(const Position& pos, Move& m) {
  Position next = make_raw(pos, m);
  normalize_en_passant(next);
  m.capture = !pos.at(m.to).empty() || m.en_passant;
  m.gives_check = in_check(next, next.side_to_move);
  m.is_checkmate = m.gives_check && !has_legal_move(next);
}

}  // namespace detail

/// All legal moves with every flag populated.
inline std::vector<Move> legal_moves(const Position& pos) {
  std::vector<Move> moves = detail::legal_moves_plain(pos);
  for (Move& m : moves) detail::annotate(pos, m);
  return moves;
}

inline bool is_checkmate(const Position& pos) {
  return in_check(pos, pos.side_to_move) && !detail::has_legal_move(pos);
}

inline bool is_stalemate(const Position& pos) {
  return !in_check(pos, pos.side_to_move) && !detail::has_legal_move(pos);
}

inline std::uint64_t perft(const Position& pos, int depth) {
  if (depth <= 0) return 1;
  std::vector<Move> moves = detail::legal_moves_plain(pos);
  if (depth == 1) return moves.size();
  std::uint64_t nodes = 0;
  for (const Move& m : moves) nodes += perft(detail::make(pos, m), depth - 1);
  return nodes;
}

/// Finds the legal move matching `mv` by (from, to, promotion) and returns it
/// with recomputed flags.
inline std::optional<Move> find_legal(const Position& pos, const Move& mv) {
  for (const Move& m : detail::legal_moves_plain(pos)) {
    if (m.same_as(mv)) {
      Move out = m;
      detail::annotate(pos, out);
      return out;
    }
  }
  return std::nullopt;
}

inline Position apply_move(const Position& pos, const Move& mv) {
  auto legal = find_legal(pos, mv);
  if (!legal) throw IllegalMoveError("illegal move " + mv.from.name() + mv.to.name());
  return detail::make(pos, *legal);
}

inline MoveClass classify_move(const Position& pos, const Move& mv) {
  auto legal = find_legal(pos, mv);
  if (!legal) throw IllegalMoveError("cannot classify illegal move " + mv.from.name() + mv.to.name());
  MoveClass out;
  out.is_capture = legal->capture;
  if (legal->capture) {
    Square sq = legal->en_passant ? Square::at(legal->to.file(), legal->from.rank()) : legal->to;
    out.captured = CapturedPiece{pos.at(sq).kind, sq};
  }
  out.gives_check = legal->gives_check;
  if (legal->is_checkmate) out.mates_in = 1;
  return out;
}

// ---------------------------------------------------------------------------
// FEN

struct FenOptions {
  /// Accept 4-field FENs (no clocks), as found in evaluation databases.
  bool allow_missing_clocks = false;
};

inline Position parse_fen(std::string_view text, FenOptions opts = {}) {
  std::vector<std::string> fields;
  {
    std::istringstream in{std::string(text)};
    std::string f;
    while (in >> f) fields.push_back(f);
  }
  if (fields.size() == 4 && opts.allow_missing_clocks) {
    fields.emplace_back("0");
    fields.emplace_back("1");
  }
  if (fields.size() != 6)
    throw FenError(FenErrorKind::FieldCount, "expected 6 fields, got " + std::to_string(fields.size()));

  Position pos;
  int rank = 7, file = 0;
  int ranks_seen = 1;
  for (char c : fields[0]) {
    if (c == '/') {
      if (file != 8) throw FenError(FenErrorKind::RankLength, "rank " + std::to_string(rank + 1) + " has length " + std::to_string(file));
      --rank;
      file = 0;
      ++ranks_seen;
      if (rank < 0) throw FenError(FenErrorKind::RankCount, "more than 8 ranks");
    } else if (c >= '1' && c <= '8') {
      file += c - '0';
      if (file > 8) throw FenError(FenErrorKind::RankLength, "rank " + std::to_string(rank + 1) + " longer than 8");
    } else {
      auto kind = piece_from_letter(c);
      if (!kind || !std::isalpha(static_cast<unsigned char>(c)))
        throw FenError(FenErrorKind::BadPiece, std::string("illegal piece character '") + c + "'");
      if (file >= 8) throw FenError(FenErrorKind::RankLength, "rank " + std::to_string(rank + 1) + " longer than 8");
      Color color = std::isupper(static_cast<unsigned char>(c)) ? Color::White : Color::Black;
      pos.at(Square::at(file, rank)) = Piece{*kind, color};
      ++file;
    }
  }
  if (ranks_seen != 8) throw FenError(FenErrorKind::RankCount, "expected 8 ranks, got " + std::to_string(ranks_seen));
  if (file != 8) throw FenError(FenErrorKind::RankLength, "rank 1 has length " + std::to_string(file));

  if (fields[1] == "w") pos.side_to_move = Color::White;
  else if (fields[1] == "b") pos.side_to_move = Color::Black;
  else throw FenError(FenErrorKind::BadSideToMove, "side to move must be 'w' or 'b'");

  if (fields[2] != "-") {
    for (char c : fields[2]) {
      switch (c) {
        case 'K': pos.castling |= kWhiteKingside; break;
        case 'Q': pos.castling |= kWhiteQueenside; break;
        case 'k': pos.castling |= kBlackKingside; break;
        case 'q': pos.castling |= kBlackQueenside; break;
        default: throw FenError(FenErrorKind::BadCastling, std::string("bad castling character '") + c + "'");
      }
    }
  }

  for (Color c : {Color::White, Color::Black}) {
    int kings = 0;
    for (const Piece& p : pos.board) kings += p.is(PieceKind::King, c);
    const char* side = c == Color::White ? "white" : "black";
    if (kings == 0) throw FenError(FenErrorKind::MissingKing, std::string("missing ") + side + " king");
    if (kings > 1) throw FenError(FenErrorKind::ExtraKing, std::string("more than one ") + side + " king");
  }
  for (int f = 0; f < 8; ++f) {
    if (pos.at(Square::at(f, 0)).kind == PieceKind::Pawn || pos.at(Square::at(f, 7)).kind == PieceKind::Pawn)
      throw FenError(FenErrorKind::PawnOnBackRank, "pawn on first or last rank");
  }

  // Rights without king and rook on their home squares are dropped.
  auto home = [&](int f, int r, PieceKind k, Color c) { return pos.at(Square::at(f, r)).is(k, c); };
  if (!home(4, 0, PieceKind::King, Color::White)) pos.castling &= ~(kWhiteKingside | kWhiteQueenside);
  if (!home(4, 7, PieceKind::King, Color::Black)) pos.castling &= ~(kBlackKingside | kBlackQueenside);
  if (!home(7, 0, PieceKind::Rook, Color::White)) pos.castling &= ~kWhiteKingside;
  if (!home(0, 0, PieceKind::Rook, Color::White)) pos.castling &= ~kWhiteQueenside;
  if (!home(7, 7, PieceKind::Rook, Color::Black)) pos.castling &= ~kBlackKingside;
  if (!home(0, 7, PieceKind::Rook, Color::Black)) pos.castling &= ~kBlackQueenside;

  if (fields[3] != "-") {
    auto sq = Square::parse(fields[3]);
    const int want_rank = pos.side_to_move == Color::White ? 5 : 2;
    if (!sq || sq->rank() != want_rank) throw FenError(FenErrorKind::BadEnPassant, "bad en-passant square '" + fields[3] + "'");
    const int dir = pos.side_to_move == Color::White ? -1 : 1;
    const Color mover = opposite(pos.side_to_move);
    const Square pawn_sq = Square::at(sq->file(), sq->rank() + dir);
    const Square origin = Square::at(sq->file(), sq->rank() - dir);
    if (!pos.at(pawn_sq).is(PieceKind::Pawn, mover) || !pos.at(*sq).empty() || !pos.at(origin).empty())
      throw FenError(FenErrorKind::BadEnPassant, "en-passant square '" + fields[3] + "' inconsistent with board");
    pos.en_passant = sq;
  }

  auto parse_count = [](const std::string& s, const char* what) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw FenError(FenErrorKind::BadClock, std::string("bad ") + what);
    return v;
  };
  pos.halfmove_clock = parse_count(fields[4], "halfmove clock");
  pos.fullmove_number = parse_count(fields[5], "fullmove number");
  if (pos.halfmove_clock < 0) throw FenError(FenErrorKind::BadClock, "negative halfmove clock");
  if (pos.fullmove_number < 1) throw FenError(FenErrorKind::BadClock, "fullmove number must be >= 1");

  if (in_check(pos, opposite(pos.side_to_move)))
    throw FenError(FenErrorKind::OpponentInCheck, "side not to move is in check");

  detail::normalize_en_passant(pos);
  return pos;
}

inline std::string serialize_fen(const Position& pos) {
  std::string out;
  for (int rank = 7; rank >= 0; --rank) {
    int empty = 0;
    for (int file = 0; file < 8; ++file) {
      const Piece& p = pos.at(Square::at(file, rank));
      if (p.empty()) {
        ++empty;
        continue;
      }
      if (empty) out += static_cast<char>('0' + empty);
      empty = 0;
      char c = piece_letter(p.kind);
      out += p.color == Color::White ? c : static_cast<char>(std::tolower(c));
    }
    if (empty) out += static_cast<char>('0' + empty);
    if (rank) out += '/';
  }
  out += pos.side_to_move == Color::White ? " w " : " b ";
  if (!pos.castling) out += '-';
  if (pos.castling & kWhiteKingside) out += 'K';
  if (pos.castling & kWhiteQueenside) out += 'Q';
  if (pos.castling & kBlackKingside) out += 'k';
  if (pos.castling & kBlackQueenside) out += 'q';
  out += ' ';
  out += pos.en_passant ? pos.en_passant->name() : "-";
  out += ' ' + std::to_string(pos.halfmove_clock) + ' ' + std::to_string(pos.fullmove_number);
  return out;
}

inline Position Position::start() {
  return parse_fen("rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1");
}

/// FEN without the move counters; identifies a position for analysis lookup.
inline std::string position_key(const Position& pos) {
  std::string fen = serialize_fen(pos);
  auto cut = fen.rfind(' ');
  cut = fen.rfind(' ', cut - 1);
  return fen.substr(0, cut);
}

// ---------------------------------------------------------------------------
// SAN and UCI notation

inline std::string to_san(const Position& pos, const Move& mv) {
  auto moves = detail::legal_moves_plain(pos);
  const Move* found = nullptr;
  for (const Move& m : moves)
    if (m.same_as(mv)) found = &m;
  if (!found) throw IllegalMoveError("cannot write SAN for illegal move " + mv.from.name() + mv.to.name());
  Move m = *found;
  detail::annotate(pos, m);

  std::string san;
  if (m.castle == CastleSide::King) {
    san = "O-O";
  } else if (m.castle == CastleSide::Queen) {
    san = "O-O-O";
  } else if (m.piece == PieceKind::Pawn) {
    if (m.capture) {
      san += static_cast<char>('a' + m.from.file());
      san += 'x';
    }
    san += m.to.name();
    if (m.promotion != PieceKind::None) {
      san += '=';
      san += piece_letter(m.promotion);
    }
  } else {
    san += piece_letter(m.piece);
    bool clash = false, same_file = false, same_rank = false;
    for (const Move& o : moves) {
      if (o.piece != m.piece || o.to != m.to || o.from == m.from) continue;
      clash = true;
      same_file |= o.from.file() == m.from.file();
      same_rank |= o.from.rank() == m.from.rank();
    }
    if (clash) {
      if (!same_file) san += static_cast<char>('a' + m.from.file());
      else if (!same_rank) san += static_cast<char>('1' + m.from.rank());
      else san += m.from.name();
    }
    if (m.capture) san += 'x';
    san += m.to.name();
  }
  if (m.is_checkmate) san += '#';
  else if (m.gives_check) san += '+';
  return san;
}

inline std::string to_uci(const Move& mv) {
  std::string s = mv.from.name() + mv.to.name();
  if (mv.promotion != PieceKind::None)
    s += static_cast<char>(std::tolower(piece_letter(mv.promotion)));
  return s;
}

inline Move parse_uci(const Position& pos, std::string_view text) {
  if (text.size() != 4 && text.size() != 5) throw SanError(SanErrorKind::Malformed, "bad UCI move '" + std::string(text) + "'");
  auto from = Square::parse(text.substr(0, 2));
  auto to = Square::parse(text.substr(2, 2));
  if (!from || !to) throw SanError(SanErrorKind::Malformed, "bad UCI move '" + std::string(text) + "'");
  Move probe{*from, *to};
  if (text.size() == 5) {
    auto promo = piece_from_letter(text[4]);
    if (!promo) throw SanError(SanErrorKind::Malformed, "bad promotion in '" + std::string(text) + "'");
    probe.promotion = *promo;
  }
  // engines write castling as king-takes-own-rook in Chess960 mode only; standard e1g1 is fine
  auto legal = find_legal(pos, probe);
  if (!legal) throw SanError(SanErrorKind::NoMatch, "no legal move matches '" + std::string(text) + "'");
  return *legal;
}

enum class SanMode { Lenient, Strict };

inline Move parse_san(const Position& pos, std::string_view text, SanMode mode = SanMode::Lenient) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  const std::string original = s;
  if (s.size() >= 4 && s.ends_with("e.p.")) s.resize(s.size() - 4);

  bool mark_check = false, mark_mate = false;
  while (!s.empty() && std::string_view("+#!?").find(s.back()) != std::string_view::npos) {
    mark_check |= s.back() == '+';
    mark_mate |= s.back() == '#';
    s.pop_back();
  }
  if (s.empty()) throw SanError(SanErrorKind::Malformed, "empty move");

  std::vector<Move> candidates;
  bool mark_capture = false;
  PieceKind kind = PieceKind::Pawn;

  std::string castle = s;
  for (char& c : castle)
    if (c == '0' || c == 'o') c = 'O';
  if (castle == "O-O" || castle == "O-O-O") {
    CastleSide side = castle == "O-O" ? CastleSide::King : CastleSide::Queen;
    kind = PieceKind::King;
    for (const Move& m : detail::legal_moves_plain(pos))
      if (m.castle == side) candidates.push_back(m);
  } else {
    std::string body = s;
    if (std::isupper(static_cast<unsigned char>(body[0])) && body[0] != 'P') {
      auto k = piece_from_letter(body[0]);
      if (!k) throw SanError(SanErrorKind::Malformed, "unknown piece in '" + original + "'");
      kind = *k;
      body.erase(0, 1);
    } else if (body[0] == 'P') {
      body.erase(0, 1);
    }

    PieceKind promo = PieceKind::None;
    if (auto eq = body.find('='); eq != std::string::npos) {
      if (eq + 2 != body.size()) throw SanError(SanErrorKind::Malformed, "bad promotion in '" + original + "'");
      auto p = piece_from_letter(body[eq + 1]);
      if (!p || *p == PieceKind::Pawn || *p == PieceKind::King)
        throw SanError(SanErrorKind::Malformed, "bad promotion in '" + original + "'");
      promo = *p;
      body.resize(eq);
    } else if (body.size() >= 3 && std::isalpha(static_cast<unsigned char>(body.back())) &&
               std::isdigit(static_cast<unsigned char>(body[body.size() - 2]))) {
      auto p = piece_from_letter(body.back());
      if (!p || *p == PieceKind::Pawn || *p == PieceKind::King)
        throw SanError(SanErrorKind::Malformed, "bad promotion in '" + original + "'");
      promo = *p;
      body.pop_back();
    }

    std::string squares;
    for (char c : body) {
      if (c == 'x' || c == ':') mark_capture = true;
      else if (c != '-') squares += c;
    }
    if (squares.size() < 2 || squares.size() > 4) throw SanError(SanErrorKind::Malformed, "cannot parse '" + original + "'");
    auto to = Square::parse(squares.substr(squares.size() - 2));
    if (!to) throw SanError(SanErrorKind::Malformed, "bad destination in '" + original + "'");
    std::string disamb = squares.substr(0, squares.size() - 2);
    int from_file = -1, from_rank = -1;
    for (char c : disamb) {
      if (c >= 'a' && c <= 'h' && from_file < 0) from_file = c - 'a';
      else if (c >= '1' && c <= '8' && from_rank < 0) from_rank = c - '1';
      else throw SanError(SanErrorKind::Malformed, "bad disambiguation in '" + original + "'");
    }

    const int last_rank = pos.side_to_move == Color::White ? 7 : 0;
    if (kind == PieceKind::Pawn && to->rank() == last_rank && promo == PieceKind::None) {
      if (mode == SanMode::Strict) throw SanError(SanErrorKind::Malformed, "missing promotion piece in '" + original + "'");
      promo = PieceKind::Queen;
    }

    for (const Move& m : detail::legal_moves_plain(pos)) {
      if (m.piece != kind || m.to != *to || m.promotion != promo) continue;
      if (from_file >= 0 && m.from.file() != from_file) continue;
      if (from_rank >= 0 && m.from.rank() != from_rank) continue;
      candidates.push_back(m);
    }
  }

  if (candidates.empty()) {
    if (mode == SanMode::Lenient && (s.size() == 4 || s.size() == 5) && Square::parse(s.substr(0, 2)) &&
        Square::parse(s.substr(2, 2))) {
      return parse_uci(pos, s);
    }
    throw SanError(SanErrorKind::NoMatch, "no legal move matches '" + original + "'");
  }
  if (candidates.size() > 1) throw SanError(SanErrorKind::Ambiguous, "'" + original + "' is ambiguous");

  Move m = candidates.front();
  detail::annotate(pos, m);
  if (mode == SanMode::Strict) {
    if (mark_capture != m.capture) throw SanError(SanErrorKind::AnnotationMismatch, "capture mark contradicts board in '" + original + "'");
    if (mark_mate != m.is_checkmate) throw SanError(SanErrorKind::AnnotationMismatch, "mate mark contradicts board in '" + original + "'");
    if (!m.is_checkmate && mark_check != m.gives_check)
      throw SanError(SanErrorKind::AnnotationMismatch, "check mark contradicts board in '" + original + "'");
  }
  return m;
}

/// Lenient SAN resolution that reports failure as nullopt.
inline std::optional<Move> try_parse_san(const Position& pos, std::string_view text) {
  try {
    return parse_san(pos, text);
  } catch (const ChessError&) {
    return std::nullopt;
  }
}

/// Replays a SAN sequence; nullopt if any ply fails to resolve.
inline std::optional<std::vector<Move>> replay_san(const Position& start, const std::vector<std::string>& line) {
  std::vector<Move> out;
  Position pos = start;
  for (const auto& san : line) {
    auto m = try_parse_san(pos, san);
    if (!m) return std::nullopt;
    out.push_back(*m);
    pos = detail::make(pos, *m);
  }
  return out;
}

}  // namespace vps
