#pragma once

// Structured reasoning traces: the line-oriented claim schema, a purely
// syntactic parser for it, the inverse serializer and candidate dedup.
//
// Schema (inside <think> ... </think>):
//
//   Candidate 1: Qxf7#
//   Capture: Pawn on f7
//   Check: yes
//   Mate: mate in 1 (for)
//   Score: +3.20 pawns
//   Win rate: 100%
//   PV: Qxf7#
//   ...
//   Best move: Qxf7#
//
// followed by <answer> Qxf7# </answer>. Lines that do not carry a known label
// are ignored, so free text may appear anywhere between schema lines.

#include "vps/chess.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vps {

struct CaptureClaim {
  bool captures = false;
  PieceKind piece = PieceKind::None;
  Square square;
  friend bool operator==(const CaptureClaim&, const CaptureClaim&) = default;
};

/// "Mate: none" is a present claim with no distance; the distance is signed
/// in moves, positive when the side to move delivers mate.
struct MateClaim {
  std::optional<int> moves;
  friend bool operator==(const MateClaim&, const MateClaim&) = default;
};

inline constexpr std::size_t kMaxPvPlies = 5;

struct CandidateClaim {
  std::string move;
  std::optional<CaptureClaim> capture;
  std::optional<bool> check;
  std::optional<MateClaim> mate;
  std::optional<double> pawn_score;  // pawns, side-to-move perspective
  std::optional<double> win_rate;    // percent
  std::optional<std::vector<std::string>> pv;
  bool well_formed = true;

  friend bool operator==(const CandidateClaim&, const CandidateClaim&) = default;
};

struct TraceFlags {
  bool think_tags = false;
  bool answer_tags = false;
  bool schema_ok = false;
  friend bool operator==(const TraceFlags&, const TraceFlags&) = default;
};

struct ReasoningTrace {
  std::string raw;
  std::string think;
  std::optional<std::string> answer;
  std::optional<std::string> stated_best;
  std::vector<CandidateClaim> candidates;
  TraceFlags flags;

  bool format_ok() const { return flags.think_tags && flags.answer_tags && answer.has_value() && flags.schema_ok; }
};

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::optional<double> parse_number(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

/// Shortest text that reads back to exactly `v`, preferring two decimals.
inline std::string format_exact(double v, bool force_sign) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
  std::string two(buf, r.ptr);
  std::string out;
  if (parse_number(two) == v) {
    out = two;
  } else {
    r = std::to_chars(buf, buf + sizeof buf, v);
    out.assign(buf, r.ptr);
  }
  if (force_sign && out.front() != '-') out.insert(out.begin(), '+');
  return out;
}

inline std::string strip_move_marks(std::string_view san) {
  std::string s(trim(san));
  while (!s.empty() && std::string_view("+#!?").find(s.back()) != std::string_view::npos) s.pop_back();
  return s;
}

inline std::optional<CaptureClaim> parse_capture_value(std::string_view v) {
  auto toks = split_ws(v);
  if (toks.size() == 1 && lower(toks[0]) == "none") return CaptureClaim{};
  if (toks.size() == 3 && lower(toks[1]) == "on") {
    auto piece = piece_from_name(toks[0]);
    auto sq = Square::parse(lower(toks[2]));
    if (piece && sq) return CaptureClaim{true, *piece, *sq};
  }
  return std::nullopt;
}

inline std::optional<bool> parse_yes_no(std::string_view v) {
  std::string s = lower(trim(v));
  if (s == "yes" || s == "true") return true;
  if (s == "no" || s == "false") return false;
  return std::nullopt;
}

inline std::optional<MateClaim> parse_mate_value(std::string_view v) {
  auto toks = split_ws(lower(v));
  if (toks.size() == 1 && toks[0] == "none") return MateClaim{};
  if ((toks.size() == 3 || toks.size() == 4) && toks[0] == "mate" && toks[1] == "in") {
    int n = 0;
    auto [ptr, ec] = std::from_chars(toks[2].data(), toks[2].data() + toks[2].size(), n);
    if (ec != std::errc{} || ptr != toks[2].data() + toks[2].size() || n < 1) return std::nullopt;
    if (toks.size() == 3 || toks[3] == "(for)") return MateClaim{n};
    if (toks[3] == "(against)") return MateClaim{-n};
  }
  return std::nullopt;
}

inline std::optional<double> parse_pawns_value(std::string_view v) {
  auto toks = split_ws(v);
  if (toks.empty() || toks.size() > 2) return std::nullopt;
  if (toks.size() == 2) {
    std::string unit = lower(toks[1]);
    if (unit != "pawns" && unit != "pawn") return std::nullopt;
  }
  return parse_number(toks[0]);
}

/// Accepts "59.1%", "59.1" (percent) and "0.591" (fraction).
inline std::optional<double> parse_win_rate_value(std::string_view v) {
  std::string s(trim(v));
  bool percent = false;
  if (!s.empty() && s.back() == '%') {
    percent = true;
    s.pop_back();
  }
  auto x = parse_number(trim(s));
  if (!x) return std::nullopt;
  double pct = (!percent && *x <= 1.0) ? *x * 100.0 : *x;
  if (pct < 0.0 || pct > 100.0) return std::nullopt;
  return pct;
}

inline std::optional<std::vector<std::string>> parse_pv_value(std::string_view v) {
  std::vector<std::string> line;
  for (auto& tok : split_ws(v)) {
    // skip move numbers such as "12." or "12..."
    bool number = !tok.empty() && std::isdigit(static_cast<unsigned char>(tok[0])) && tok.back() == '.';
    if (number) continue;
    line.push_back(tok);
  }
  if (line.empty()) return std::nullopt;
  if (line.size() > kMaxPvPlies) line.resize(kMaxPvPlies);
  return line;
}

}  // namespace detail

inline ReasoningTrace parse_trace(std::string_view text) {
  using namespace detail;
  ReasoningTrace t;
  t.raw = std::string(text);

  std::string_view body = text;
  const auto think_open = text.find("<think>");
  const auto think_close = think_open == std::string_view::npos ? std::string_view::npos : text.find("</think>", think_open);
  if (think_open != std::string_view::npos && think_close != std::string_view::npos) {
    t.flags.think_tags = true;
    body = text.substr(think_open + 7, think_close - think_open - 7);
  }
  t.think = std::string(body);

  const auto search_from = t.flags.think_tags ? think_close : 0;
  const auto ans_open = text.find("<answer>", search_from);
  const auto ans_close = ans_open == std::string_view::npos ? std::string_view::npos : text.find("</answer>", ans_open);
  if (ans_open != std::string_view::npos && ans_close != std::string_view::npos) {
    t.flags.answer_tags = true;
    auto toks = split_ws(text.substr(ans_open + 8, ans_close - ans_open - 8));
    if (toks.size() == 1) t.answer = toks[0];
    if (!t.flags.think_tags) body = text.substr(0, ans_open);
  }

  CandidateClaim* current = nullptr;
  bool saw_claim_line = false;
  auto finish = [&] {
    if (current && !saw_claim_line) current->well_formed = false;
  };

  std::size_t pos = 0;
  while (pos <= body.size()) {
    auto nl = body.find('\n', pos);
    std::string_view line = trim(body.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    pos = nl == std::string_view::npos ? body.size() + 1 : nl + 1;

    if (!line.empty() && (line.front() == '-' || line.front() == '*')) line = trim(line.substr(1));
    auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    std::string label = lower(trim(line.substr(0, colon)));
    std::string_view value = trim(line.substr(colon + 1));

    if (label.starts_with("candidate")) {
      std::string_view num = trim(std::string_view(label).substr(9));
      if (num.empty() || !std::all_of(num.begin(), num.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
        continue;
      auto toks = split_ws(value);
      finish();
      t.candidates.push_back({});
      current = &t.candidates.back();
      saw_claim_line = false;
      if (toks.empty()) current->well_formed = false;
      else current->move = toks[0];
      continue;
    }
    if (label == "best move") {
      auto toks = split_ws(value);
      if (toks.size() == 1) t.stated_best = toks[0];
      finish();
      current = nullptr;
      continue;
    }
    if (!current) continue;

    bool ok = true;
    if (label == "capture") {
      auto v = parse_capture_value(value);
      ok = v.has_value();
      if (ok) current->capture = v;
    } else if (label == "check") {
      auto v = parse_yes_no(value);
      ok = v.has_value();
      if (ok) current->check = v;
    } else if (label == "mate") {
      auto v = parse_mate_value(value);
      ok = v.has_value();
      if (ok) current->mate = v;
    } else if (label == "score") {
      auto v = parse_pawns_value(value);
      ok = v.has_value();
      if (ok) current->pawn_score = v;
    } else if (label == "win rate") {
      auto v = parse_win_rate_value(value);
      ok = v.has_value();
      if (ok) current->win_rate = v;
    } else if (label == "pv") {
      auto v = parse_pv_value(value);
      ok = v.has_value();
      if (ok) current->pv = v;
    } else {
      continue;
    }
    saw_claim_line = true;
    if (!ok) current->well_formed = false;
  }
  finish();

  t.flags.schema_ok = !t.candidates.empty() &&
                      std::all_of(t.candidates.begin(), t.candidates.end(), [](const auto& c) { return c.well_formed; });
  return t;
}

inline std::string serialize_trace(const ReasoningTrace& t) {
  using detail::format_exact;
  std::string out = "<think>\n";
  int index = 1;
  for (const auto& c : t.candidates) {
    if (c.move.empty() || c.move.find_first_of(" \t\n") != std::string::npos)
      throw TraceError("candidate move must be a single nonempty token");
    out += "Candidate " + std::to_string(index++) + ": " + c.move + "\n";
    if (c.capture) {
      if (!c.capture->captures) out += "Capture: none\n";
      else {
        if (c.capture->piece == PieceKind::None || !c.capture->square.valid())
          throw TraceError("capture claim without piece or square");
        out += std::string("Capture: ") + piece_name(c.capture->piece) + " on " + c.capture->square.name() + "\n";
      }
    }
    if (c.check) out += std::string("Check: ") + (*c.check ? "yes" : "no") + "\n";
    if (c.mate) {
      if (!c.mate->moves) out += "Mate: none\n";
      else {
        if (*c.mate->moves == 0) throw TraceError("mate distance must be nonzero");
        int n = *c.mate->moves;
        out += "Mate: mate in " + std::to_string(std::abs(n)) + (n > 0 ? " (for)\n" : " (against)\n");
      }
    }
    if (c.pawn_score) out += "Score: " + format_exact(*c.pawn_score, true) + " pawns\n";
    if (c.win_rate) {
      if (*c.win_rate < 0.0 || *c.win_rate > 100.0) throw TraceError("win rate outside [0, 100]");
      out += "Win rate: " + format_exact(*c.win_rate, false) + "%\n";
    }
    if (c.pv) {
      if (c.pv->empty() || c.pv->size() > kMaxPvPlies) throw TraceError("PV must hold 1 to 5 plies");
      out += "PV:";
      for (const auto& m : *c.pv) out += " " + m;
      out += "\n";
    }
    out += "\n";
  }
  if (t.stated_best) out += "Best move: " + *t.stated_best + "\n";
  out += "</think>\n";
  if (t.answer) out += "<answer> " + *t.answer + " </answer>\n";
  return out;
}

/// Drops candidates that repeat an earlier move, keeping the first occurrence.
/// With a position, moves are compared after SAN resolution; unresolvable
/// candidates (and all candidates without a position) compare by raw text.
inline ReasoningTrace dedupe_candidates(const ReasoningTrace& trace, const Position* pos = nullptr) {
  ReasoningTrace out = trace;
  out.candidates.clear();
  std::vector<Move> seen_moves;
  std::vector<std::string> seen_text;
  for (const auto& c : trace.candidates) {
    std::optional<Move> resolved = pos ? try_parse_san(*pos, c.move) : std::nullopt;
    bool dup = false;
    if (resolved) {
      dup = std::any_of(seen_moves.begin(), seen_moves.end(), [&](const Move& m) { return m.same_as(*resolved); });
      if (!dup) seen_moves.push_back(*resolved);
    } else {
      std::string key = detail::strip_move_marks(c.move);
      dup = std::find(seen_text.begin(), seen_text.end(), key) != seen_text.end();
      if (!dup) seen_text.push_back(key);
    }
    if (!dup) out.candidates.push_back(c);
  }
  return out;
}

}  // namespace vps
