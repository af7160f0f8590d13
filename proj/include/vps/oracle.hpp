#pragma once

// Engine ground truth: scored moves, analysis records, the append-only record
// store, and ingestion of evaluation databases and puzzle collections.

#include "vps/chess.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace vps {

/// Lichess accuracy logistic: cp (side to move) to winning chances in percent.
inline double cp_to_winrate(double cp) {
  return 50.0 + 50.0 * (2.0 / (1.0 + std::exp(-0.00368208 * cp)) - 1.0);
}

/// Mates convert to the logistic's limits.
inline double mate_to_winrate(int mate) { return mate > 0 ? 100.0 : 0.0; }

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Store I/O failure; unlike bad input lines this aborts ingestion.
class StoreError : public OracleError {
 public:
  using OracleError::OracleError;
};

struct ScoredMove {
  std::string san;
  Move move;
  std::optional<int> cp;    // centipawns, side to move
  std::optional<int> mate;  // moves to mate, positive when the side to move mates
  std::vector<std::string> pv;
  double win_rate = 50.0;

  double pawns() const { return cp ? *cp / 100.0 : 0.0; }
};

enum class RecordSource { EvalDb, Puzzle, LiveEngine };

inline std::string to_string(RecordSource s) {
  switch (s) {
    case RecordSource::EvalDb: return "eval-db";
    case RecordSource::Puzzle: return "puzzle";
    case RecordSource::LiveEngine: return "live-engine";
  }
  return "unknown";
}

struct AnalysisRecord {
  std::string fen;
  Position position;
  std::vector<ScoredMove> moves;  // non-increasing win rate
  int depth = 0;
  /// "eval-db", "puzzle" or "live-engine", optionally suffixed ":<version>".
  std::string source;

  const ScoredMove* find(const Move& m) const {
    for (const auto& sm : moves)
      if (sm.move.same_as(m)) return &sm;
    return nullptr;
  }
  const ScoredMove& best() const { return moves.front(); }
  std::optional<int> forced_mate() const {
    for (const auto& sm : moves)
      if (sm.mate && *sm.mate > 0) return sm.mate;
    return std::nullopt;
  }
};

/// Builds a scored move from a SAN or UCI first move and a SAN or UCI line.
/// The stored PV is SAN and always starts with the scored move.
inline ScoredMove make_scored_move(const Position& pos, std::string_view first, std::optional<int> cp,
                                   std::optional<int> mate, const std::vector<std::string>& line) {
  if (cp.has_value() == mate.has_value()) throw OracleError("scored move needs exactly one of cp or mate");
  if (mate && *mate == 0) throw OracleError("mate distance 0 is not a move score");
  ScoredMove sm;
  auto m = try_parse_san(pos, first);
  if (!m) throw OracleError("move '" + std::string(first) + "' is illegal in " + serialize_fen(pos));
  sm.move = *m;
  sm.san = to_san(pos, *m);
  sm.cp = cp;
  sm.mate = mate;
  sm.win_rate = cp ? cp_to_winrate(*cp) : mate_to_winrate(*mate);

  Position cur = pos;
  std::vector<std::string> pv_line = line.empty() ? std::vector<std::string>{std::string(first)} : line;
  for (std::size_t i = 0; i < pv_line.size(); ++i) {
    auto step = try_parse_san(cur, pv_line[i]);
    if (!step) throw OracleError("pv move '" + pv_line[i] + "' does not replay");
    if (i == 0 && !step->same_as(sm.move)) throw OracleError("pv does not start with the scored move");
    sm.pv.push_back(to_san(cur, *step));
    cur = detail::make(cur, *step);
  }
  return sm;
}

inline AnalysisRecord make_record(const Position& pos, std::vector<ScoredMove> moves, int depth, std::string source) {
  if (moves.empty()) throw OracleError("analysis record needs at least one scored move");
  AnalysisRecord r;
  r.position = pos;
  r.fen = serialize_fen(pos);
  std::stable_sort(moves.begin(), moves.end(), [](const ScoredMove& a, const ScoredMove& b) { return a.win_rate > b.win_rate; });
  r.moves = std::move(moves);
  r.depth = depth;
  r.source = std::move(source);
  return r;
}

// ---------------------------------------------------------------------------
// JSON line format: {fen, depth, moves:[{san, cp?, mate?, pv:[san...]}], source}

inline nlohmann::ordered_json record_to_json(const AnalysisRecord& r) {
  nlohmann::ordered_json j;
  j["fen"] = r.fen;
  j["depth"] = r.depth;
  auto moves = nlohmann::ordered_json::array();
  for (const auto& sm : r.moves) {
    nlohmann::ordered_json m;
    m["san"] = sm.san;
    if (sm.cp) m["cp"] = *sm.cp;
    if (sm.mate) m["mate"] = *sm.mate;
    m["pv"] = sm.pv;
    moves.push_back(std::move(m));
  }
  j["moves"] = std::move(moves);
  j["source"] = r.source;
  return j;
}

inline AnalysisRecord record_from_json(const nlohmann::json& j) {
  Position pos = parse_fen(j.at("fen").get<std::string>(), {.allow_missing_clocks = true});
  std::vector<ScoredMove> moves;
  for (const auto& m : j.at("moves")) {
    std::optional<int> cp, mate;
    if (m.contains("cp") && !m["cp"].is_null()) cp = m["cp"].get<int>();
    if (m.contains("mate") && !m["mate"].is_null()) mate = m["mate"].get<int>();
    std::string first = m.contains("san") ? m["san"].get<std::string>() : m.at("uci").get<std::string>();
    std::vector<std::string> pv;
    if (m.contains("pv")) {
      if (m["pv"].is_string()) {
        std::istringstream in(m["pv"].get<std::string>());
        std::string tok;
        while (in >> tok) pv.push_back(tok);
      } else {
        pv = m["pv"].get<std::vector<std::string>>();
      }
    }
    moves.push_back(make_scored_move(pos, first, cp, mate, pv));
  }
  for (std::size_t i = 0; i < moves.size(); ++i)
    for (std::size_t k = 0; k < i; ++k)
      if (moves[i].move.same_as(moves[k].move)) throw OracleError("duplicate scored move " + moves[i].san);
  return make_record(pos, std::move(moves), j.value("depth", 0), j.value("source", std::string("eval-db")));
}

// ---------------------------------------------------------------------------
// Store

/// Append-only line-delimited record file with an in-memory index keyed by
/// the FEN without move counters. Concurrent readers, single writer.
class AnalysisStore {
 public:
  AnalysisStore() = default;  // memory only

  explicit AnalysisStore(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in && std::filesystem::exists(path_)) throw StoreError("cannot read store " + path_.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        insert_locked(record_from_json(nlohmann::json::parse(line)));
      } catch (const std::exception& e) {
        throw OracleError(path_.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  void append(const AnalysisRecord& r) {
    std::unique_lock lock(mu_);
    if (!path_.empty()) {
      std::ofstream out(path_, std::ios::app);
      out << record_to_json(r).dump() << '\n';
      out.flush();
      if (!out) throw StoreError("store write failed: " + path_.string());
    }
    insert_locked(r);
  }

  /// Highest-depth record for the position; later records win ties.
  std::optional<AnalysisRecord> query(const Position& pos) const {
    std::shared_lock lock(mu_);
    auto it = index_.find(position_key(pos));
    if (it == index_.end()) return std::nullopt;
    const AnalysisRecord* best = nullptr;
    for (std::size_t i : it->second)
      if (!best || records_[i].depth >= best->depth) best = &records_[i];
    return *best;
  }

  std::optional<AnalysisRecord> query(std::string_view fen) const {
    return query(parse_fen(fen, {.allow_missing_clocks = true}));
  }

  /// Record matching an engine request exactly, for the analysis cache.
  std::optional<AnalysisRecord> find_cached(const Position& pos, int depth, std::size_t move_count,
                                            std::string_view source) const {
    std::shared_lock lock(mu_);
    auto it = index_.find(position_key(pos));
    if (it == index_.end()) return std::nullopt;
    for (std::size_t i : it->second) {
      const auto& r = records_[i];
      if (r.depth == depth && r.moves.size() == move_count && r.source == source) return r;
    }
    return std::nullopt;
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return records_.size();
  }

  std::vector<AnalysisRecord> all() const {
    std::shared_lock lock(mu_);
    return records_;
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  void insert_locked(AnalysisRecord r) {
    index_[position_key(r.position)].push_back(records_.size());
    records_.push_back(std::move(r));
  }

  std::filesystem::path path_;
  mutable std::shared_mutex mu_;
  std::vector<AnalysisRecord> records_;
  std::unordered_map<std::string, std::vector<std::size_t>> index_;
};

// ---------------------------------------------------------------------------
// Samples and splits

enum class Split { Train, Val, Test };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

struct PositionSample {
  std::string id;
  Position position;
  std::optional<AnalysisRecord> record;
  std::optional<Move> solution;  // puzzle move, when the sample came from a puzzle
  Split split = Split::Train;

  /// y*: the record's top move, or the puzzle move before analysis.
  std::optional<Move> best_move() const {
    if (record) return record->best().move;
    return solution;
  }
};

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 14695981039346656037ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

/// Deterministic split from a seeded hash of the id.
inline Split assign_split(std::string_view id, std::uint64_t seed, SplitRatios ratios = {}) {
  const double total = ratios.train + ratios.val + ratios.test;
  const std::uint64_t h = fnv1a64(id, fnv1a64(std::to_string(seed) + ":"));
  const double u = static_cast<double>(h % 1000000) / 1000000.0 * total;
  if (u < ratios.train) return Split::Train;
  if (u < ratios.train + ratios.val) return Split::Val;
  return Split::Test;
}

// ---------------------------------------------------------------------------
// Ingestion

struct IngestStats {
  std::size_t ingested = 0;
  std::size_t rejected = 0;
  std::vector<std::string> errors;  // "line N: reason"
};

namespace detail {

inline std::vector<std::string> tokens(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

/// Lichess evaluation-database line: scores are from white's point of view
/// and are flipped to the side to move here.
inline AnalysisRecord lichess_eval_record(const nlohmann::json& j, const std::string& source) {
  Position pos = parse_fen(j.at("fen").get<std::string>(), {.allow_missing_clocks = true});
  const auto& evals = j.at("evals");
  if (!evals.is_array() || evals.empty()) throw OracleError("no evals");
  const nlohmann::json* best = nullptr;
  for (const auto& e : evals) {
    if (!best || e.value("depth", 0) > best->value("depth", 0) ||
        (e.value("depth", 0) == best->value("depth", 0) && e.at("pvs").size() > best->at("pvs").size()))
      best = &e;
  }
  const int sign = pos.side_to_move == Color::White ? 1 : -1;
  std::vector<ScoredMove> moves;
  for (const auto& pv : best->at("pvs")) {
    auto line = tokens(pv.at("line").get<std::string>());
    if (line.empty()) throw OracleError("empty pv line");
    std::optional<int> cp, mate;
    if (pv.contains("cp")) cp = sign * pv["cp"].get<int>();
    if (pv.contains("mate")) mate = sign * pv["mate"].get<int>();
    ScoredMove sm = make_scored_move(pos, line[0], cp, mate, line);
    bool dup = std::any_of(moves.begin(), moves.end(), [&](const ScoredMove& o) { return o.move.same_as(sm.move); });
    if (!dup) moves.push_back(std::move(sm));
  }
  return make_record(pos, std::move(moves), best->value("depth", 0), source);
}

}  // namespace detail

/// Reads one JSON record per line. Both the Lichess evaluation-database shape
/// ({fen, evals:[{pvs:[{cp|mate, line}], depth}]}) and the store shape are
/// accepted. Invalid lines are counted, never fatal.
inline IngestStats ingest_eval_db(std::istream& in, AnalysisStore& store, const std::string& source = "eval-db") {
  if (!in) throw OracleError("unreadable eval-db stream");
  IngestStats stats;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      AnalysisRecord r;
      if (j.contains("evals")) {
        r = detail::lichess_eval_record(j, source);
      } else {
        r = record_from_json(j);
        if (!j.contains("source")) r.source = source;
      }
      store.append(r);
      ++stats.ingested;
    } catch (const StoreError&) {
      throw;
    } catch (const std::exception& e) {
      ++stats.rejected;
      stats.errors.push_back("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return stats;
}

struct PuzzleOptions {
  /// Lichess puzzles start one ply early: the first move is the opponent's
  /// and the solver moves second.
  bool leading_setup_move = true;
  std::uint64_t seed = 0;
  SplitRatios ratios;
  const AnalysisStore* store = nullptr;  // attaches existing records
};

struct PuzzleBatch {
  std::vector<PositionSample> samples;
  std::vector<std::string> pending;  // FENs that still need engine analysis
  IngestStats stats;
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') quoted = !quoted;
    else if (c == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

/// Flattens puzzles into one sample per solver decision point. Reads Lichess
/// puzzle CSV (PuzzleId, FEN, Moves, ...); a header row, when present, sets
/// the column positions. Moves may be UCI or SAN.
inline PuzzleBatch ingest_puzzles(std::istream& in, const PuzzleOptions& opts = {}) {
  if (!in) throw OracleError("unreadable puzzle stream");
  PuzzleBatch batch;
  std::size_t col_id = 0, col_fen = 1, col_moves = 2;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> pending_seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cols = detail::split_csv(line);
    if (lineno == 1 && !cols.empty() && cols[0] == "PuzzleId") {
      for (std::size_t i = 0; i < cols.size(); ++i) {
        if (cols[i] == "PuzzleId") col_id = i;
        if (cols[i] == "FEN") col_fen = i;
        if (cols[i] == "Moves") col_moves = i;
      }
      continue;
    }
    try {
      if (cols.size() <= std::max({col_id, col_fen, col_moves})) throw OracleError("missing columns");
      const std::string& id = cols[col_id];
      Position pos = parse_fen(cols[col_fen], {.allow_missing_clocks = true});
      auto plies = detail::tokens(cols[col_moves]);
      if (plies.empty()) throw OracleError("empty move sequence");
      const Split split = assign_split(id, opts.seed, opts.ratios);

      std::vector<PositionSample> samples;
      const std::size_t first_solver = opts.leading_setup_move ? 1 : 0;
      for (std::size_t i = 0; i < plies.size(); ++i) {
        std::optional<Move> m;
        if (plies[i].size() >= 4 && plies[i].size() <= 5 && Square::parse(plies[i].substr(0, 2)) &&
            Square::parse(plies[i].substr(2, 2))) {
          try {
            m = parse_uci(pos, plies[i]);
          } catch (const ChessError&) {
          }
        }
        if (!m) m = try_parse_san(pos, plies[i]);
        if (!m) throw OracleError("illegal ply " + std::to_string(i + 1) + " '" + plies[i] + "'");
        if (i >= first_solver && (i - first_solver) % 2 == 0) {
          PositionSample s;
          s.id = id + "#" + std::to_string(samples.size());
          s.position = pos;
          s.solution = m;
          s.split = split;
          samples.push_back(std::move(s));
        }
        pos = detail::make(pos, *m);
      }
      if (samples.empty()) throw OracleError("no solver moves");
      for (auto& s : samples) {
        if (opts.store) s.record = opts.store->query(s.position);
        if (!s.record) {
          std::string fen = serialize_fen(s.position);
          if (std::find(pending_seen.begin(), pending_seen.end(), fen) == pending_seen.end()) {
            pending_seen.push_back(fen);
            batch.pending.push_back(fen);
          }
        }
        batch.samples.push_back(std::move(s));
      }
      ++batch.stats.ingested;
    } catch (const std::exception& e) {
      ++batch.stats.rejected;
      batch.stats.errors.push_back("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return batch;
}

}  // namespace vps
