// Minimal UCI engine backed by the deterministic mock evaluator. Speaks
// enough of the protocol for analysis: uci, isready, setoption MultiPV,
// position (fen|startpos) [moves ...], go depth N [searchmoves ...], quit.

#include "mock_engine_eval.hpp"

#include <iostream>
#include <sstream>

int main() {
  using namespace vps;
  std::ios::sync_with_stdio(false);
  Position pos = Position::start();
  int multipv = 1;
  std::string line;
  while (std::getline(std::cin, line)) {
    std::istringstream in(line);
    std::string cmd;
    in >> cmd;
    if (cmd == "uci") {
      std::cout << "id name vps-mock-engine\nid author vps\noption name MultiPV type spin default 1 min 1 max 500\nuciok\n";
    } else if (cmd == "isready") {
      std::cout << "readyok\n";
    } else if (cmd == "setoption") {
      std::string tok, name, value;
      bool in_value = false;
      while (in >> tok) {
        if (tok == "name") continue;
        if (tok == "value") {
          in_value = true;
          continue;
        }
        (in_value ? value : name) += tok;
      }
      if (name == "MultiPV") multipv = std::max(1, std::stoi(value));
    } else if (cmd == "position") {
      std::string kind;
      in >> kind;
      std::string tok;
      if (kind == "startpos") {
        pos = Position::start();
        in >> tok;
      } else {
        std::string fen;
        while (in >> tok && tok != "moves") fen += (fen.empty() ? "" : " ") + tok;
        try {
          pos = parse_fen(fen, {.allow_missing_clocks = true});
        } catch (const std::exception& e) {
          std::cout << "info string bad fen: " << e.what() << "\n";
          continue;
        }
      }
      if (tok == "moves")
        while (in >> tok) pos = apply_move(pos, parse_uci(pos, tok));
    } else if (cmd == "go") {
      int depth = 1;
      std::vector<Move> only;
      std::string tok;
      while (in >> tok) {
        if (tok == "depth") in >> depth;
        else if (tok == "searchmoves") {
          while (in >> tok) only.push_back(parse_uci(pos, tok));
        }
      }
      auto lines = mock::analyze_all(pos, only);
      if (lines.empty()) {
        std::cout << "info depth 0 score mate 0\nbestmove (none)\n";
      } else {
        const int n = std::min<int>(multipv, static_cast<int>(lines.size()));
        for (int i = 0; i < n; ++i) {
          const auto& l = lines[static_cast<std::size_t>(i)];
          std::cout << "info depth " << depth << " multipv " << (i + 1) << " score ";
          if (l.mate) std::cout << "mate " << *l.mate;
          else std::cout << "cp " << *l.cp;
          std::cout << " nodes 1 pv";
          for (const auto& m : l.pv) std::cout << ' ' << to_uci(m);
          std::cout << '\n';
        }
        std::cout << "bestmove " << to_uci(lines.front().move) << '\n';
      }
    } else if (cmd == "quit") {
      break;
    }
    std::cout.flush();
  }
  return 0;
}
