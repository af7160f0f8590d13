#include "vps/harness.hpp"
#include "vps/judge.hpp"
#include "vps/sim.hpp"
#include "vps/trace_gen.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

using namespace vps;

namespace {

struct Common {
  std::string config;
  std::string store;
  std::string engine;
  int depth = 0;
  int multipv = 0;
  double lambda = -1.0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config file");
  cmd->add_option("--store", c.store, "analysis store (JSON lines)");
  cmd->add_option("--engine", c.engine, "UCI engine executable");
  cmd->add_option("--depth", c.depth, "engine search depth");
  cmd->add_option("--multipv", c.multipv, "engine multipv");
}

HarnessConfig resolve_config(const Common& c) {
  HarnessConfig cfg = c.config.empty() ? HarnessConfig{} : load_config(c.config);
  if (!c.store.empty()) cfg.store = c.store;
  if (!c.engine.empty()) cfg.engine.path = c.engine;
  if (c.depth > 0) cfg.engine.depth = c.depth;
  if (c.multipv > 0) cfg.engine.multipv = c.multipv;
  if (c.lambda >= 0.0) cfg.reward.lambda = c.lambda;
  cfg.reward.live_depth = cfg.engine.depth;
  return cfg;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  return in;
}

/// Writes to `path`, or stdout when the path is empty or "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw DataError("cannot write " + path);
    }
  }
  std::ostream& get() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

std::vector<nlohmann::json> read_json_lines(const std::string& path) {
  auto in = open_in(path);
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::vector<PositionSample> samples_from_store(AnalysisStore& store) {
  std::vector<PositionSample> out;
  std::vector<std::string> seen;
  for (const auto& r : store.all()) {
    std::string key = position_key(r.position);
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
    seen.push_back(key);
    PositionSample s;
    s.id = key;
    s.position = r.position;
    s.record = store.query(r.position);
    out.push_back(std::move(s));
  }
  return out;
}

WeightState load_weights(const std::string& path, const HarnessConfig& cfg) {
  if (path.empty() || path == "uniform") {
    SchedulerParams p = cfg.scheduler;
    return init_weights(kSubtaskCount, p);
  }
  auto in = open_in(path);
  try {
    return weight_state_from_json(nlohmann::json::parse(in));
  } catch (const std::exception& e) {
    throw DataError("bad weights snapshot " + path + ": " + e.what());
  }
}

std::vector<PositionSample> samples_for_traces(Workspace& ws, const std::vector<nlohmann::json>& lines,
                                               std::vector<ReasoningTrace>& traces) {
  std::vector<PositionSample> samples;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& j = lines[i];
    if (!j.contains("fen") || !j.contains("trace")) throw DataError("line " + std::to_string(i + 1) + " needs fen and trace");
    std::string id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : std::to_string(i);
    samples.push_back(ws.resolve(j["fen"].get<std::string>(), id));
    traces.push_back(parse_trace(j["trace"].get<std::string>()));
  }
  return samples;
}

// ---------------------------------------------------------------------------

int cmd_positions(std::size_t count, std::uint64_t seed, int min_plies, int max_plies) {
  std::mt19937_64 rng(seed);
  std::size_t made = 0;
  std::vector<std::string> seen;
  while (made < count) {
    Position pos = Position::start();
    const int plies = std::uniform_int_distribution<int>(min_plies, max_plies)(rng);
    for (int i = 0; i < plies; ++i) {
      auto moves = legal_moves(pos);
      if (moves.empty()) break;
      pos = detail::make(pos, moves[std::uniform_int_distribution<std::size_t>(0, moves.size() - 1)(rng)]);
    }
    if (!detail::has_legal_move(pos)) continue;
    std::string key = position_key(pos);
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
    seen.push_back(key);
    std::cout << serialize_fen(pos) << '\n';
    ++made;
  }
  return kExitOk;
}

int cmd_analyze(const HarnessConfig& cfg, const std::string& fens_path, bool train_depth) {
  if (cfg.engine.path.empty()) throw EngineError(EngineErrorKind::Unavailable, "analyze needs --engine");
  Workspace ws(cfg);
  auto in = open_in(fens_path);
  std::string line;
  std::size_t done = 0, skipped = 0;
  const int depth = train_depth ? cfg.engine.train_depth : cfg.engine.depth;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    try {
      ws.oracle().engine_analyze(detail::trim(line), depth, cfg.engine.multipv);
      ++done;
    } catch (const EngineError& e) {
      if (e.kind() != EngineErrorKind::NoLegalMoves) throw;
      ++skipped;
    } catch (const ChessError& e) {
      std::cerr << "skipping '" << line << "': " << e.what() << '\n';
      ++skipped;
    }
  }
  std::cout << nlohmann::ordered_json{{"analyzed", done}, {"skipped", skipped}, {"store_records", ws.store().size()}}.dump()
            << '\n';
  return kExitOk;
}

int cmd_ingest(const HarnessConfig& cfg, const std::string& kind, const std::vector<std::string>& inputs,
               std::uint64_t seed, const std::vector<double>& ratios, const std::string& manifest, bool backfill,
               bool setup_move) {
  if (backfill && cfg.engine.path.empty()) throw EngineError(EngineErrorKind::Unavailable, "--backfill needs --engine");
  Workspace ws(cfg);
  nlohmann::ordered_json summary;
  if (kind == "eval-db") {
    IngestStats total;
    for (const auto& path : inputs) {
      auto in = open_in(path);
      IngestStats s = ingest_eval_db(in, ws.store());
      total.ingested += s.ingested;
      total.rejected += s.rejected;
      for (auto& e : s.errors) total.errors.push_back(path + ": " + e);
    }
    summary["ingested"] = total.ingested;
    summary["rejected"] = total.rejected;
    summary["errors"] = total.errors;
  } else if (kind == "puzzles") {
    PuzzleOptions opts;
    opts.leading_setup_move = setup_move;
    opts.seed = seed;
    if (ratios.size() == 3) opts.ratios = {ratios[0], ratios[1], ratios[2]};
    std::vector<PositionSample> samples;
    IngestStats total;
    for (const auto& path : inputs) {
      auto in = open_in(path);
      PuzzleBatch b = ingest_puzzles(in, opts);
      total.ingested += b.stats.ingested;
      total.rejected += b.stats.rejected;
      for (auto& e : b.stats.errors) total.errors.push_back(path + ": " + e);
      for (auto& s : b.samples) samples.push_back(std::move(s));
    }
    std::size_t backfilled = 0;
    if (backfill) {
      for (auto& s : samples) {
        if (!ws.store().query(s.position)) {
          ws.oracle().engine_analyze(s.position, cfg.engine.train_depth, cfg.engine.multipv);
          ++backfilled;
        }
      }
    }
    std::size_t with_record = 0;
    std::array<std::size_t, 3> per_split{};
    if (!manifest.empty()) {
      Output out(manifest);
      for (const auto& s : samples) {
        nlohmann::ordered_json j;
        j["id"] = s.id;
        j["fen"] = serialize_fen(s.position);
        j["solution"] = s.solution ? nlohmann::ordered_json(to_uci(*s.solution)) : nlohmann::ordered_json(nullptr);
        j["split"] = to_string(s.split);
        out.get() << j.dump() << '\n';
      }
    }
    for (const auto& s : samples) {
      ++per_split[static_cast<std::size_t>(s.split)];
      if (ws.store().query(s.position)) ++with_record;
    }
    summary["puzzles_ingested"] = total.ingested;
    summary["puzzles_rejected"] = total.rejected;
    summary["samples"] = samples.size();
    summary["splits"] = {{"train", per_split[0]}, {"val", per_split[1]}, {"test", per_split[2]}};
    summary["backfilled"] = backfilled;
    summary["with_record"] = with_record;
    summary["errors"] = total.errors;
  } else {
    throw CLI::ValidationError("--kind", "must be eval-db or puzzles");
  }
  summary["store_records"] = ws.store().size();
  std::cout << summary.dump() << '\n';
  return kExitOk;
}

int cmd_gen_sft(const HarnessConfig& cfg, std::size_t k, std::size_t n, std::uint64_t seed, const std::string& out_path) {
  Workspace ws(cfg);
  auto samples = samples_from_store(ws.store());
  if (samples.size() < n)
    throw DataError("store has " + std::to_string(samples.size()) + " analyzed positions, need " + std::to_string(n));
  std::mt19937_64 rng(seed);
  for (std::size_t i = samples.size(); i > 1; --i)
    std::swap(samples[i - 1], samples[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)]);
  samples.resize(n);
  Output out(out_path);
  CorpusStats st = generate_corpus(samples, k, out.get());
  std::cerr << "wrote " << st.written << " traces, skipped " << st.skipped << '\n';
  return kExitOk;
}

int cmd_score(const HarnessConfig& cfg, const std::string& traces, const std::string& weights_path,
              const std::string& out_path) {
  Workspace ws(cfg);
  WeightState weights = load_weights(weights_path, cfg);
  Output out(out_path);
  for (const auto& req : read_json_lines(traces)) {
    RewardBreakdown b = score_request(ws, req, weights);
    b.weights_step = weights.step;
    out.get() << breakdown_reply(req, b).dump() << '\n';
  }
  return kExitOk;
}

int cmd_eval(const HarnessConfig& cfg, const std::string& traces, const std::string& json_out,
             const std::string& samples_out) {
  Workspace ws(cfg);
  std::vector<ReasoningTrace> parsed;
  auto samples = samples_for_traces(ws, read_json_lines(traces), parsed);
  std::vector<SampleEvaluation> evals;
  for (std::size_t i = 0; i < samples.size(); ++i) evals.push_back(evaluate_sample(parsed[i], samples[i], cfg.metrics));
  MetricsReport report = aggregate(evals);
  std::cout << render_table(report);
  if (!json_out.empty()) {
    Output out(json_out);
    nlohmann::ordered_json j = to_json(report);
    j["k_cov"] = cfg.metrics.k_cov;
    out.get() << j.dump(2) << '\n';
  }
  if (!samples_out.empty()) {
    Output out(samples_out);
    for (const auto& e : evals) out.get() << to_json(e).dump() << '\n';
  }
  return kExitOk;
}

struct SimFlags {
  std::size_t steps = 300;
  std::size_t batch = 128;
  std::string mode = "both";
  std::string granularity = "batch";
  std::uint64_t seed = 0;
  double eta = 0.002;
  std::vector<std::string> competence;
  std::string out = "trajectory";
};

int cmd_simulate(const HarnessConfig& cfg, const SimFlags& f) {
  Workspace ws(cfg);
  auto samples = samples_from_store(ws.store());
  if (samples.empty()) throw DataError("simulation needs an analysis store with at least one record");
  MockPolicy policy;
  policy.learning_rate = f.eta;
  for (const auto& kv : f.competence) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--competence", "expected subtask=p");
    policy.competence[index_of(parse_subtask(kv.substr(0, eq)))] = std::stod(kv.substr(eq + 1));
  }
  SimConfig sc;
  sc.steps = f.steps;
  sc.batch = f.batch;
  sc.seed = f.seed;
  sc.scheduler = cfg.scheduler;
  sc.reward = cfg.reward;
  sc.granularity = f.granularity == "sample" ? UpdateGranularity::PerSample : UpdateGranularity::PerBatch;
  std::vector<std::pair<std::string, WeightingMode>> runs;
  if (f.mode == "both" || f.mode == "adaptive") runs.emplace_back("adaptive", WeightingMode::Adaptive);
  if (f.mode == "both" || f.mode == "fixed") runs.emplace_back("fixed", WeightingMode::Fixed);
  if (runs.empty()) throw CLI::ValidationError("--mode", "must be adaptive, fixed or both");
  nlohmann::ordered_json summary;
  for (const auto& [name, mode] : runs) {
    sc.mode = mode;
    SimResult r = train_loop(policy, samples, sc);
    const std::string path = runs.size() == 1 ? f.out + ".csv" : f.out + "_" + name + ".csv";
    Output out(path);
    write_trajectory_csv(out.get(), r);
    nlohmann::ordered_json fm = nlohmann::ordered_json::object();
    for (Subtask k : kSubtasks) {
      const auto& m = r.final_means[index_of(k)];
      fm[subtask_name(k)] = m ? nlohmann::ordered_json(*m) : nlohmann::ordered_json(nullptr);
    }
    summary[name] = {{"trajectory", path}, {"final_means", fm}, {"final_weights", r.trajectory.back().w}};
  }
  std::cout << summary.dump(2) << '\n';
  return kExitOk;
}

int cmd_serve(const HarnessConfig& cfg, const std::string& weights_path) {
  Workspace ws(cfg);
  WeightState weights = load_weights(weights_path, cfg);
  if (cfg.service.port > 0) {
    serve_tcp(ws, weights, cfg.service.port, cfg.service.max_in_flight,
              [](int port) { std::cerr << "listening on 127.0.0.1:" << port << std::endl; });
  } else {
    serve_stream(ws, weights, std::cin, std::cout, cfg.service.max_in_flight);
  }
  return kExitOk;
}

int cmd_judge(const HarnessConfig& cfg, const std::string& traces, bool mock, const std::string& transcripts_out,
              const std::string& report_out) {
  Workspace ws(cfg);
  std::vector<ReasoningTrace> parsed;
  auto lines = read_json_lines(traces);
  auto samples = samples_for_traces(ws, lines, parsed);
  std::vector<PanelItem> items;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::optional<Move> chosen;
    if (parsed[i].answer) chosen = try_parse_san(samples[i].position, *parsed[i].answer);
    items.push_back({samples[i].id, lines[i]["trace"].get<std::string>(), serialize_fen(samples[i].position),
                     engine_summary(*samples[i].record, chosen)});
  }
  std::vector<std::unique_ptr<JudgeTransport>> owned;
  if (mock) {
    owned.push_back(MockTransport::fixed("mock", {{{0.0, 0.1, 0.2, 0.4, 0.3},
                                                   {0.0, 0.1, 0.3, 0.4, 0.2},
                                                   {0.0, 0.0, 0.2, 0.5, 0.3},
                                                   {0.0, 0.0, 0.1, 0.3, 0.6}}}));
  } else {
    for (const auto& j : cfg.judges) owned.push_back(std::make_unique<HttpTransport>(j));
  }
  if (owned.empty()) throw CLI::ValidationError("judge", "configure judges in the config file or pass --mock");
  std::vector<JudgeTransport*> judges;
  for (auto& o : owned) judges.push_back(o.get());
  PanelReport rep = run_panel(items, judges);
  if (!transcripts_out.empty()) {
    Output out(transcripts_out);
    for (const auto& t : rep.transcripts) out.get() << to_json(t).dump() << '\n';
  }
  Output out(report_out);
  out.get() << to_json(rep).dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Verifiable process supervision toolkit for chess reasoning traces"};
  app.require_subcommand(1);
  Common common;

  auto* positions = app.add_subcommand("positions", "print random legal positions (FEN per line)");
  std::size_t pos_count = 50;
  std::uint64_t pos_seed = 1;
  int min_plies = 6, max_plies = 40;
  positions->add_option("--count", pos_count);
  positions->add_option("--seed", pos_seed);
  positions->add_option("--min-plies", min_plies);
  positions->add_option("--max-plies", max_plies);

  auto* analyze = app.add_subcommand("analyze", "analyze FENs with the engine into the store");
  add_common(analyze, common);
  std::string fens_path;
  bool use_train_depth = false;
  analyze->add_option("fens", fens_path, "file with one FEN per line")->required();
  analyze->add_flag("--train-depth", use_train_depth, "use the training-data depth");

  auto* ingest = app.add_subcommand("ingest", "ingest an evaluation database or puzzle CSV");
  add_common(ingest, common);
  std::string kind = "eval-db", manifest;
  std::vector<std::string> inputs;
  std::vector<double> ratios{0.8, 0.1, 0.1};
  std::uint64_t ingest_seed = 7;
  bool backfill = false, no_setup_move = false;
  ingest->add_option("--kind", kind)->check(CLI::IsMember({"eval-db", "puzzles"}));
  ingest->add_option("inputs", inputs)->required();
  ingest->add_option("--seed", ingest_seed);
  ingest->add_option("--split", ratios, "train val test ratios")->expected(3);
  ingest->add_option("--manifest", manifest, "split manifest output (puzzles)");
  ingest->add_flag("--backfill", backfill, "analyze puzzle positions missing from the store");
  ingest->add_flag("--no-setup-move", no_setup_move, "puzzle FEN is already the solver's position");

  auto* gen = app.add_subcommand("gen-sft", "generate synthetic reasoning traces from the store");
  add_common(gen, common);
  std::size_t gen_k = 3, gen_n = 10;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--k", gen_k);
  gen->add_option("--n", gen_n);
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", gen_out);

  auto* score = app.add_subcommand("score", "score traces into reward breakdowns");
  add_common(score, common);
  std::string traces, weights_path, score_out;
  score->add_option("traces", traces)->required();
  score->add_option("--weights", weights_path, "weights snapshot JSON or 'uniform'");
  score->add_option("--lambda", common.lambda);
  score->add_option("--out", score_out);

  auto* eval = app.add_subcommand("eval", "evaluate traces with the held-out metrics");
  add_common(eval, common);
  std::string eval_json, eval_samples;
  std::size_t k_cov = 0;
  eval->add_option("traces", traces)->required();
  eval->add_option("--k-cov", k_cov);
  eval->add_option("--json", eval_json);
  eval->add_option("--samples", eval_samples);

  auto* sim = app.add_subcommand("simulate", "run the mock-policy training loop");
  add_common(sim, common);
  SimFlags sim_flags;
  double temperature = 0.0, alpha = 0.0, w_min = -1.0;
  std::string temp_mode;
  sim->add_option("--steps", sim_flags.steps);
  sim->add_option("--batch", sim_flags.batch);
  sim->add_option("--mode", sim_flags.mode)->check(CLI::IsMember({"adaptive", "fixed", "both"}));
  sim->add_option("--granularity", sim_flags.granularity)->check(CLI::IsMember({"batch", "sample"}));
  sim->add_option("--seed", sim_flags.seed);
  sim->add_option("--eta", sim_flags.eta);
  sim->add_option("--competence", sim_flags.competence, "subtask=p, repeatable");
  sim->add_option("--temperature", temperature);
  sim->add_option("--temperature-mode", temp_mode)->check(CLI::IsMember({"fixed", "adaptive"}));
  sim->add_option("--alpha", alpha);
  sim->add_option("--w-min", w_min);
  sim->add_option("--out", sim_flags.out, "trajectory CSV path prefix");

  auto* serve = app.add_subcommand("serve", "newline-delimited JSON scoring service");
  add_common(serve, common);
  int port = -1;
  std::size_t in_flight = 0;
  serve->add_option("--port", port, "TCP port on 127.0.0.1 (default: stdio)");
  serve->add_option("--max-in-flight", in_flight);
  serve->add_option("--weights", weights_path);

  auto* judge = app.add_subcommand("judge", "rate traces with an LLM judge panel");
  add_common(judge, common);
  bool judge_mock = false;
  std::string transcripts_out, report_out;
  judge->add_option("traces", traces)->required();
  judge->add_flag("--mock", judge_mock, "use the built-in deterministic judge");
  judge->add_option("--transcripts", transcripts_out);
  judge->add_option("--out", report_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*positions) return cmd_positions(pos_count, pos_seed, min_plies, max_plies);
    HarnessConfig cfg = resolve_config(common);
    if (*analyze) return cmd_analyze(cfg, fens_path, use_train_depth);
    if (*ingest) return cmd_ingest(cfg, kind, inputs, ingest_seed, ratios, manifest, backfill, !no_setup_move);
    if (*gen) return cmd_gen_sft(cfg, gen_k, gen_n, gen_seed, gen_out);
    if (*score) return cmd_score(cfg, traces, weights_path, score_out);
    if (*eval) {
      if (k_cov > 0) cfg.metrics.k_cov = k_cov;
      return cmd_eval(cfg, traces, eval_json, eval_samples);
    }
    if (*sim) {
      if (temperature > 0.0) cfg.scheduler.base_temperature = temperature;
      if (!temp_mode.empty()) cfg.scheduler.mode = parse_temperature_mode(temp_mode);
      if (alpha > 0.0) cfg.scheduler.alpha = alpha;
      if (w_min >= 0.0) cfg.scheduler.w_min = w_min;
      return cmd_simulate(cfg, sim_flags);
    }
    if (*serve) {
      if (port >= 0) cfg.service.port = port;
      if (in_flight > 0) cfg.service.max_in_flight = in_flight;
      return cmd_serve(cfg, weights_path);
    }
    if (*judge) return cmd_judge(cfg, traces, judge_mock, transcripts_out, report_out);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const EngineError& e) {
    std::cerr << "engine error: " << e.what() << '\n';
    return kExitEngine;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
