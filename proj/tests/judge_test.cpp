#include "vps/judge.hpp"
#include "vps/judge_http.hpp"
#include "vps/prompts.hpp"
#include "vps/trace_gen.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <thread>

using namespace vps;

namespace {

JudgeResponse probs(std::array<double, 5> p) {
  JudgeResponse r;
  r.probs = p;
  return r;
}

const std::array<std::array<double, 5>, 4> kDistA = {{{0, 0, 0, 0.7, 0.3},   // relevance 4.3
                                                       {0.2, 0.2, 0.2, 0.2, 0.2},  // completeness 3.0
                                                       {0, 0, 1, 0, 0},       // clarity 3.0
                                                       {0, 0, 0, 0, 1}}};     // fluency 5.0
const std::array<std::array<double, 5>, 4> kDistB = {{{0, 0, 0, 1, 0},       // 4.0
                                                       {0, 0.5, 0.5, 0, 0},   // 2.5
                                                       {0, 0, 0, 0.5, 0.5},   // 4.5
                                                       {1, 0, 0, 0, 0}}};     // 1.0

}  // namespace

TEST(ExpectedScore, Examples) {
  EXPECT_DOUBLE_EQ(expected_score(probs({0.2, 0.2, 0.2, 0.2, 0.2})), 3.0);
  EXPECT_EQ(expected_score(probs({0, 0, 0, 1, 0})), 4.0);
  EXPECT_DOUBLE_EQ(expected_score(probs({0, 0, 0, 0.7, 0.3})), 4.3);
  // renormalized over the five score tokens
  EXPECT_DOUBLE_EQ(expected_score(probs({0, 0, 0, 0.35, 0.15})), 4.3);
  for (int s = 1; s <= 5; ++s) {
    std::array<double, 5> p{};
    p[s - 1] = 1;
    EXPECT_EQ(expected_score(probs(p)), s);
  }

  JudgeResponse text;
  text.raw = "{\"score\": 4, \"justification\": \"ok\"}";
  text.parsed = parse_score_text(text.raw);
  EXPECT_EQ(expected_score(text), 4.0);
  EXPECT_EQ(parse_score_text("Score: 2"), 2);
  EXPECT_EQ(parse_score_text("{\"score\": \"5\"}"), 5);
  EXPECT_FALSE(parse_score_text("{\"score\": 10}"));
  EXPECT_FALSE(parse_score_text("no number here"));

  JudgeResponse empty_probs = probs({0, 0, 0, 0, 0});
  empty_probs.parsed = 2;
  EXPECT_EQ(expected_score(empty_probs), 2.0);
  EXPECT_THROW(expected_score(JudgeResponse{}), JudgeError);
  EXPECT_THROW(expected_score(probs({-1, 0, 0, 0, 1})), JudgeError);
}

TEST(ExpectedScore, AlwaysInRange) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 2000; ++i) {
    std::array<double, 5> p;
    for (double& x : p) x = u(rng) < 0.3 ? 0 : u(rng);
    if (p[0] + p[1] + p[2] + p[3] + p[4] == 0) continue;
    double s = expected_score(probs(p));
    ASSERT_GE(s, 1.0);
    ASSERT_LE(s, 5.0);
  }
}

TEST(Prompts, ByteMatchStoredTemplates) {
  const std::pair<Dimension, const char*> files[] = {{Dimension::Relevance, "relevance.txt"},
                                                     {Dimension::Completeness, "completeness.txt"},
                                                     {Dimension::Clarity, "clarity.txt"},
                                                     {Dimension::Fluency, "fluency.txt"}};
  for (const auto& [d, file] : files) {
    const std::string stored = fixtures::read_file(std::filesystem::path(VPS_PROMPTS_DIR) / file);
    ASSERT_FALSE(stored.empty()) << file;
    EXPECT_EQ(std::string(rubric(d)), stored) << file;
  }
  EXPECT_EQ(std::string(prompts::kReasoning),
            fixtures::read_file(std::filesystem::path(VPS_PROMPTS_DIR) / "reasoning.txt"));
}

TEST(Prompts, BuildPrompt) {
  const std::string fen = "r1bqkb1r/pppp1ppp/2n2n2/4p2Q/2B1P3/8/PPPP1PPP/RNB1K1NR w KQkq - 4 4";
  JudgeRequest rel = build_prompt(Dimension::Relevance, "trace text", fen, "Top engine moves:\n1. Qxf7#\n");
  EXPECT_EQ(rel.prompt.rfind(std::string(rubric(Dimension::Relevance)), 0), 0u);
  EXPECT_NE(rel.prompt.find("Candidate selection"), std::string::npos);
  EXPECT_NE(rel.prompt.find("Analytical grounding"), std::string::npos);
  EXPECT_NE(rel.prompt.find("FEN: " + fen), std::string::npos);
  EXPECT_NE(rel.prompt.find("1. Qxf7#"), std::string::npos);
  EXPECT_NE(rel.prompt.find("### Reasoning trace\ntrace text\n"), std::string::npos);

  JudgeRequest flu = build_prompt(Dimension::Fluency, "trace text", fen, "Top engine moves:\n1. Qxf7#\n");
  EXPECT_NE(flu.prompt.find("language quality, not chess correctness"), std::string::npos);
  EXPECT_EQ(flu.prompt.find("Top engine moves"), std::string::npos);

  EXPECT_EQ(build_prompt(Dimension::Clarity, "x", fen, "s").prompt, build_prompt(Dimension::Clarity, "x", fen, "s").prompt);
  EXPECT_EQ(parse_dimension("completeness"), Dimension::Completeness);
  EXPECT_THROW(parse_dimension("style"), std::invalid_argument);
}

TEST(Summary, Buckets) {
  Position pos = parse_fen("r1bqkb1r/pppp1ppp/2n2n2/4p2Q/2B1P3/8/PPPP1PPP/RNB1K1NR w KQkq - 4 4");
  AnalysisRecord rec = make_record(pos,
                                   {make_scored_move(pos, "Qxf7#", {}, 1, {"Qxf7#"}),
                                    make_scored_move(pos, "Nc3", 35, {}, {"Nc3"}),
                                    make_scored_move(pos, "d3", 20, {}, {"d3"}),
                                    make_scored_move(pos, "Qxh7", -120, {}, {"Qxh7"})},
                                   30, "eval-db");
  std::string s = engine_summary(rec, parse_san(pos, "Qxf7#"));
  EXPECT_NE(s.find("similar to best move"), std::string::npos);
  EXPECT_NE(s.find("forced checkmate: Qxf7#"), std::string::npos);
  EXPECT_NE(engine_summary(rec, parse_san(pos, "Qxh7")).find("significantly worse than best move (over a pawn)"),
            std::string::npos);
  EXPECT_NE(engine_summary(rec, parse_san(pos, "a3")).find("not among"), std::string::npos);

  const ScoredMove& nc3 = rec.moves[1];
  EXPECT_EQ(quality_bucket(nc3, rec.moves[2]), "similar to best move");
  ScoredMove worse = make_scored_move(pos, "a3", -40, {}, {"a3"});
  EXPECT_EQ(quality_bucket(nc3, worse), "somewhat worse than best move");
  ScoredMove much = make_scored_move(pos, "a4", -115, {}, {"a4"});  // 1.5 pawns worse
  EXPECT_EQ(quality_bucket(nc3, much), "significantly worse than best move (over a pawn)");

  AnalysisRecord quiet = make_record(pos, {make_scored_move(pos, "Nc3", 35, {}, {"Nc3"})}, 20, "eval-db");
  EXPECT_NE(engine_summary(quiet, std::nullopt).find("None of these moves lead to forced checkmate"), std::string::npos);
  AnalysisRecord none = quiet;
  none.moves.clear();
  EXPECT_THROW(engine_summary(none, std::nullopt), JudgeError);
}

TEST(Panel, MockMatchesHandComputed) {
  auto a = MockTransport::fixed("judge-a", kDistA);
  auto b = MockTransport::fixed("judge-b", kDistB);
  std::vector<PanelItem> items{{"t1", "trace one", "8/8/8/8/8/8/8/K6k w - - 0 1", ""},
                               {"t2", "trace two", "8/8/8/8/8/8/8/K6k w - - 0 1", ""}};
  PanelOptions opts;
  opts.backoff = std::chrono::milliseconds(1);
  PanelReport r = run_panel(items, {a.get(), b.get()}, opts);
  const double cross[4] = {(4.3 + 4.0) / 2, (3.0 + 2.5) / 2, (3.0 + 4.5) / 2, (5.0 + 1.0) / 2};
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t d = 0; d < 4; ++d) EXPECT_NEAR(*r.cross_judge[i][d], cross[d], 1e-12);
  EXPECT_NEAR(*r.overall_mean, (cross[0] + cross[1] + cross[2] + cross[3]) / 4, 1e-12);
  EXPECT_NEAR(*r.dimension_means[0], 4.15, 1e-12);
  EXPECT_EQ(r.transcripts.size(), 16u);
  EXPECT_EQ(a->calls(), 8);

  auto j = to_json(r);
  EXPECT_NEAR(j["per_judge"]["judge-a"]["relevance"].get<double>(), 4.3, 1e-12);
  EXPECT_NEAR(j["per_judge"]["judge-b"]["fluency"].get<double>(), 1.0, 1e-12);

  // single judge: cross-judge mean is that judge
  PanelReport solo = run_panel(items, {a.get()}, opts);
  EXPECT_NEAR(*solo.cross_judge[0][0], 4.3, 1e-12);
  EXPECT_NEAR(*solo.overall[0], (4.3 + 3.0 + 3.0 + 5.0) / 4, 1e-12);
}

TEST(Panel, OverallIsMeanOfDimensions) {
  const std::array<std::array<double, 5>, 4> d = {{{0, 1, 0, 0, 0}, {0, 0, 1, 0, 0}, {0, 0, 0, 1, 0}, {0, 0, 0, 0, 1}}};
  auto m = MockTransport::fixed("m", d);
  PanelReport r = run_panel({{"t", "x", "fen", ""}}, {m.get()});
  EXPECT_EQ(*r.overall[0], 3.5);
}

TEST(Panel, PermutationInvariant) {
  auto a = MockTransport::fixed("a", kDistA);
  auto b = MockTransport::fixed("b", kDistB);
  std::vector<PanelItem> items{{"t1", "one", "f", ""}, {"t2", "two", "f", ""}, {"t3", "three", "f", ""}};
  PanelReport r1 = run_panel(items, {a.get(), b.get()});
  std::reverse(items.begin(), items.end());
  PanelReport r2 = run_panel(items, {b.get(), a.get()});
  EXPECT_EQ(r1.overall_mean, r2.overall_mean);
  for (std::size_t d = 0; d < 4; ++d) EXPECT_NEAR(*r1.dimension_means[d], *r2.dimension_means[d], 1e-12);
}

TEST(Panel, RetriesThenRecordsAbsence) {
  PanelOptions opts;
  opts.backoff = std::chrono::milliseconds(1);
  opts.max_in_flight = 1;
  auto flaky = MockTransport::fixed("flaky", kDistA, 2);  // first two calls fail
  PanelReport r = run_panel({{"t", "x", "fen", ""}}, {flaky.get()}, opts);
  EXPECT_NEAR(*r.cross_judge[0][0], 4.3, 1e-12);
  EXPECT_EQ(flaky->calls(), 4);

  auto dead = MockTransport::fixed("dead", kDistA, 1000);
  auto good = MockTransport::fixed("good", kDistB);
  PanelReport q = run_panel({{"t", "x", "fen", ""}}, {dead.get(), good.get()}, opts);
  EXPECT_FALSE(q.scores[0][0][0]);
  EXPECT_EQ(*q.cross_judge[0][0], 4.0);  // absent scores are excluded, not zero-filled
  EXPECT_FALSE(q.transcripts[0].error.empty());
  EXPECT_TRUE(to_json(q.transcripts[0])["expected_score"].is_null());

  PanelReport all_dead = run_panel({{"t", "x", "fen", ""}}, {dead.get()}, opts);
  EXPECT_FALSE(all_dead.overall[0]);
  EXPECT_FALSE(all_dead.overall_mean);
  EXPECT_THROW(run_panel({}, {}), JudgeError);
}

TEST(Http, ScoreTokenProbs) {
  auto choice = nlohmann::json::parse(R"({
    "message": {"content": "{\"score\": 4, \"justification\": \"fine\"}"},
    "logprobs": {"content": [
      {"token": "{\"", "logprob": 0},
      {"token": "score", "logprob": 0},
      {"token": "\":", "logprob": 0},
      {"token": " 4", "logprob": -0.3567, "top_logprobs": [
        {"token": " 4", "logprob": -0.35667494393873245},
        {"token": " 5", "logprob": -1.2039728043259361},
        {"token": "four", "logprob": -5}]},
      {"token": ",", "logprob": 0}]}})");
  auto p = score_token_probs(choice);
  ASSERT_TRUE(p);
  EXPECT_NEAR((*p)[3], 0.7, 1e-12);
  EXPECT_NEAR((*p)[4], 0.3, 1e-12);
  JudgeResponse r;
  r.probs = p;
  EXPECT_NEAR(expected_score(r), 4.3, 1e-12);

  nlohmann::json none = {{"message", {{"content", "{\"score\": 4}"}}}, {"logprobs", nullptr}};
  EXPECT_FALSE(score_token_probs(none));
}

TEST(Http, TransportAgainstLocalServer) {
  httplib::Server server;
  std::string seen_auth, seen_model;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    auto body = nlohmann::json::parse(req.body);
    seen_model = body["model"];
    const std::string prompt = body["messages"][0]["content"];
    nlohmann::json reply = {
        {"choices",
         {{{"message", {{"content", "{\"score\": 2, \"justification\": \"" + std::to_string(prompt.size()) + "\"}"}}},
           {"logprobs",
            {{"content",
              {{{"token", "{\"score\": "}, {"logprob", 0}},
               {{"token", "2"},
                {"logprob", std::log(0.5)},
                {"top_logprobs",
                 {{{"token", "2"}, {"logprob", std::log(0.5)}}, {{"token", "3"}, {"logprob", std::log(0.5)}}}}}}}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  server.Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("VPS_TEST_JUDGE_KEY", "secret", 1);
  HttpJudgeConfig cfg;
  cfg.name = "local";
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
  cfg.model = "m1";
  cfg.api_key_env = "VPS_TEST_JUDGE_KEY";
  cfg.timeout_s = 5;
  HttpTransport http(cfg);
  JudgeRequest req = build_prompt(Dimension::Clarity, "trace", "fen", "");
  JudgeResponse resp = http.complete(req);
  EXPECT_EQ(seen_auth, "Bearer secret");
  EXPECT_EQ(seen_model, "m1");
  EXPECT_EQ(resp.parsed, 2);
  EXPECT_NEAR(expected_score(resp), 2.5, 1e-12);

  HttpJudgeConfig broken = cfg;
  broken.path = "/broken";
  HttpTransport bad(broken);
  EXPECT_THROW(bad.complete(req), JudgeError);

  server.stop();
  th.join();
}
