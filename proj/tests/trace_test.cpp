#include "vps/rewards.hpp"
#include "vps/trace_gen.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <random>
#include <sstream>

using namespace vps;

namespace {

const char* kTwoCandidates = R"(<think>
The position is sharp.
Candidate 1: Qxf7#
Capture: Pawn on f7
Check: yes
Mate: mate in 1 (for)
Win rate: 100%
PV: Qxf7#

Candidate 2: Nc3
Capture: none
Check: no
Mate: none
Score: +0.35 pawns
Win rate: 0.532
PV: 5. Nc3 Nxh5 6. Bxf7+

Best move: Qxf7#
</think>
<answer> Qxf7# </answer>)";

}  // namespace

TEST(Parse, FullSchema) {
  ReasoningTrace t = parse_trace(kTwoCandidates);
  EXPECT_TRUE(t.flags.think_tags);
  EXPECT_TRUE(t.flags.answer_tags);
  EXPECT_TRUE(t.flags.schema_ok);
  EXPECT_TRUE(t.format_ok());
  ASSERT_EQ(t.candidates.size(), 2u);
  const auto& a = t.candidates[0];
  EXPECT_EQ(a.move, "Qxf7#");
  EXPECT_EQ(*a.capture, (CaptureClaim{true, PieceKind::Pawn, *Square::parse("f7")}));
  EXPECT_TRUE(*a.check);
  EXPECT_EQ(a.mate->moves, 1);
  EXPECT_FALSE(a.pawn_score);
  EXPECT_EQ(*a.win_rate, 100.0);
  const auto& b = t.candidates[1];
  EXPECT_FALSE(b.capture->captures);
  EXPECT_FALSE(b.mate->moves);
  EXPECT_EQ(*b.pawn_score, 0.35);
  EXPECT_DOUBLE_EQ(*b.win_rate, 53.2);
  EXPECT_EQ(*b.pv, (std::vector<std::string>{"Nc3", "Nxh5", "Bxf7+"}));
  EXPECT_EQ(*t.stated_best, "Qxf7#");
  EXPECT_EQ(*t.answer, "Qxf7#");
}

TEST(Parse, DegenerateInputs) {
  ReasoningTrace empty = parse_trace("");
  EXPECT_FALSE(empty.flags.think_tags);
  EXPECT_FALSE(empty.flags.answer_tags);
  EXPECT_FALSE(empty.flags.schema_ok);
  EXPECT_TRUE(empty.candidates.empty());
  EXPECT_FALSE(empty.format_ok());

  ReasoningTrace answer_only = parse_trace("<answer> e4 </answer>");
  EXPECT_TRUE(answer_only.flags.answer_tags);
  EXPECT_FALSE(answer_only.flags.schema_ok);
  EXPECT_EQ(*answer_only.answer, "e4");

  ReasoningTrace two_answers = parse_trace("<think>x</think><answer> e4 d4 </answer>");
  EXPECT_TRUE(two_answers.flags.answer_tags);
  EXPECT_FALSE(two_answers.answer);

  ReasoningTrace bare = parse_trace("<think>\nCandidate 1: e4\n</think><answer>e4</answer>");
  ASSERT_EQ(bare.candidates.size(), 1u);
  EXPECT_FALSE(bare.candidates[0].well_formed);
  EXPECT_FALSE(bare.flags.schema_ok);

  ReasoningTrace bad_value = parse_trace("<think>\nCandidate 1: e4\nCheck: maybe\n</think><answer>e4</answer>");
  EXPECT_FALSE(bad_value.candidates[0].well_formed);
  EXPECT_FALSE(bad_value.candidates[0].check);
}

TEST(Parse, ValueForms) {
  auto one = [](const std::string& line) {
    return parse_trace("<think>\nCandidate 1: e4\n" + line + "\n</think><answer> e4 </answer>").candidates.at(0);
  };
  EXPECT_EQ(*one("Win rate: 59.1").win_rate, 59.1);
  EXPECT_EQ(*one("Win rate: 59.1 %").win_rate, 59.1);
  EXPECT_FALSE(one("Win rate: 120%").well_formed);
  EXPECT_EQ(*one("Score: -1.5").pawn_score, -1.5);
  EXPECT_EQ(*one("Score: +2 pawns").pawn_score, 2.0);
  EXPECT_EQ(one("Mate: mate in 3 (against)").mate->moves, -3);
  EXPECT_EQ(one("Mate: Mate in 2").mate->moves, 2);
  EXPECT_FALSE(one("Mate: mate in 0").well_formed);
  EXPECT_EQ(one("Capture: knight on D5").capture->square, *Square::parse("d5"));
  EXPECT_FALSE(one("Capture: Knight d5").well_formed);
  EXPECT_EQ(one("PV: e4 e5 Nf3 Nc6 Bb5 a6 Ba4").pv->size(), kMaxPvPlies);
  EXPECT_TRUE(*one("- Check: yes").check);
}

TEST(Parse, RobustToInsertedProse) {
  std::string noisy = kTwoCandidates;
  auto at = noisy.find("Check: yes");
  noisy.insert(at, "This looks very strong because the king is exposed.\nNote that: prose with colons is ignored\n");
  ReasoningTrace a = parse_trace(kTwoCandidates);
  ReasoningTrace b = parse_trace(noisy);
  EXPECT_EQ(a.candidates, b.candidates);
  EXPECT_EQ(a.flags, b.flags);
  EXPECT_EQ(a.answer, b.answer);
}

TEST(Serialize, RoundTrip) {
  ReasoningTrace t = parse_trace(kTwoCandidates);
  std::string text = serialize_trace(t);
  ReasoningTrace u = parse_trace(text);
  EXPECT_EQ(t.candidates, u.candidates);
  EXPECT_EQ(t.answer, u.answer);
  EXPECT_EQ(t.stated_best, u.stated_best);
  EXPECT_TRUE(u.format_ok());
  EXPECT_EQ(serialize_trace(u), text);
}

TEST(Serialize, RejectsInconsistentClaims) {
  ReasoningTrace t;
  t.candidates.push_back({});
  t.candidates[0].move = "e4";
  t.candidates[0].pv = std::vector<std::string>{};
  EXPECT_THROW(serialize_trace(t), TraceError);
  t.candidates[0].pv.reset();
  t.candidates[0].win_rate = 101.0;
  EXPECT_THROW(serialize_trace(t), TraceError);
  t.candidates[0].win_rate.reset();
  t.candidates[0].move = "e 4";
  EXPECT_THROW(serialize_trace(t), TraceError);
}

TEST(Serialize, WinRateTextReadsBackExactly) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> cp(-1500, 1500);
  for (int i = 0; i < 2000; ++i) {
    double wr = cp_to_winrate(std::round(cp(rng)));
    ReasoningTrace t;
    t.candidates.push_back({});
    t.candidates[0].move = "e4";
    t.candidates[0].win_rate = wr;
    EXPECT_EQ(*parse_trace(serialize_trace(t)).candidates[0].win_rate, wr);
  }
}

TEST(Dedupe, ResolvedAndIdempotent) {
  Position start = Position::start();
  ReasoningTrace t = parse_trace(
      "<think>\nCandidate 1: Nf3\nCheck: no\nCandidate 2: Ng1f3\nCheck: yes\nCandidate 3: e4\nCheck: no\n"
      "Candidate 4: zz9\nCheck: no\nCandidate 5: zz9+\nCheck: no\n</think><answer> Nf3 </answer>");
  ReasoningTrace d = dedupe_candidates(t, &start);
  ASSERT_EQ(d.candidates.size(), 3u);
  EXPECT_EQ(d.candidates[0].move, "Nf3");
  EXPECT_FALSE(*d.candidates[0].check);
  EXPECT_EQ(d.candidates[1].move, "e4");
  EXPECT_EQ(d.candidates[2].move, "zz9");
  EXPECT_EQ(dedupe_candidates(d, &start).candidates, d.candidates);
  EXPECT_EQ(dedupe_candidates(t).candidates.size(), 4u);  // raw text only
}

TEST(TraceGen, MateInOneFixture) {
  Position pos = parse_fen("r1bqkb1r/pppp1ppp/2n2n2/4p2Q/2B1P3/8/PPPP1PPP/RNB1K1NR w KQkq - 4 4");
  AnalysisRecord rec = make_record(pos,
                                   {make_scored_move(pos, "Qxf7#", {}, 1, {"Qxf7#"}),
                                    make_scored_move(pos, "Nc3", 35, {}, {"Nc3", "Nxh5"}),
                                    make_scored_move(pos, "Qxh7", -120, {}, {"Qxh7", "Rxh7"})},
                                   30, "eval-db");
  std::string text = generate_trace(fixtures::sample_from(rec));
  EXPECT_NE(text.find("Candidate 1: Qxf7#\nCapture: Pawn on f7\nCheck: yes\nMate: mate in 1 (for)\nWin rate: 100.00%\n"),
            std::string::npos)
      << text;
  EXPECT_NE(text.find("Capture: Pawn on h7"), std::string::npos);
  EXPECT_NE(text.find("<answer> Qxf7# </answer>"), std::string::npos);
  ReasoningTrace t = parse_trace(text);
  EXPECT_TRUE(t.format_ok());
  EXPECT_EQ(t.candidates.size(), 3u);

  ReasoningTrace single = parse_trace(generate_trace(fixtures::sample_from(rec), 1));
  EXPECT_EQ(single.candidates.size(), 1u);
  EXPECT_TRUE(single.format_ok());

  PositionSample no_record;
  EXPECT_THROW(generate_trace(no_record), OracleError);
}

TEST(TraceGen, FixtureCorpusSelfConsistent) {
  auto samples = fixtures::fixture_samples();
  ASSERT_EQ(samples.size(), 50u);
  for (const auto& s : samples) {
    ReasoningTrace t = parse_trace(generate_trace(s));
    ASSERT_TRUE(t.format_ok()) << s.record->fen;
    for (std::size_t i = 0; i < t.candidates.size(); ++i) {
      auto m = parse_san(s.position, t.candidates[i].move);
      MoveClass mc = classify_move(s.position, m);
      EXPECT_EQ(*t.candidates[i].check, mc.gives_check);
      EXPECT_EQ(t.candidates[i].capture->captures, mc.is_capture);
    }
    RewardBreakdown b = score_trace(t, s, uniform_weights());
    for (std::size_t k = 0; k < kSubtaskCount; ++k)
      if (b.applicable[k]) EXPECT_EQ(b.r[k], 1.0) << s.record->fen << " " << subtask_name(kSubtasks[k]);
    EXPECT_NEAR(b.r_reason, 1.0, 1e-12);
  }
}

TEST(TraceGen, CorpusDeterministicAndSkipsMissing) {
  auto samples = fixtures::fixture_samples();
  samples.resize(10);
  PositionSample missing;
  missing.id = "missing";
  samples.insert(samples.begin() + 3, missing);
  std::ostringstream a, b;
  CorpusStats sa = generate_corpus(samples, 3, a);
  generate_corpus(samples, 3, b);
  EXPECT_EQ(sa.written, 10u);
  EXPECT_EQ(sa.skipped, 1u);
  EXPECT_EQ(a.str(), b.str());
  std::istringstream in(a.str());
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(parse_trace(j["trace"].get<std::string>()).format_ok());
    const std::string prompt = j["prompt"];
    EXPECT_NE(prompt.find("Current board in FEN: " + j["fen"].get<std::string>() + "\n"), std::string::npos);
    EXPECT_EQ(prompt.find("<board>"), std::string::npos);
    EXPECT_EQ(prompt.find("<legal moves>"), std::string::npos);
    ++n;
  }
  EXPECT_EQ(n, 10);
}

TEST(TraceGen, PromptListsLegalMoves) {
  std::string p = render_reasoning_prompt(Position::start());
  EXPECT_NE(p.find("Legal moves: Nc3, Na3, Nh3, Nf3, a3, "), std::string::npos) << p.substr(p.size() - 200);
  EXPECT_NE(p.find(", h4\n"), std::string::npos);
}
