#include "vps/metrics.hpp"
#include "vps/trace_gen.hpp"

#include "metrics_oracle.hpp"
#include "test_util.hpp"
#include "trace_fuzz.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace vps;

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

void expect_same_eval(const SampleEvaluation& a, const SampleEvaluation& b) {
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

}  // namespace

TEST(PvOverlap, FractionOfDepths) {
  Position start = Position::start();
  std::vector<std::string> truth{"e4", "e5", "Nf3", "Nc6", "Bb5", "a6"};
  EXPECT_EQ(pv_overlap(truth, truth, start), 1.0);
  EXPECT_EQ(pv_overlap({"e4", "e5", "Nc3"}, truth, start), 0.4);
  EXPECT_EQ(pv_overlap({"d4"}, truth, start), 0.0);
  EXPECT_EQ(pv_overlap({"e4", "e5"}, {"e4", "e5"}, start), 1.0);
  EXPECT_EQ(pv_overlap({"e4", "Ke9"}, {"e4", "e5"}, start), 0.5);
}

TEST(Evaluate, SelfTrace) {
  for (const auto& s : fixtures::fixture_samples()) {
    SampleEvaluation e = evaluate_sample(parse_trace(generate_trace(s, 3)), s);
    EXPECT_TRUE(e.top1);
    EXPECT_EQ(e.coverage, 1.0);
    EXPECT_EQ(mean_of(e.win_rate_errors), 0.0);
    EXPECT_EQ(mean_of(e.pv_overlaps), 1.0);
    if (!e.pawn_errors.empty()) EXPECT_EQ(mean_of(e.pawn_errors), 0.0);
    if (e.mate_error) EXPECT_EQ(*e.mate_error, 0.0);
    if (e.capture_correct) EXPECT_TRUE(*e.capture_correct);
    if (e.check_correct) EXPECT_TRUE(*e.check_correct);
    EXPECT_TRUE(e.consistent);
    EXPECT_FALSE(e.format_error);
    EXPECT_EQ(e.unique_candidates, std::min<std::size_t>(3, s.record->moves.size()));
  }
}

TEST(Evaluate, EmptyTracePenalties) {
  auto s = fixtures::fixture_samples().at(20);
  SampleEvaluation e = evaluate_sample(parse_trace(""), s);
  ASSERT_EQ(e.win_rate_errors.size(), 1u);
  EXPECT_EQ(e.win_rate_errors[0], 100.0);
  EXPECT_EQ(e.pawn_errors[0], 10.0);
  EXPECT_EQ(e.pv_overlaps[0], 0.0);
  EXPECT_FALSE(e.consistent);
  EXPECT_TRUE(e.format_error);
  EXPECT_FALSE(e.top1);
  EXPECT_EQ(e.coverage, 0.0);

  MetricsReport r = aggregate({e});
  EXPECT_EQ(r.win_rate_mae.mean(), 100.0);
  EXPECT_EQ(r.pawn_mae.mean(), 10.0);
  EXPECT_EQ(r.pv_overlap.mean(), 0.0);
  EXPECT_EQ(r.format_error.mean(), 1.0);
}

TEST(Evaluate, CoverageTwoOfThree) {
  auto s = fixtures::fixture_samples().at(0);
  ASSERT_GE(s.record->moves.size(), 3u);
  ReasoningTrace t = parse_trace(generate_trace(s, 3));
  t.candidates.erase(t.candidates.begin() + 1);
  EXPECT_NEAR(evaluate_sample(t, s).coverage, 2.0 / 3.0, 1e-15);
  MetricsConfig one;
  one.k_cov = 1;
  EXPECT_EQ(evaluate_sample(t, s, one).coverage, 1.0);
  MetricsConfig big;
  big.k_cov = 50;  // shrinks to the record size
  EXPECT_NEAR(evaluate_sample(t, s, big).coverage, 2.0 / static_cast<double>(s.record->moves.size()), 1e-15);
}

TEST(Evaluate, MissingClaimPenaltyDominance) {
  std::mt19937_64 rng(8);
  auto samples = fixtures::fixture_samples();
  for (int i = 0; i < 300; ++i) {
    const auto& s = samples[i % samples.size()];
    ReasoningTrace t = fixtures::random_parsed_trace(*s.record, rng);
    if (t.candidates.empty()) continue;
    SampleEvaluation before = evaluate_sample(t, s);
    ReasoningTrace u = t;
    auto& c = u.candidates[i % u.candidates.size()];
    c.win_rate.reset();
    c.pawn_score.reset();
    c.pv.reset();
    SampleEvaluation after = evaluate_sample(u, s);
    if (!before.win_rate_errors.empty()) EXPECT_GE(mean_of(after.win_rate_errors), mean_of(before.win_rate_errors));
    if (!before.pawn_errors.empty()) EXPECT_GE(mean_of(after.pawn_errors), mean_of(before.pawn_errors));
    if (!before.pv_overlaps.empty()) EXPECT_LE(mean_of(after.pv_overlaps), mean_of(before.pv_overlaps));
  }
}

TEST(Evaluate, MissingRecordThrows) {
  PositionSample s;
  s.id = "x";
  EXPECT_THROW(evaluate_sample(parse_trace(""), s), OracleError);
  EXPECT_THROW(aggregate({}), std::invalid_argument);
}

TEST(Aggregate, Examples) {
  SampleEvaluation a, b, c;
  a.win_rate_errors = {0.0};
  b.win_rate_errors = {100.0};
  EXPECT_EQ(aggregate({a, b}).win_rate_mae.mean(), 50.0);
  a.capture_correct = true;
  MetricsReport r = aggregate({a, b, c});
  EXPECT_EQ(r.capture.mean(), 1.0);
  EXPECT_EQ(r.capture.n, 1u);
  EXPECT_EQ(r.samples, 3u);
  EXPECT_EQ(r.coverage.n, 3u);
  auto j = to_json(r);
  EXPECT_EQ(j["check_accuracy"]["value"], nullptr);
  EXPECT_EQ(j["capture_accuracy"]["n"], 1);
  EXPECT_NE(render_table(r).find("Coverage"), std::string::npos);
}

TEST(Aggregate, DuplicateInjectionChangesNothing) {
  std::mt19937_64 rng(31);
  auto samples = fixtures::fixture_samples();
  std::vector<SampleEvaluation> plain, duped;
  for (int i = 0; i < 100; ++i) {
    const auto& s = samples[i % samples.size()];
    ReasoningTrace t = fixtures::random_parsed_trace(*s.record, rng);
    ReasoningTrace d = t;
    if (!d.candidates.empty()) {
      for (int n = 0; n < 3; ++n) {
        const std::size_t from = std::uniform_int_distribution<std::size_t>(0, d.candidates.size() - 1)(rng);
        const std::size_t to = std::uniform_int_distribution<std::size_t>(from + 1, d.candidates.size())(rng);
        CandidateClaim copy = d.candidates[from];
        copy.win_rate = 3.0;  // a later duplicate with a different claim is ignored
        d.candidates.insert(d.candidates.begin() + static_cast<long>(to), copy);
      }
    }
    plain.push_back(evaluate_sample(t, s));
    duped.push_back(evaluate_sample(d, s));
    expect_same_eval(plain.back(), duped.back());
  }
  EXPECT_EQ(to_json(aggregate(plain)).dump(), to_json(aggregate(duped)).dump());
}

TEST(Aggregate, OrderInvariance) {
  std::mt19937_64 rng(41);
  auto samples = fixtures::fixture_samples();
  std::vector<SampleEvaluation> evals;
  for (int i = 0; i < 100; ++i) {
    const auto& s = samples[i % samples.size()];
    evals.push_back(evaluate_sample(fixtures::random_parsed_trace(*s.record, rng), s));
  }
  MetricsReport a = aggregate(evals);
  std::shuffle(evals.begin(), evals.end(), rng);
  MetricsReport b = aggregate(evals);
  EXPECT_EQ(a.capture.sum, b.capture.sum);
  EXPECT_EQ(a.capture.n, b.capture.n);
  EXPECT_EQ(a.check.sum, b.check.sum);
  EXPECT_EQ(a.check.n, b.check.n);
  EXPECT_EQ(a.mate_mae.n, b.mate_mae.n);
  EXPECT_NEAR(a.mate_mae.mean(), b.mate_mae.mean(), 1e-12);
  EXPECT_NEAR(a.win_rate_mae.mean(), b.win_rate_mae.mean(), 1e-12);
}

TEST(Aggregate, MatchesBruteForce) {
  std::mt19937_64 rng(51);
  auto samples = fixtures::fixture_samples();
  std::vector<ReasoningTrace> traces;
  std::vector<PositionSample> used;
  std::vector<SampleEvaluation> evals;
  for (int i = 0; i < 100; ++i) {
    const auto& s = samples[i % samples.size()];
    ReasoningTrace t = i % 10 == 0 ? parse_trace(generate_trace(s)) : fixtures::random_parsed_trace(*s.record, rng);
    traces.push_back(t);
    used.push_back(s);
    evals.push_back(evaluate_sample(t, s));
  }
  auto report = to_json(aggregate(evals));
  auto oracle = fixtures::oracle_report(traces, used);
  for (const auto& [key, value] : oracle.value) {
    SCOPED_TRACE(key);
    EXPECT_EQ(report[key]["n"].get<std::size_t>(), oracle.n[key]);
    if (!value) {
      EXPECT_TRUE(report[key]["value"].is_null());
      continue;
    }
    EXPECT_NEAR(report[key]["value"].get<double>(), *value, 1e-12);
  }
  EXPECT_GT(oracle.n["capture_accuracy"], 10u);
  EXPECT_GT(oracle.n["mate_mae"], 0u);
}
