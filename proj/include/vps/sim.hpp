#pragma once

// Desk-scale training loop: a mock policy with per-subtask competence emits
// traces, the verifier scores them, the scheduler reweights subtasks and the
// weights feed back into how fast each competence improves.

#include "vps/rewards.hpp"
#include "vps/trace_gen.hpp"

#include <array>
#include <random>
#include <string>
#include <vector>

namespace vps {

struct MockPolicy {
  std::array<double, kSubtaskCount> competence{0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
  double learning_rate = 0.0;
  double win_rate_noise = 20.0;  // percentage points at zero competence
  double pawn_noise = 3.0;       // pawns at zero competence
  std::size_t candidates = 3;
};

namespace detail {

inline bool coin(std::mt19937_64& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

inline double competence(const MockPolicy& p, Subtask k) { return p.competence[index_of(k)]; }

}  // namespace detail

/// Claims for the record's top moves, each subtask correct with its competence.
inline ReasoningTrace emit_claims(const MockPolicy& policy, const PositionSample& sample, std::mt19937_64& rng) {
  using detail::coin;
  using detail::competence;
  if (!sample.record) throw OracleError("sample " + sample.id + " has no analysis record");
  ReasoningTrace t = truthful_trace(*sample.record, policy.candidates);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (std::size_t i = 0; i < t.candidates.size(); ++i) {
    CandidateClaim& c = t.candidates[i];
    const ScoredMove& truth = sample.record->moves[i];
    if (!coin(rng, competence(policy, Subtask::Capture))) {
      if (c.capture->captures) c.capture = CaptureClaim{};
      else c.capture = CaptureClaim{true, PieceKind::Pawn, truth.move.to};
    }
    if (!coin(rng, competence(policy, Subtask::Check))) c.check = !*c.check;
    if (truth.mate && !coin(rng, competence(policy, Subtask::Mate))) c.mate = MateClaim{};
    if (c.pawn_score && !coin(rng, competence(policy, Subtask::PawnScore))) {
      const double scale = (1.0 - competence(policy, Subtask::PawnScore)) * policy.pawn_noise;
      c.pawn_score = std::round((*c.pawn_score + gauss(rng) * scale) * 100.0) / 100.0;
    }
    if (!coin(rng, competence(policy, Subtask::WinRate))) {
      const double scale = (1.0 - competence(policy, Subtask::WinRate)) * policy.win_rate_noise;
      c.win_rate = std::clamp(std::round((*c.win_rate + gauss(rng) * scale) * 100.0) / 100.0, 0.0, 100.0);
    }
    if (!coin(rng, competence(policy, Subtask::Pv))) c.pv = std::vector<std::string>{c.pv->front()};
  }

  std::size_t top = 0;
  for (std::size_t i = 1; i < t.candidates.size(); ++i)
    if (*t.candidates[i].win_rate > *t.candidates[top].win_rate) top = i;
  std::size_t pick = top;
  if (t.candidates.size() > 1 && !coin(rng, competence(policy, Subtask::Logic))) {
    pick = std::uniform_int_distribution<std::size_t>(0, t.candidates.size() - 2)(rng);
    if (pick >= top) ++pick;
  }
  t.answer = t.candidates[pick].move;
  t.stated_best = t.answer;
  return t;
}

inline std::string emit_trace(const MockPolicy& policy, const PositionSample& sample, std::mt19937_64& rng) {
  return serialize_trace(emit_claims(policy, sample, rng));
}

enum class WeightingMode { Fixed, Adaptive };
enum class UpdateGranularity { PerBatch, PerSample };

struct SimConfig {
  std::size_t steps = 300;
  std::size_t batch = 128;
  WeightingMode mode = WeightingMode::Adaptive;
  UpdateGranularity granularity = UpdateGranularity::PerBatch;
  SchedulerParams scheduler;
  RewardConfig reward;
  std::uint64_t seed = 0;
  std::size_t tail = 10;  // steps averaged into the final reward means
};

struct SimStep {
  long step = 0;
  std::vector<double> mu;
  std::vector<double> w;
  std::vector<std::optional<double>> means;
  std::array<double, kSubtaskCount> competence{};
};

struct SimResult {
  std::vector<SimStep> trajectory;
  std::vector<std::optional<double>> final_means;
  MockPolicy policy;
};

inline SimResult train_loop(MockPolicy policy, const std::vector<PositionSample>& data, const SimConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("simulation needs at least one sample");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  WeightState state = init_weights(kSubtaskCount, cfg.scheduler);
  const std::vector<double> uniform = uniform_weights();
  if (cfg.mode == WeightingMode::Fixed) state.w = uniform;

  SimResult out;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const std::vector<double> used = state.w;
    std::vector<RewardBreakdown> batch;
    batch.reserve(cfg.batch);
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      const PositionSample& s = data[pick(rng)];
      ReasoningTrace trace = parse_trace(emit_trace(policy, s, rng));
      batch.push_back(score_trace(trace, s, used, cfg.reward));
    }
    const auto means = batch_means(batch);
    if (cfg.granularity == UpdateGranularity::PerBatch) {
      state = update_weights(state, means);
    } else {
      for (const auto& b : batch) {
        std::vector<std::optional<double>> one(kSubtaskCount);
        for (std::size_t k = 0; k < kSubtaskCount; ++k)
          if (b.applicable[k]) one[k] = b.r[k];
        state = update_weights(state, one);
      }
    }
    if (cfg.mode == WeightingMode::Fixed) state.w = uniform;
    state.step = static_cast<long>(step + 1);

    for (std::size_t k = 0; k < kSubtaskCount; ++k)
      policy.competence[k] =
          std::clamp(policy.competence[k] + policy.learning_rate * used[k] * (1.0 - policy.competence[k]), 0.0, 1.0);

    out.trajectory.push_back({state.step, state.mu, state.w, means, policy.competence});
  }

  const std::size_t tail = std::min(cfg.tail == 0 ? std::size_t{1} : cfg.tail, out.trajectory.size());
  out.final_means.assign(kSubtaskCount, std::nullopt);
  for (std::size_t k = 0; k < kSubtaskCount; ++k) {
    double s = 0.0;
    int n = 0;
    for (std::size_t i = out.trajectory.size() - tail; i < out.trajectory.size(); ++i)
      if (out.trajectory[i].means[k]) {
        s += *out.trajectory[i].means[k];
        ++n;
      }
    if (n) out.final_means[k] = s / n;
  }
  out.policy = policy;
  return out;
}

inline void write_trajectory_csv(std::ostream& out, const SimResult& r) {
  write_trajectory_header(out, subtask_names(), true);
  for (const auto& s : r.trajectory) {
    WeightState snap;
    snap.step = s.step;
    snap.mu = s.mu;
    snap.w = s.w;
    write_trajectory_row(out, snap, &s.means);
  }
}

}  // namespace vps
