#pragma once

// Paired-seed easy/hard curriculum experiment on the fixture positions.

#include "vps/sim.hpp"

#include <future>
#include <vector>

namespace vps::fixtures {

struct CurriculumRun {
  SimResult adaptive;
  SimResult fixed;
};

inline SimConfig curriculum_config(std::uint64_t seed, WeightingMode mode) {
  SimConfig cfg;
  cfg.steps = 300;
  cfg.batch = 32;
  cfg.mode = mode;
  cfg.granularity = UpdateGranularity::PerSample;
  cfg.scheduler.base_temperature = 0.25;
  cfg.scheduler.mode = TemperatureMode::Adaptive;
  cfg.seed = seed;
  return cfg;
}

inline MockPolicy curriculum_policy() {
  MockPolicy p;
  p.competence[index_of(Subtask::Check)] = 0.95;   // easy
  p.competence[index_of(Subtask::Capture)] = 0.05;  // hard
  p.learning_rate = 0.002;
  return p;
}

inline std::vector<CurriculumRun> run_curriculum(const std::vector<PositionSample>& data, int seeds) {
  std::vector<std::future<CurriculumRun>> jobs;
  for (int s = 0; s < seeds; ++s)
    jobs.push_back(std::async(std::launch::async, [&data, s] {
      CurriculumRun r;
      r.adaptive = train_loop(curriculum_policy(), data, curriculum_config(1000 + s, WeightingMode::Adaptive));
      r.fixed = train_loop(curriculum_policy(), data, curriculum_config(1000 + s, WeightingMode::Fixed));
      return r;
    }));
  std::vector<CurriculumRun> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

}  // namespace vps::fixtures
