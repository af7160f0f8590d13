#pragma once

// Adaptive subtask weighting: EMA performance tracking, headroom softmax with
// an optional adaptive temperature, and a waterfilled weight floor.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace vps {

enum class TemperatureMode { Fixed, Adaptive };

inline std::string to_string(TemperatureMode m) { return m == TemperatureMode::Fixed ? "fixed" : "adaptive"; }

inline TemperatureMode parse_temperature_mode(const std::string& s) {
  if (s == "fixed") return TemperatureMode::Fixed;
  if (s == "adaptive") return TemperatureMode::Adaptive;
  throw std::invalid_argument("unknown temperature mode '" + s + "'");
}

struct SchedulerParams {
  double alpha = 0.001;
  double base_temperature = 1.0;
  double w_min = 0.05;
  TemperatureMode mode = TemperatureMode::Fixed;
};

struct WeightState {
  std::vector<double> mu;
  std::vector<double> headroom;
  std::vector<double> w;
  long step = 0;
  SchedulerParams params;

  std::size_t size() const { return w.size(); }
};

inline double population_stddev(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

inline double adaptive_temperature(double base, const std::vector<double>& headroom) {
  if (!(base > 0.0)) throw std::invalid_argument("temperature must be positive");
  return base / (1.0 + population_stddev(headroom));
}

inline std::vector<double> softmax(const std::vector<double>& x, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (x.empty()) return {};
  const double top = *std::max_element(x.begin(), x.end());
  std::vector<double> out(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += out[i] = std::exp((x[i] - top) / temperature);
  for (double& v : out) v /= sum;
  return out;
}

/// Raises every weight to at least `floor` while keeping the simplex: pinned
/// entries sit exactly at the floor and the rest share the remaining mass in
/// proportion to their original values.
inline std::vector<double> apply_floor(const std::vector<double>& w, double floor) {
  const std::size_t k = w.size();
  if (floor <= 0.0 || k == 0) return w;
  if (floor * static_cast<double>(k) > 1.0 + 1e-12) throw std::invalid_argument("weight floor is infeasible");
  std::vector<bool> pinned(k, false);
  std::vector<double> out(k);
  for (;;) {
    std::size_t npinned = 0;
    double free_raw = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (pinned[i]) ++npinned;
      else free_raw += w[i];
    }
    const double free_mass = 1.0 - floor * static_cast<double>(npinned);
    bool changed = false;
    for (std::size_t i = 0; i < k; ++i) {
      if (pinned[i]) {
        out[i] = floor;
        continue;
      }
      out[i] = free_raw > 0.0 ? w[i] / free_raw * free_mass : free_mass / static_cast<double>(k - npinned);
      if (out[i] < floor) {
        pinned[i] = true;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return out;
}

inline std::vector<double> weights_from_headroom(const std::vector<double>& headroom, const SchedulerParams& p) {
  const double t = p.mode == TemperatureMode::Adaptive ? adaptive_temperature(p.base_temperature, headroom)
                                                       : p.base_temperature;
  return apply_floor(softmax(headroom, t), p.w_min);
}

inline void validate(const SchedulerParams& p, std::size_t k) {
  if (k < 1) throw std::invalid_argument("scheduler needs at least one subtask");
  if (!(p.alpha > 0.0 && p.alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (!(p.base_temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (!(p.w_min >= 0.0)) throw std::invalid_argument("weight floor must be non-negative");
  if (p.w_min * static_cast<double>(k) > 1.0 + 1e-12)
    throw std::invalid_argument("weight floor exceeds 1/K (infeasible)");
}

inline WeightState init_weights(std::size_t k, SchedulerParams p = {}, double mu0 = 0.5) {
  validate(p, k);
  if (!(mu0 >= 0.0 && mu0 <= 1.0)) throw std::invalid_argument("initial EMA must lie in [0, 1]");
  WeightState s;
  s.params = p;
  s.mu.assign(k, mu0);
  s.headroom.assign(k, 1.0 - mu0);
  s.w = weights_from_headroom(s.headroom, p);
  return s;
}

/// One scheduler step. Subtasks without a batch mean (nullopt) keep their EMA.
inline WeightState update_weights(const WeightState& state, const std::vector<std::optional<double>>& batch_means) {
  if (batch_means.size() != state.size()) throw std::invalid_argument("batch mean count does not match subtask count");
  WeightState s = state;
  const double a = s.params.alpha;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!batch_means[i]) continue;
    const double r = *batch_means[i];
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("batch mean outside [0, 1]");
    s.mu[i] = (1.0 - a) * s.mu[i] + a * r;
    s.headroom[i] = 1.0 - s.mu[i];
  }
  s.w = weights_from_headroom(s.headroom, s.params);
  ++s.step;
  return s;
}

inline WeightState update_weights(const WeightState& state, const std::vector<double>& batch_means) {
  return update_weights(state, std::vector<std::optional<double>>(batch_means.begin(), batch_means.end()));
}

/// Current weights restricted to `applicable` and renormalized; zero elsewhere.
inline std::vector<double> effective_weights(const std::vector<double>& w, const std::vector<bool>& applicable) {
  if (applicable.size() != w.size()) throw std::invalid_argument("mask size does not match weight count");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (applicable[i]) {
      sum += w[i];
      ++count;
    }
  if (count == 0) throw std::invalid_argument("no applicable subtasks");
  std::vector<double> out(w.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!applicable[i]) continue;
    out[i] = sum > 0.0 ? w[i] / sum : 1.0 / static_cast<double>(count);
  }
  return out;
}

inline nlohmann::ordered_json to_json(const WeightState& s) {
  nlohmann::ordered_json j;
  j["step"] = s.step;
  j["mu"] = s.mu;
  j["w"] = s.w;
  j["params"] = {{"alpha", s.params.alpha},
                 {"base_temperature", s.params.base_temperature},
                 {"w_min", s.params.w_min},
                 {"mode", to_string(s.params.mode)}};
  return j;
}

inline WeightState weight_state_from_json(const nlohmann::json& j) {
  WeightState s;
  const auto& p = j.at("params");
  s.params.alpha = p.at("alpha").get<double>();
  s.params.base_temperature = p.at("base_temperature").get<double>();
  s.params.w_min = p.at("w_min").get<double>();
  s.params.mode = parse_temperature_mode(p.value("mode", std::string("fixed")));
  s.mu = j.at("mu").get<std::vector<double>>();
  validate(s.params, s.mu.size());
  s.headroom.resize(s.mu.size());
  for (std::size_t i = 0; i < s.mu.size(); ++i) s.headroom[i] = 1.0 - s.mu[i];
  s.w = j.contains("w") ? j.at("w").get<std::vector<double>>() : weights_from_headroom(s.headroom, s.params);
  if (s.w.size() != s.mu.size()) throw std::invalid_argument("snapshot weight and EMA sizes differ");
  s.step = j.value("step", 0L);
  return s;
}

/// Trajectory rows: step, mu_1..K, w_1..K and optionally the batch means.
inline void write_trajectory_header(std::ostream& out, const std::vector<std::string>& names, bool with_means) {
  out << "step";
  for (const auto& n : names) out << ",mu_" << n;
  for (const auto& n : names) out << ",w_" << n;
  if (with_means)
    for (const auto& n : names) out << ",r_" << n;
  out << '\n';
}

inline void write_trajectory_row(std::ostream& out, const WeightState& s,
                                 const std::vector<std::optional<double>>* means = nullptr) {
  char buf[32];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    out << ',' << buf;
  };
  out << s.step;
  for (double v : s.mu) num(v);
  for (double v : s.w) num(v);
  if (means)
    for (const auto& m : *means) {
      if (m) num(*m);
      else out << ',';
    }
  out << '\n';
}

}  // namespace vps
