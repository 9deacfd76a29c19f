#pragma once

// Tabular Q-learning for the case where p and q are unknown. The agent only
// sees states, its own actions, realized rewards and next states.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "d2dtoken/model.hpp"
#include "d2dtoken/rng.hpp"
#include "d2dtoken/sim.hpp"
#include "d2dtoken/tables.hpp"

namespace d2dtoken {

class QTable {
 public:
  QTable() = default;
  explicit QTable(const MdpModel& m)
      : q_(m, {0.0, 0.0}), visits_(m, {0, 0}), forced_(m, 0) {
    for (const auto& s : enumerate_states(m)) {
      if (is_forced(m, s)) forced_[s] = static_cast<char>(1 + as_int(forced_action(m, s)));
    }
  }

  int num_types() const { return q_.num_types(); }
  int token_cap() const { return q_.token_cap(); }

  bool allowed(const State& s, Action a) const {
    const char f = forced_[s];
    return f == 0 || f == 1 + as_int(a);
  }
  std::vector<Action> actions(const State& s) const {
    if (forced_[s] != 0) return {action_from_int(forced_[s] - 1)};
    return {Action::zero, Action::one};
  }

  double q(const State& s, Action a) const { return q_[s][static_cast<std::size_t>(as_int(a))]; }
  double& q(const State& s, Action a) { return q_[s][static_cast<std::size_t>(as_int(a))]; }
  std::int64_t visits(const State& s, Action a) const { return visits_[s][static_cast<std::size_t>(as_int(a))]; }
  std::int64_t& visits(const State& s, Action a) { return visits_[s][static_cast<std::size_t>(as_int(a))]; }

  // Ties go to action 0.
  Action greedy(const State& s) const {
    if (forced_[s] != 0) return action_from_int(forced_[s] - 1);
    return q(s, Action::one) > q(s, Action::zero) ? Action::one : Action::zero;
  }
  double value(const State& s) const { return q(s, greedy(s)); }

  Policy greedy_policy() const {
    Policy pi(num_types(), token_cap(), Action::zero);
    for (int s = 0; s < num_types(); ++s) {
      for (int k = 0; k <= token_cap(); ++k) pi(s, k) = greedy({s, k});
    }
    return pi;
  }

  double max_abs() const {
    double mx = 0.0;
    for (const auto& e : q_.data()) mx = std::max({mx, std::abs(e[0]), std::abs(e[1])});
    return mx;
  }

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  StateTable<std::array<double, 2>> q_;
  StateTable<std::array<std::int64_t, 2>> visits_;
  StateTable<char> forced_;  // 0 free, 1 + forced action otherwise
};

struct Transition {
  State state;
  Action action = Action::zero;
  double reward = 0.0;
  State next;
};

// Q(s,a) += rate * (r + discount * max_a' Q(s',a') - Q(s,a)).
inline void apply_q_update(QTable& qt, const Transition& tr, double rate, double discount) {
  if (!qt.allowed(tr.state, tr.action)) throw std::invalid_argument("q update on a disallowed action");
  const double target = tr.reward + discount * qt.value(tr.next);
  double& entry = qt.q(tr.state, tr.action);
  entry += rate * (target - entry);
  ++qt.visits(tr.state, tr.action);
}

inline QTable q_update(QTable qt, const Transition& tr, double rate, double discount) {
  apply_q_update(qt, tr, rate, discount);
  return qt;
}

struct LearningConfig {
  double initial_rate = 1.0;
  double rate_decay = 0.01;  // rate = initial_rate / (1 + visits * rate_decay)
  double explore_start = 1.0;
  double explore_end = 0.05;
  double explore_decay_fraction = 0.5;  // share of the budget over which exploration decays linearly
  std::int64_t slots = 1'000'000;
  std::uint64_t seed = 1;
  std::optional<int> initial_tokens;
  std::int64_t log_every = 10'000;
};

inline void validate_learning_config(const LearningConfig& c) {
  auto in_unit = [](double x) { return x > 0.0 && x <= 1.0; };
  if (!in_unit(c.initial_rate)) throw std::invalid_argument("learning rate must be in (0,1]");
  if (c.rate_decay < 0.0) throw std::invalid_argument("rate decay must be non-negative");
  if (c.explore_start < 0.0 || c.explore_start > 1.0 || c.explore_end < 0.0 || c.explore_end > 1.0) {
    throw std::invalid_argument("exploration rates must be in [0,1]");
  }
  if (c.explore_decay_fraction < 0.0 || c.explore_decay_fraction > 1.0) {
    throw std::invalid_argument("exploration decay fraction must be in [0,1]");
  }
  if (c.slots < 1) throw std::invalid_argument("learning budget must be at least one slot");
  if (c.log_every < 1) throw std::invalid_argument("log interval must be positive");
}

inline double exploration_rate(const LearningConfig& c, std::int64_t slot) {
  const double horizon = c.explore_decay_fraction * static_cast<double>(c.slots);
  const double frac = horizon > 0.0 ? std::min(1.0, static_cast<double>(slot) / horizon) : 1.0;
  return c.explore_start + (c.explore_end - c.explore_start) * frac;
}

// The interaction surface seen by the learner: it samples the same kernel as
// the simulator but exposes neither p nor q.
class SampledEnvironment {
 public:
  SampledEnvironment(MdpModel model, std::uint64_t seed) : model_(std::move(model)), rng_(seed) {}

  State reset(std::optional<int> tokens) {
    state_ = initial_state(model_, std::nullopt, tokens, rng_);
    return state_;
  }
  StepOutcome step(Action a) {
    StepOutcome o = step_action(model_, state_, a, rng_);
    state_ = o.next;
    return o;
  }
  State state() const { return state_; }

 private:
  MdpModel model_;
  Rng rng_;
  State state_;
};

struct CurvePoint {
  std::int64_t slot = 0;
  double discounted_reward = 0.0;  // cumulative, discounted from slot 0
  double window_average = 0.0;     // mean per-slot reward since the previous point
};

struct TrainResult {
  QTable qtable;
  Policy policy;
  std::vector<CurvePoint> curve;
};

inline TrainResult train(const MdpModel& model, const LearningConfig& cfg) {
  require_valid(model);
  validate_learning_config(cfg);
  SampledEnvironment env(model, derive_seed(cfg.seed, 0));
  Rng agent_rng(derive_seed(cfg.seed, 1));
  const double discount = model.discount;

  TrainResult out{QTable(model), {}, {}};
  QTable& qt = out.qtable;
  State s = env.reset(cfg.initial_tokens);
  double cumulative = 0.0;
  double weight = 1.0;
  double window_sum = 0.0;
  std::int64_t window_start = 0;
  for (std::int64_t t = 0; t < cfg.slots; ++t) {
    const auto choices = qt.actions(s);
    Action a;
    const double eps = exploration_rate(cfg, t);
    if (choices.size() > 1 && agent_rng.uniform() < eps) {
      a = choices[agent_rng.index(choices.size())];
    } else {
      a = qt.greedy(s);
    }
    const StepOutcome o = env.step(a);
    const double rate = cfg.initial_rate / (1.0 + static_cast<double>(qt.visits(s, a)) * cfg.rate_decay);
    apply_q_update(qt, {s, a, o.reward, o.next}, rate, discount);
    cumulative += weight * o.reward;
    weight *= discount;
    window_sum += o.reward;
    if ((t + 1) % cfg.log_every == 0 || t + 1 == cfg.slots) {
      out.curve.push_back({t + 1, cumulative, window_sum / static_cast<double>(t + 1 - window_start)});
      window_sum = 0.0;
      window_start = t + 1;
    }
    s = o.next;
  }
  out.policy = qt.greedy_policy();
  return out;
}

}  // namespace d2dtoken
