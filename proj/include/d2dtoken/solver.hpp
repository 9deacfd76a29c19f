#pragma once

// Value iteration, exact policy evaluation, a brute-force oracle, threshold
// extraction and the structural checks on optimal policies (one-shot
// deviation, diminishing marginal token value, threshold form, threshold
// ordering by benefit).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "d2dtoken/model.hpp"
#include "d2dtoken/tables.hpp"

namespace d2dtoken {

struct SolverConfig {
  double epsilon = 1e-9;
  int max_iterations = 100000;
  // Marginal-value comparisons within this margin count as ties and pick action 0.
  double tie_tolerance = 1e-12;
};

struct SolveResult {
  ValueFunction values;
  Policy policy;
  int iterations = 0;
};

class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(SolveResult last, double residual)
      : std::runtime_error("value iteration did not converge in " + std::to_string(last.iterations) +
                           " iterations (residual " + std::to_string(residual) + ")"),
        last_(std::move(last)),
        residual_(residual) {}
  const SolveResult& last_iterate() const { return last_; }
  double residual() const { return residual_; }

 private:
  SolveResult last_;
  double residual_;
};

// Restriction of the admissible actions per state. Used to build the greedy
// baseline (D2D whenever a token is held) with the same backup machinery.
enum class ActionSet : std::uint8_t { both, only_zero, only_one };
using ActionRestriction = StateTable<ActionSet>;

// W(k) = sum_{s'} p(s') V(s',k): expected value of entering the next slot with k tokens.
inline std::vector<double> expected_next_value(const MdpModel& m, const ValueFunction& v) {
  std::vector<double> w(static_cast<std::size_t>(m.token_cap + 1), 0.0);
  for (int s = 0; s < m.num_types(); ++s) {
    const double ps = m.prob(s);
    for (int k = 0; k <= m.token_cap; ++k) w[static_cast<std::size_t>(k)] += ps * v(s, k);
  }
  return w;
}

// Q-value of (s,k,a) under continuation W.
inline double action_value(const MdpModel& m, const std::vector<double>& w, const State& s, Action a) {
  const TokenOutcome t = token_outcome(m, s, a);
  double cont = t.stay * w[static_cast<std::size_t>(s.tokens)];
  if (t.move > 0.0) cont += t.move * w[static_cast<std::size_t>(s.tokens + t.delta)];
  return expected_reward(m, s, a) + m.discount * cont;
}

namespace detail {

// Decision at a non-forced state: action 0 iff the discounted
// marginal value of the token at stake is at least the immediate stake.
inline Action marginal_decision(const MdpModel& m, const std::vector<double>& w, const State& s, double tol) {
  const auto k = static_cast<std::size_t>(s.tokens);
  if (!s.idle()) {
    const double opportunity = m.discount * (w[k] - w[k - 1]);
    return opportunity >= m.benefit(s.type) - tol ? Action::zero : Action::one;
  }
  const double gain = m.discount * (w[k + 1] - w[k]);
  return gain >= m.cost - tol ? Action::zero : Action::one;
}

inline void backup_into(const MdpModel& m, const ValueFunction& v, const ActionRestriction* restriction,
                        double tol, ValueFunction& out_v, Policy& out_pi) {
  const auto w = expected_next_value(m, v);
  for (int s = 0; s < m.num_types(); ++s) {
    for (int k = 0; k <= m.token_cap; ++k) {
      const State st{s, k};
      Action a;
      if (is_forced(m, st)) {
        a = forced_action(m, st);
      } else {
        const ActionSet allowed = restriction ? (*restriction)[st] : ActionSet::both;
        switch (allowed) {
          case ActionSet::only_zero: a = Action::zero; break;
          case ActionSet::only_one: a = Action::one; break;
          default: a = marginal_decision(m, w, st, tol); break;
        }
      }
      out_pi[st] = a;
      out_v[st] = action_value(m, w, st, a);
    }
  }
}

inline double sup_distance(const ValueFunction& a, const ValueFunction& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.flat(i) - b.flat(i)));
  return d;
}

}  // namespace detail

struct BackupResult {
  ValueFunction values;
  Policy policy;
};

inline BackupResult bellman_backup(const MdpModel& m, const ValueFunction& v, double tie_tolerance = 1e-12) {
  require_shape(m, v, "value function");
  BackupResult r{ValueFunction(m), Policy(m)};
  detail::backup_into(m, v, nullptr, tie_tolerance, r.values, r.policy);
  return r;
}

// Called with (n, V^n) for n = 0, 1, ... including the returned iterate.
using IterateObserver = std::function<void(int, const ValueFunction&)>;

inline SolveResult value_iteration(const MdpModel& m, const SolverConfig& cfg = {},
                                   const ActionRestriction* restriction = nullptr,
                                   const IterateObserver& observer = {}) {
  require_valid(m);
  if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("solver epsilon must be positive");
  if (cfg.max_iterations < 1) throw std::invalid_argument("solver max_iterations must be positive");
  if (restriction) require_shape(m, *restriction, "action restriction");

  ValueFunction cur(m, 0.0);
  ValueFunction next(m, 0.0);
  Policy pi(m, Action::zero);
  if (observer) observer(0, cur);
  double residual = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= cfg.max_iterations; ++n) {
    detail::backup_into(m, cur, restriction, cfg.tie_tolerance, next, pi);
    residual = detail::sup_distance(next, cur);
    std::swap(cur, next);
    if (observer) observer(n, cur);
    if (residual < cfg.epsilon) return {cur, pi, n};
  }
  throw NonConvergenceError({cur, pi, cfg.max_iterations}, residual);
}

inline SolveResult value_iteration(const MdpModel& m, const SolverConfig& cfg, const IterateObserver& observer) {
  return value_iteration(m, cfg, nullptr, observer);
}

// Exact V^pi from the linear system (I - beta P_pi) V = r_pi, assembled from
// the case-by-case kernel so it shares no code path with the backup.
inline ValueFunction evaluate_policy_exact(const MdpModel& m, const Policy& pi) {
  require_shape(m, pi, "policy");
  const auto n = static_cast<Eigen::Index>(m.num_states());
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd r(n);
  const auto states = enumerate_states(m);
  for (const auto& from : states) {
    const auto i = static_cast<Eigen::Index>(m.index(from));
    const Action act = pi[from];
    r(i) = expected_reward(m, from, act);
    for (const auto& to : states) {
      const double p = transition_prob(m, from, act, to);
      if (p != 0.0) a(i, static_cast<Eigen::Index>(m.index(to))) -= m.discount * p;
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) throw std::runtime_error("policy evaluation: singular system");
  Eigen::VectorXd x = lu.solve(r);
  const double residual = (a * x - r).lpNorm<Eigen::Infinity>();
  if (!(residual < 1e-10)) {
    throw std::runtime_error("policy evaluation: residual " + std::to_string(residual) + " above 1e-10");
  }
  ValueFunction v(m);
  for (Eigen::Index i = 0; i < n; ++i) v.flat(static_cast<std::size_t>(i)) = x(i);
  return v;
}

// ---------------------------------------------------------------------------
// Brute-force oracle

struct BruteForceResult {
  ValueFunction values;  // pointwise maximum over all candidates
  Policy policy;         // a candidate attaining the maximum at every state
  std::size_t candidates = 0;
};

inline constexpr int kMaxBruteForceFreeStates = 16;

inline std::vector<State> free_states(const MdpModel& m) {
  std::vector<State> out;
  for (const auto& s : enumerate_states(m)) {
    if (!is_forced(m, s)) out.push_back(s);
  }
  return out;
}

// Enumerates every deterministic stationary policy over `free` (the rest of
// `base` is kept) and evaluates each exactly.
inline BruteForceResult brute_force_over(const MdpModel& m, const Policy& base, const std::vector<State>& free,
                                         double attain_tol = 1e-9) {
  if (free.size() > static_cast<std::size_t>(kMaxBruteForceFreeStates)) {
    throw std::invalid_argument("brute force: " + std::to_string(free.size()) + " free states exceeds limit of " +
                                std::to_string(kMaxBruteForceFreeStates));
  }
  const std::uint32_t count = 1u << free.size();
  std::vector<ValueFunction> values;
  std::vector<Policy> policies;
  values.reserve(count);
  policies.reserve(count);
  ValueFunction best(m, -std::numeric_limits<double>::infinity());
  for (std::uint32_t mask = 0; mask < count; ++mask) {
    Policy pi = base;
    for (std::size_t j = 0; j < free.size(); ++j) pi[free[j]] = action_from_int((mask >> j) & 1u);
    auto v = evaluate_policy_exact(m, pi);
    for (std::size_t i = 0; i < v.size(); ++i) best.flat(i) = std::max(best.flat(i), v.flat(i));
    values.push_back(std::move(v));
    policies.push_back(std::move(pi));
  }
  for (std::uint32_t c = 0; c < count; ++c) {
    bool attains = true;
    for (std::size_t i = 0; i < best.size() && attains; ++i) {
      attains = values[c].flat(i) >= best.flat(i) - attain_tol;
    }
    if (attains) return {best, policies[c], count};
  }
  throw std::logic_error("brute force: no single policy attains the pointwise maximum");
}

inline BruteForceResult brute_force_optimal(const MdpModel& m) {
  require_valid(m);
  Policy base(m, Action::zero);
  for (const auto& s : enumerate_states(m)) {
    if (is_forced(m, s)) base[s] = forced_action(m, s);
  }
  return brute_force_over(m, base, free_states(m));
}

// ---------------------------------------------------------------------------
// Thresholds

// thresholds[s] is the smallest token count with action 1 for type s, or
// token_cap + 1 when the type never takes action 1.
struct ThresholdTable {
  int token_cap = 0;
  std::vector<int> thresholds;

  int at(int type) const { return thresholds.at(static_cast<std::size_t>(type)); }
  int never() const { return token_cap + 1; }
  friend bool operator==(const ThresholdTable&, const ThresholdTable&) = default;
};

class NotThresholdError : public std::runtime_error {
 public:
  NotThresholdError(int type, int tokens)
      : std::runtime_error("policy is not a threshold policy: type " + std::to_string(type) + " returns to action 0 at " +
                           std::to_string(tokens) + " tokens"),
        type_(type),
        tokens_(tokens) {}
  int type() const { return type_; }
  int tokens() const { return tokens_; }

 private:
  int type_;
  int tokens_;
};

inline ThresholdTable extract_thresholds(const MdpModel& m, const Policy& pi) {
  require_shape(m, pi, "policy");
  ThresholdTable t{m.token_cap, std::vector<int>(static_cast<std::size_t>(m.num_types()), m.token_cap + 1)};
  for (int s = 0; s < m.num_types(); ++s) {
    int first = m.token_cap + 1;
    for (int k = 0; k <= m.token_cap; ++k) {
      if (pi(s, k) == Action::one) {
        if (first > m.token_cap) first = k;
      } else if (first <= m.token_cap) {
        throw NotThresholdError(s, k);
      }
    }
    t.thresholds[static_cast<std::size_t>(s)] = first;
  }
  return t;
}

inline Policy to_policy(const MdpModel& m, const ThresholdTable& t) {
  Policy pi(m, Action::zero);
  for (int s = 0; s < m.num_types(); ++s) {
    for (int k = 0; k <= m.token_cap; ++k) pi(s, k) = action_from_int(k >= t.at(s) ? 1 : 0);
  }
  return pi;
}

// Higher-benefit types must not have higher thresholds.
inline bool thresholds_follow_benefit_order(const MdpModel& m, const ThresholdTable& t) {
  for (int s = 2; s < m.num_types(); ++s) {
    if (t.at(s) > t.at(s - 1)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Structural checks

struct DeviationViolation {
  State state;
  Action chosen;
  Action implied;
  double slack;  // marginal token value minus immediate stake
};

struct OneShotReport {
  std::vector<DeviationViolation> violations;
  bool ok() const { return violations.empty(); }
};

// For every non-forced state, the action implied by the one-shot deviation
// comparison under `v` must match the policy. Comparisons within `tol` are
// ties and accept either action. Forced states must carry the forced action.
inline OneShotReport check_one_shot_deviation(const MdpModel& m, const ValueFunction& v, const Policy& pi,
                                              double tol = 1e-9) {
  require_shape(m, v, "value function");
  require_shape(m, pi, "policy");
  OneShotReport rep;
  const auto w = expected_next_value(m, v);
  for (const auto& s : enumerate_states(m)) {
    if (is_forced(m, s)) {
      if (pi[s] != forced_action(m, s)) rep.violations.push_back({s, pi[s], forced_action(m, s), 0.0});
      continue;
    }
    const auto k = static_cast<std::size_t>(s.tokens);
    const double slack = s.idle() ? m.discount * (w[k + 1] - w[k]) - m.cost
                                  : m.discount * (w[k] - w[k - 1]) - m.benefit(s.type);
    if (std::abs(slack) <= tol) continue;
    const Action implied = slack > 0.0 ? Action::zero : Action::one;
    if (pi[s] != implied) rep.violations.push_back({s, pi[s], implied, slack});
  }
  return rep;
}

struct ConcavityViolation {
  int type;
  int tokens;        // the middle point k of (k-1, k, k+1)
  double magnitude;  // (V(k+1)-V(k)) - (V(k)-V(k-1)) > 0
};

struct ConcavityReport {
  double max_violation = 0.0;  // largest positive second difference, 0 if none
  std::vector<ConcavityViolation> violations;
  bool ok() const { return violations.empty(); }
};

inline ConcavityReport check_concavity(const ValueFunction& v, double tol = 1e-9) {
  ConcavityReport rep;
  for (int s = 0; s < v.num_types(); ++s) {
    for (int k = 1; k + 1 <= v.token_cap(); ++k) {
      const double second = (v(s, k + 1) - v(s, k)) - (v(s, k) - v(s, k - 1));
      rep.max_violation = std::max(rep.max_violation, second);
      if (second > tol) rep.violations.push_back({s, k, second});
    }
  }
  return rep;
}

// Largest decrease V(s,k) - V(s,k+1) over the grid; <= 0 means more tokens never hurt.
inline double max_token_decrease(const ValueFunction& v) {
  double worst = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < v.num_types(); ++s) {
    for (int k = 0; k < v.token_cap(); ++k) worst = std::max(worst, v(s, k) - v(s, k + 1));
  }
  return v.token_cap() > 0 ? worst : 0.0;
}

struct StructureReport {
  OneShotReport one_shot;
  ConcavityReport concavity;
  double max_token_decrease = 0.0;
  bool threshold_form = false;
  std::string threshold_error;
  ThresholdTable thresholds;
  bool benefit_order = false;

  bool ok(double tol = 1e-9) const {
    return one_shot.ok() && concavity.ok() && max_token_decrease <= tol && threshold_form && benefit_order;
  }
};

inline StructureReport analyze_structure(const MdpModel& m, const SolveResult& sol, double tol = 1e-9) {
  StructureReport r;
  r.one_shot = check_one_shot_deviation(m, sol.values, sol.policy, tol);
  r.concavity = check_concavity(sol.values, tol);
  r.max_token_decrease = max_token_decrease(sol.values);
  try {
    r.thresholds = extract_thresholds(m, sol.policy);
    r.threshold_form = true;
    r.benefit_order = thresholds_follow_benefit_order(m, r.thresholds);
  } catch (const NotThresholdError& e) {
    r.threshold_error = e.what();
  }
  return r;
}

}  // namespace d2dtoken
