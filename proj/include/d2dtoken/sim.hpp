#pragma once

// Monte-Carlo simulation of a single UE against the parametric (p, q)
// environment, plus the greedy baseline policy.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "d2dtoken/model.hpp"
#include "d2dtoken/rng.hpp"
#include "d2dtoken/solver.hpp"
#include "d2dtoken/tables.hpp"

namespace d2dtoken {

// What happened in a slot. Choosing cellular mode and having a D2D request
// rejected lead to the same token transition but are logged apart.
enum class SlotEvent : std::uint8_t {
  none,              // cellular mode, refusal, or accepting with no request arriving
  request_received,  // idle and accepting: served another UE, earned a token
  request_accepted,  // D2D mode: own request served, spent a token
  request_rejected,  // D2D mode: own request not served, fell back to cellular
};

inline const char* event_name(SlotEvent e) {
  switch (e) {
    case SlotEvent::none: return "none";
    case SlotEvent::request_received: return "request-received";
    case SlotEvent::request_accepted: return "request-accepted";
    case SlotEvent::request_rejected: return "request-rejected";
  }
  return "?";
}

struct StepOutcome {
  State next;
  Action action = Action::zero;
  double reward = 0.0;
  SlotEvent event = SlotEvent::none;
  int token_delta = 0;
};

// The action actually executed: forced states override the policy.
inline Action effective_action(const MdpModel& m, const State& s, Action requested) {
  return is_forced(m, s) ? forced_action(m, s) : requested;
}

// One slot given the action. Exactly two uniforms are consumed per slot
// (environment outcome, next traffic type) whatever the action, so runs of
// different policies on one seed share their random numbers.
inline StepOutcome step_action(const MdpModel& m, const State& s, Action requested, Rng& rng) {
  const double u_env = rng.uniform();
  const double u_type = rng.uniform();
  StepOutcome out;
  out.action = effective_action(m, s, requested);
  if (!s.idle()) {
    if (s.tokens > 0 && out.action == kD2D) {
      if (u_env < m.env.q_accept) {
        out.event = SlotEvent::request_accepted;
        out.reward = m.benefit(s.type);
        out.token_delta = -1;
      } else {
        out.event = SlotEvent::request_rejected;
      }
    }
  } else if (out.action == kAccept && u_env < m.env.p_recv) {
    out.event = SlotEvent::request_received;
    out.reward = -m.cost;
    out.token_delta = +1;
  }
  out.next = {sample_categorical(m.traffic.stationary_prob, u_type), s.tokens + out.token_delta};
  return out;
}

inline StepOutcome step_single(const MdpModel& m, const State& s, const Policy& pi, Rng& rng) {
  require_state(m, s);
  return step_action(m, s, pi[s], rng);
}

struct SimConfig {
  std::int64_t slots = 1'000'000;
  std::uint64_t seed = 1;
  std::optional<int> initial_tokens;  // default token_cap / 2
  std::optional<int> initial_type;    // default: drawn from the stationary distribution
  bool keep_records = false;
};

struct SlotRecord {
  std::int64_t slot = 0;
  State state;
  Action action = Action::zero;
  SlotEvent event = SlotEvent::none;
  double reward = 0.0;
  int token_delta = 0;
};

struct SimTrace {
  std::vector<SlotRecord> records;  // empty unless requested
  std::int64_t slots = 0;
  double total_reward = 0.0;
  double discounted_reward = 0.0;
  std::vector<std::int64_t> spend_by_type;  // successful D2D transmissions per type
  std::int64_t earn_count = 0;
  std::int64_t rejected_count = 0;
  State final_state;

  double average_reward() const { return slots > 0 ? total_reward / static_cast<double>(slots) : 0.0; }
  std::int64_t spend_count() const {
    std::int64_t n = 0;
    for (auto c : spend_by_type) n += c;
    return n;
  }
};

// Accumulates a trace slot by slot; shared by the single-UE and network runs.
class TraceBuilder {
 public:
  TraceBuilder(const MdpModel& m, bool keep_records, std::int64_t expected_slots = 0)
      : discount_(m.discount), keep_(keep_records) {
    trace_.spend_by_type.assign(static_cast<std::size_t>(m.num_types()), 0);
    if (keep_ && expected_slots > 0) trace_.records.reserve(static_cast<std::size_t>(expected_slots));
  }

  void add(const State& s, Action a, SlotEvent e, double reward, int delta) {
    if (keep_) trace_.records.push_back({trace_.slots, s, a, e, reward, delta});
    trace_.total_reward += reward;
    trace_.discounted_reward += weight_ * reward;
    weight_ *= discount_;
    if (e == SlotEvent::request_accepted) ++trace_.spend_by_type[static_cast<std::size_t>(s.type)];
    if (e == SlotEvent::request_received) ++trace_.earn_count;
    if (e == SlotEvent::request_rejected) ++trace_.rejected_count;
    ++trace_.slots;
  }

  SimTrace finish(const State& final_state) {
    trace_.final_state = final_state;
    return std::move(trace_);
  }

 private:
  SimTrace trace_;
  double discount_;
  double weight_ = 1.0;
  bool keep_;
};

inline State initial_state(const MdpModel& m, std::optional<int> type, std::optional<int> tokens, Rng& rng) {
  State s{0, tokens.value_or(m.token_cap / 2)};
  s.type = type ? *type : sample_categorical(m.traffic.stationary_prob, rng.uniform());
  require_state(m, s);
  return s;
}

inline SimTrace run_single(const MdpModel& m, const Policy& pi, const SimConfig& cfg) {
  require_shape(m, pi, "policy");
  if (cfg.slots < 1) throw std::invalid_argument("simulation needs at least one slot");
  Rng rng(cfg.seed);
  State s = initial_state(m, cfg.initial_type, cfg.initial_tokens, rng);
  TraceBuilder tb(m, cfg.keep_records, cfg.slots);
  for (std::int64_t t = 0; t < cfg.slots; ++t) {
    const StepOutcome o = step_single(m, s, pi, rng);
    tb.add(s, o.action, o.event, o.reward, o.token_delta);
    s = o.next;
  }
  return tb.finish(s);
}

// D2D whenever a token is held; the idle acceptance rule is optimized by
// value iteration restricted to that spending rule.
inline Policy build_greedy_policy(const MdpModel& m, const SolverConfig& cfg = {}) {
  ActionRestriction restriction(m, ActionSet::both);
  for (int s = 1; s < m.num_types(); ++s) {
    for (int k = 1; k <= m.token_cap; ++k) restriction(s, k) = ActionSet::only_one;
  }
  return value_iteration(m, cfg, &restriction).policy;
}

}  // namespace d2dtoken
