#pragma once

// Multi-UE token economy. Request and acceptance probabilities are not
// parameters here: they emerge from who is idle, who accepts and who holds
// tokens in each slot.
//
// Per slot:
//   1. every UE looks at its state and picks an action from its policy;
//   2. busy UEs holding a token in D2D mode issue one request each;
//   3. the pairing rule matches requesters to accepting idle UEs, each idle
//      UE serving at most one requester;
//   4. each matched pair moves exactly one token from requester to server;
//      unmatched requesters fall back to cellular mode;
//   5. every UE draws its next traffic type independently.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "d2dtoken/model.hpp"
#include "d2dtoken/rng.hpp"
#include "d2dtoken/sim.hpp"
#include "d2dtoken/solver.hpp"

namespace d2dtoken {

enum class PolicyKind { optimal, greedy, custom };

struct UePolicy {
  PolicyKind kind = PolicyKind::optimal;
  std::optional<Policy> table;  // required for PolicyKind::custom
};

// (requester, server) pairs; every index appears at most once.
using Matching = std::vector<std::pair<int, int>>;

// Chooses the pairs given this slot's requesters and accepting idle UEs
// (both ascending UE indices).
using PairingRule = std::function<Matching(const std::vector<int>& requesters, const std::vector<int>& acceptors, Rng&)>;

// Each requester picks one accepting idle UE uniformly at random; an idle UE
// that receives several requests serves one of them, chosen uniformly.
inline Matching uniform_random_pairing(const std::vector<int>& requesters, const std::vector<int>& acceptors, Rng& rng) {
  Matching out;
  if (acceptors.empty()) return out;
  std::vector<std::vector<int>> inbox(acceptors.size());
  for (int r : requesters) inbox[rng.index(acceptors.size())].push_back(r);
  for (std::size_t j = 0; j < acceptors.size(); ++j) {
    if (inbox[j].empty()) continue;
    const int chosen = inbox[j].size() == 1 ? inbox[j][0] : inbox[j][rng.index(inbox[j].size())];
    out.emplace_back(chosen, acceptors[j]);
  }
  return out;
}

struct NetworkConfig {
  int num_ues = 2;
  // One entry for all UEs, or one per UE.
  std::vector<UePolicy> policies{UePolicy{}};
  std::int64_t slots = 100'000;
  std::uint64_t seed = 1;
  std::optional<int> initial_tokens;  // default token_cap / 2
  bool keep_records = false;
  PairingRule pairing = uniform_random_pairing;
  SolverConfig solver;
};

// Emergent environment factors seen by one UE.
struct EmpiricalEnv {
  std::int64_t accept_slots = 0;  // idle slots in which the UE accepted
  std::int64_t accept_hits = 0;   // ... and at least one request was routed to it
  std::int64_t requests = 0;      // requests issued
  std::int64_t served = 0;        // ... that were served

  static double ratio(std::int64_t num, std::int64_t den) {
    return den > 0 ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
  }
  static double binomial_se(double p, std::int64_t n) {
    return n > 0 ? std::sqrt(p * (1.0 - p) / static_cast<double>(n)) : 0.0;
  }
  double p_hat() const { return ratio(accept_hits, accept_slots); }
  double q_hat() const { return ratio(served, requests); }
  double p_se() const { return binomial_se(p_hat(), accept_slots); }
  double q_se() const { return binomial_se(q_hat(), requests); }
};

struct NetworkResult {
  std::vector<Policy> policies;  // as resolved for each UE
  std::vector<SimTrace> traces;
  std::vector<EmpiricalEnv> env;
  std::int64_t initial_total_tokens = 0;
  std::int64_t final_total_tokens = 0;
  std::int64_t conservation_breaks = 0;  // slots whose token total differed from the previous slot
  std::int64_t clipped_transfers = 0;    // transfers to a server already at the cap
};

inline Policy resolve_policy(const MdpModel& m, const UePolicy& up, const SolverConfig& cfg) {
  switch (up.kind) {
    case PolicyKind::optimal: return value_iteration(m, cfg).policy;
    case PolicyKind::greedy: return build_greedy_policy(m, cfg);
    case PolicyKind::custom:
      if (!up.table) throw std::invalid_argument("custom UE policy needs a policy table");
      require_shape(m, *up.table, "custom policy");
      return *up.table;
  }
  throw std::invalid_argument("unknown policy kind");
}

inline std::vector<MdpModel> broadcast_models(const std::vector<MdpModel>& models, int n) {
  if (models.size() == static_cast<std::size_t>(n)) return models;
  if (models.size() == 1) return std::vector<MdpModel>(static_cast<std::size_t>(n), models.front());
  throw std::invalid_argument("network needs one model for all UEs or one per UE");
}

inline NetworkResult run_network_with(const std::vector<MdpModel>& models, const std::vector<Policy>& policies,
                                      const NetworkConfig& cfg) {
  const auto n = static_cast<std::size_t>(cfg.num_ues);
  if (models.size() != n || policies.size() != n) throw std::invalid_argument("network: model/policy count mismatch");
  const int cap = models.front().token_cap;
  for (std::size_t i = 0; i < n; ++i) {
    require_valid(models[i]);
    require_shape(models[i], policies[i], "UE policy");
    if (models[i].token_cap != cap) throw std::invalid_argument("network: all UEs must share the token cap");
  }
  if (cfg.slots < 1) throw std::invalid_argument("network: need at least one slot");

  Rng rng(cfg.seed);
  NetworkResult res;
  res.policies = policies;
  res.env.assign(n, {});
  std::vector<State> state(n);
  std::vector<TraceBuilder> builders;
  builders.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    state[i] = initial_state(models[i], std::nullopt, cfg.initial_tokens, rng);
    builders.emplace_back(models[i], cfg.keep_records, cfg.slots);
    res.initial_total_tokens += state[i].tokens;
  }

  std::vector<Action> action(n);
  std::vector<int> requesters, acceptors;
  std::vector<double> reward(n);
  std::vector<int> delta(n);
  std::vector<SlotEvent> event(n);
  std::int64_t total = res.initial_total_tokens;

  for (std::int64_t t = 0; t < cfg.slots; ++t) {
    requesters.clear();
    acceptors.clear();
    for (std::size_t i = 0; i < n; ++i) {
      action[i] = effective_action(models[i], state[i], policies[i][state[i]]);
      reward[i] = 0.0;
      delta[i] = 0;
      event[i] = SlotEvent::none;
      if (state[i].idle()) {
        if (action[i] == kAccept) {
          acceptors.push_back(static_cast<int>(i));
          ++res.env[i].accept_slots;
        }
      } else if (state[i].tokens > 0 && action[i] == kD2D) {
        requesters.push_back(static_cast<int>(i));
        ++res.env[i].requests;
        event[i] = SlotEvent::request_rejected;
      }
    }

    std::vector<char> hit(n, 0);
    const Matching pairs = cfg.pairing(requesters, acceptors, rng);
    for (const auto& [r, s] : pairs) {
      const auto ri = static_cast<std::size_t>(r);
      const auto si = static_cast<std::size_t>(s);
      if (event[ri] != SlotEvent::request_rejected || hit[si] || !state[si].idle() || action[si] != kAccept) {
        throw std::logic_error("pairing rule produced an invalid match");
      }
      hit[si] = 1;
      ++res.env[ri].served;
      ++res.env[si].accept_hits;
      event[ri] = SlotEvent::request_accepted;
      reward[ri] = models[ri].benefit(state[ri].type);
      delta[ri] = -1;
      event[si] = SlotEvent::request_received;
      reward[si] = -models[si].cost;
      if (state[si].tokens < cap) {
        delta[si] = +1;
      } else {
        ++res.clipped_transfers;
      }
    }

    std::int64_t next_total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      builders[i].add(state[i], action[i], event[i], reward[i], delta[i]);
      state[i] = {sample_categorical(models[i].traffic.stationary_prob, rng.uniform()), state[i].tokens + delta[i]};
      next_total += state[i].tokens;
    }
    if (next_total != total) ++res.conservation_breaks;
    total = next_total;
  }
  res.final_total_tokens = total;
  for (std::size_t i = 0; i < n; ++i) res.traces.push_back(builders[i].finish(state[i]));
  return res;
}

inline NetworkResult run_network(const std::vector<MdpModel>& models_in, const NetworkConfig& cfg) {
  if (cfg.num_ues < 2) throw std::invalid_argument("network needs at least two UEs");
  const auto models = broadcast_models(models_in, cfg.num_ues);
  const auto n = static_cast<std::size_t>(cfg.num_ues);
  if (cfg.policies.size() != 1 && cfg.policies.size() != n) {
    throw std::invalid_argument("network needs one policy assignment for all UEs or one per UE");
  }
  std::vector<Policy> policies;
  policies.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const UePolicy& up = cfg.policies.size() == 1 ? cfg.policies.front() : cfg.policies[i];
    policies.push_back(resolve_policy(models[i], up, cfg.solver));
  }
  return run_network_with(models, policies, cfg);
}

// Re-solving each UE against the p, q it actually experienced.

struct FixedPointRound {
  std::vector<EnvFactors> measured;
  std::vector<std::int64_t> policy_changes;  // states whose action changed after re-solving
  double mean_reward = 0.0;                  // average per-slot reward over all UEs
};

struct FixedPointResult {
  std::vector<FixedPointRound> rounds;
  bool converged = false;  // a round left every policy unchanged
  NetworkResult last;
};

inline EnvFactors clamp_env(EnvFactors e, double margin = 1e-3) {
  e.p_recv = std::clamp(e.p_recv, margin, 1.0 - margin);
  e.q_accept = std::clamp(e.q_accept, margin, 1.0 - margin);
  return e;
}

inline FixedPointResult run_network_fixed_point(const std::vector<MdpModel>& models_in, const NetworkConfig& cfg,
                                                int rounds) {
  if (rounds < 1) throw std::invalid_argument("fixed point needs at least one round");
  auto models = broadcast_models(models_in, cfg.num_ues);
  const auto n = static_cast<std::size_t>(cfg.num_ues);
  std::vector<UePolicy> assign(n);
  for (std::size_t i = 0; i < n; ++i) assign[i] = cfg.policies.size() == 1 ? cfg.policies.front() : cfg.policies.at(i);
  std::vector<Policy> policies;
  for (std::size_t i = 0; i < n; ++i) policies.push_back(resolve_policy(models[i], assign[i], cfg.solver));

  FixedPointResult out;
  for (int r = 0; r < rounds; ++r) {
    NetworkConfig round_cfg = cfg;
    round_cfg.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(r));
    out.last = run_network_with(models, policies, round_cfg);
    FixedPointRound fr;
    double sum = 0.0;
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& e = out.last.env[i];
      sum += out.last.traces[i].average_reward();
      EnvFactors measured = models[i].env;
      if (e.accept_slots > 0) measured.p_recv = e.p_hat();
      if (e.requests > 0) measured.q_accept = e.q_hat();
      measured = clamp_env(measured);
      fr.measured.push_back(measured);
      std::int64_t diff = 0;
      if (assign[i].kind != PolicyKind::custom) {
        models[i].env = measured;
        Policy next = resolve_policy(models[i], assign[i], cfg.solver);
        diff = static_cast<std::int64_t>(next.size() - agreement(next, policies[i]));
        policies[i] = std::move(next);
      }
      changed = changed || diff > 0;
      fr.policy_changes.push_back(diff);
    }
    fr.mean_reward = sum / static_cast<double>(n);
    out.rounds.push_back(std::move(fr));
    if (!changed) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace d2dtoken
