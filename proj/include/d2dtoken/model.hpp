#pragma once

// Problem instance data model and MDP primitives for a single UE that buys
// D2D service with tokens and earns tokens by serving other UEs.
//
// A state is (traffic type, token count). Type 0 is the idle type; types
// 1..N carry traffic with strictly increasing D2D benefit. Next-slot traffic
// types are i.i.d. draws from the stationary distribution, so every
// transition factors into "next type" x "token change".

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace d2dtoken {

// Binary action. Its meaning depends on the state:
//   busy type (s != idle): zero = cellular mode, one = D2D mode
//   idle type:             zero = accept D2D requests, one = refuse
enum class Action : std::uint8_t { zero = 0, one = 1 };

inline constexpr Action kCellular = Action::zero;
inline constexpr Action kD2D = Action::one;
inline constexpr Action kAccept = Action::zero;
inline constexpr Action kRefuse = Action::one;

inline constexpr int as_int(Action a) { return static_cast<int>(a); }
inline constexpr Action action_from_int(int v) { return v ? Action::one : Action::zero; }

struct TrafficType {
  int id = 0;
  std::string label;
};

struct TrafficModel {
  std::vector<TrafficType> types;       // types[i].id == i, types[0] is idle
  std::vector<double> stationary_prob;  // indexed by type id
  std::vector<double> benefit;          // indexed by type id, benefit[0] == 0

  int num_types() const { return static_cast<int>(types.size()); }
  int num_busy_types() const { return num_types() - 1; }
  const std::string& label(int type) const { return types.at(static_cast<std::size_t>(type)).label; }
};

// probs[0] is the idle probability; benefits has one entry per busy type.
inline TrafficModel make_traffic(std::vector<double> probs, const std::vector<double>& benefits,
                                 std::vector<std::string> labels = {}) {
  if (probs.size() != benefits.size() + 1) {
    throw std::invalid_argument("make_traffic: need one probability per type (idle first) and one benefit per busy type");
  }
  TrafficModel tm;
  tm.stationary_prob = std::move(probs);
  tm.benefit.reserve(tm.stationary_prob.size());
  tm.benefit.push_back(0.0);
  tm.benefit.insert(tm.benefit.end(), benefits.begin(), benefits.end());
  for (std::size_t i = 0; i < tm.stationary_prob.size(); ++i) {
    std::string label;
    if (i < labels.size()) {
      label = labels[i];
    } else {
      label = i == 0 ? "idle" : "s" + std::to_string(i);
    }
    tm.types.push_back({static_cast<int>(i), std::move(label)});
  }
  return tm;
}

struct EnvFactors {
  double p_recv = 0.5;    // P(at least one request arrives | accepting)
  double q_accept = 0.5;  // P(own request is served | D2D mode)
};

struct State {
  int type = 0;
  int tokens = 0;

  bool idle() const { return type == 0; }
  friend auto operator<=>(const State&, const State&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const State& s) {
  return os << "(s" << s.type << "," << s.tokens << ")";
}

struct MdpModel {
  TrafficModel traffic;
  EnvFactors env;
  double cost = 1.0;      // c, paid per slot of D2D service provided
  double discount = 0.9;  // beta
  int token_cap = 1;      // K

  int num_types() const { return traffic.num_types(); }
  std::size_t num_states() const {
    return static_cast<std::size_t>(num_types()) * static_cast<std::size_t>(token_cap + 1);
  }
  // Type-major, tokens-minor.
  std::size_t index(const State& s) const {
    return static_cast<std::size_t>(s.type) * static_cast<std::size_t>(token_cap + 1) +
           static_cast<std::size_t>(s.tokens);
  }
  State state_at(std::size_t i) const {
    const auto stride = static_cast<std::size_t>(token_cap + 1);
    return {static_cast<int>(i / stride), static_cast<int>(i % stride)};
  }
  bool contains(const State& s) const {
    return s.type >= 0 && s.type < num_types() && s.tokens >= 0 && s.tokens <= token_cap;
  }
  double prob(int type) const { return traffic.stationary_prob[static_cast<std::size_t>(type)]; }
  double benefit(int type) const { return traffic.benefit[static_cast<std::size_t>(type)]; }
};

// States where the action is fixed regardless of values: no token at a busy
// type forces cellular mode, a full wallet at idle forces refusal.
inline bool is_forced(const MdpModel& m, const State& s) {
  return s.idle() ? s.tokens == m.token_cap : s.tokens == 0;
}

inline Action forced_action(const MdpModel& m, const State& s) {
  (void)m;
  return s.idle() ? kRefuse : kCellular;
}

inline void require_state(const MdpModel& m, const State& s) {
  if (!m.contains(s)) {
    std::ostringstream os;
    os << "state " << s << " outside model (types 0.." << m.num_types() - 1 << ", tokens 0.." << m.token_cap << ")";
    throw std::out_of_range(os.str());
  }
}

inline std::vector<State> enumerate_states(const MdpModel& m) {
  std::vector<State> out;
  out.reserve(m.num_states());
  for (int s = 0; s < m.num_types(); ++s) {
    for (int k = 0; k <= m.token_cap; ++k) {
      out.push_back({s, k});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
  std::string str() const {
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty()) out += "; ";
      out += v;
    }
    return out;
  }
};

class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(ValidationReport report)
      : std::invalid_argument("invalid model: " + report.str()), report_(std::move(report)) {}
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

inline ValidationReport validate(const MdpModel& m) {
  ValidationReport r;
  auto fail = [&r](std::string msg) { r.violations.push_back(std::move(msg)); };
  const auto& tm = m.traffic;
  const auto n = static_cast<std::size_t>(tm.num_types());

  if (n < 2) fail("need the idle type and at least one traffic type");
  if (tm.stationary_prob.size() != n) fail("stationary_prob size does not match type count");
  if (tm.benefit.size() != n) fail("benefit size does not match type count");
  for (std::size_t i = 0; i < tm.types.size(); ++i) {
    if (tm.types[i].id != static_cast<int>(i)) fail("type ids must equal their position");
  }
  if (!r.ok()) return r;

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = tm.stationary_prob[i];
    if (!(p > 0.0 && p < 1.0)) fail("stationary probability of type " + std::to_string(i) + " not in (0,1)");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "stationary probabilities sum to " << total << ", not 1";
    fail(os.str());
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (!(tm.benefit[i] > 0.0)) fail("benefit of type " + std::to_string(i) + " not positive");
    if (i > 1 && !(tm.benefit[i] > tm.benefit[i - 1])) {
      fail("benefits not strictly increasing at type " + std::to_string(i));
    }
  }
  if (!(m.env.p_recv > 0.0 && m.env.p_recv < 1.0)) fail("p (request arrival probability) not in (0,1)");
  if (!(m.env.q_accept > 0.0 && m.env.q_accept < 1.0)) fail("q (request acceptance probability) not in (0,1)");
  if (!(m.discount > 0.0 && m.discount < 1.0)) fail("discount not in (0,1)");
  if (!(m.cost >= 0.0) || !std::isfinite(m.cost)) fail("cost negative or not finite");
  if (m.token_cap < 1) fail("token cap below 1");
  return r;
}

inline void require_valid(const MdpModel& m) {
  auto r = validate(m);
  if (!r.ok()) throw ValidationError(std::move(r));
}

// ---------------------------------------------------------------------------
// Kernel and reward

// Probability of P{(s',k') | (s,k), a}, written case by case.
inline double transition_prob(const MdpModel& m, const State& from, Action action, const State& to) {
  require_state(m, from);
  require_state(m, to);
  const double ps = m.prob(to.type);
  const int k = from.tokens;
  const int k2 = to.tokens;
  if (!from.idle()) {
    const double a_m = as_int(action);
    const double q = m.env.q_accept;
    if (k > 0 && k2 == k) return ps * ((1.0 - a_m) + a_m * (1.0 - q));
    if (k > 0 && k2 == k - 1) return ps * q * a_m;
    if (k == 0 && k2 == k) return ps;
    return 0.0;
  }
  const double a_r = as_int(action);
  const double p = m.env.p_recv;
  if (k < m.token_cap && k2 == k) return ps * (a_r + (1.0 - a_r) * (1.0 - p));
  if (k < m.token_cap && k2 == k + 1) return ps * p * (1.0 - a_r);
  if (k == m.token_cap && k2 == k) return ps;
  return 0.0;
}

// Token dynamics of one slot, independent of the next traffic type:
// the count moves by `delta` with probability `move`, else stays.
struct TokenOutcome {
  double stay = 1.0;
  int delta = 0;
  double move = 0.0;
};

inline TokenOutcome token_outcome(const MdpModel& m, const State& s, Action a) {
  if (!s.idle()) {
    if (s.tokens > 0 && a == kD2D) return {1.0 - m.env.q_accept, -1, m.env.q_accept};
    return {};
  }
  if (s.tokens < m.token_cap && a == kAccept) return {1.0 - m.env.p_recv, +1, m.env.p_recv};
  return {};
}

inline std::vector<std::pair<State, double>> successor_distribution(const MdpModel& m, const State& s, Action a) {
  require_state(m, s);
  const TokenOutcome t = token_outcome(m, s, a);
  std::vector<std::pair<State, double>> out;
  out.reserve(static_cast<std::size_t>(m.num_types()) * 2);
  for (int next = 0; next < m.num_types(); ++next) {
    const double ps = m.prob(next);
    // Keep type-major ordering: lower token count first.
    if (t.move > 0.0 && t.delta < 0) out.push_back({{next, s.tokens + t.delta}, ps * t.move});
    if (t.stay > 0.0) out.push_back({{next, s.tokens}, ps * t.stay});
    if (t.move > 0.0 && t.delta > 0) out.push_back({{next, s.tokens + t.delta}, ps * t.move});
  }
  return out;
}

// Expected one-slot reward.
inline double expected_reward(const MdpModel& m, const State& s, Action a) {
  if (s.idle()) {
    return -m.cost * m.env.p_recv * (1.0 - as_int(a));
  }
  return m.env.q_accept * as_int(a) * m.benefit(s.type) * (s.tokens > 0 ? 1.0 : 0.0);
}

}  // namespace d2dtoken
