#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <tuple>

#include "d2dtoken/compare.hpp"
#include "d2dtoken/sim.hpp"
#include "d2dtoken/solver.hpp"
#include "support.hpp"

using namespace d2dtoken;
using Catch::Approx;

TEST_CASE("step_single: no token means cellular and no movement", "[sim]") {
  const auto m = testing::five_type_model();
  Policy always_d2d(m, Action::one);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto o = step_single(m, {1, 0}, always_d2d, rng);
    CHECK(o.next.tokens == 0);
    CHECK(o.reward == 0.0);
    CHECK(o.action == kCellular);
    CHECK(o.event == SlotEvent::none);
  }
}

TEST_CASE("step_single: full wallet forces refusal", "[sim]") {
  const auto m = testing::five_type_model();
  Policy always_accept(m, Action::zero);
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const auto o = step_single(m, {0, m.token_cap}, always_accept, rng);
    CHECK(o.action == kRefuse);
    CHECK(o.next.tokens == m.token_cap);
    CHECK(o.reward == 0.0);
  }
}

TEST_CASE("sampled transitions match the kernel", "[sim][statistical]") {
  const auto m = testing::five_type_model();
  const int draws = 250'000;
  Rng rng(3);
  const std::vector<std::pair<State, Action>> cases{
      {{1, 5}, kD2D}, {{3, 5}, kCellular}, {{0, 2}, kAccept}, {{0, 2}, kRefuse}};
  for (const auto& [from, a] : cases) {
    std::map<State, int> counts;
    for (int i = 0; i < draws; ++i) ++counts[step_action(m, from, a, rng).next];
    for (const auto& to : enumerate_states(m)) {
      const double p = transition_prob(m, from, a, to);
      const double freq = static_cast<double>(counts[to]) / draws;
      if (p == 0.0) {
        CHECK(counts[to] == 0);
        continue;
      }
      const double se = std::sqrt(p * (1.0 - p) / draws);
      INFO("from " << from << " a " << as_int(a) << " to " << to);
      CHECK(std::abs(freq - p) <= 3.0 * se);
    }
  }
}

TEST_CASE("trace invariants and exact aggregates", "[sim]") {
  const auto m = testing::five_type_model();
  const auto pi = value_iteration(m).policy;
  SimConfig cfg;
  cfg.slots = 200'000;
  cfg.seed = 9;
  cfg.keep_records = true;
  const auto tr = run_single(m, pi, cfg);
  REQUIRE(tr.records.size() == 200'000);

  double total = 0.0, discounted = 0.0, w = 1.0;
  std::vector<std::int64_t> spends(static_cast<std::size_t>(m.num_types()), 0);
  std::int64_t earns = 0;
  for (std::size_t i = 0; i < tr.records.size(); ++i) {
    const auto& r = tr.records[i];
    CHECK(r.slot == static_cast<std::int64_t>(i));
    CHECK(r.state.tokens >= 0);
    CHECK(r.state.tokens <= m.token_cap);
    CHECK(std::abs(r.token_delta) <= 1);
    if (r.token_delta == -1) {
      CHECK(r.event == SlotEvent::request_accepted);
      CHECK(r.state.tokens > 0);
      CHECK(r.action == kD2D);
      CHECK_FALSE(r.state.idle());
      ++spends[static_cast<std::size_t>(r.state.type)];
    }
    if (r.token_delta == +1) {
      CHECK(r.state.idle());
      CHECK(r.state.tokens < m.token_cap);
      CHECK(r.action == kAccept);
      ++earns;
    }
    if (i + 1 < tr.records.size()) CHECK(tr.records[i + 1].state.tokens == r.state.tokens + r.token_delta);
    total += r.reward;
    discounted += w * r.reward;
    w *= m.discount;
  }
  CHECK(tr.total_reward == total);
  CHECK(tr.discounted_reward == discounted);
  CHECK(tr.spend_by_type == spends);
  CHECK(tr.earn_count == earns);
}

TEST_CASE("realized rewards average to the expected reward per (type, action)", "[sim][statistical]") {
  const auto m = testing::five_type_model();
  Policy pi(m, Action::zero);
  // Mixed policy so every branch is visited often.
  for (const auto& s : enumerate_states(m)) pi[s] = action_from_int((s.type + s.tokens) % 2);
  pi(0, m.token_cap) = kRefuse;
  SimConfig cfg;
  cfg.slots = 1'000'000;
  cfg.seed = 21;
  cfg.keep_records = true;
  const auto tr = run_single(m, pi, cfg);

  struct Acc {
    double expected = 0.0;
    double sum = 0.0, sum2 = 0.0;
    std::int64_t n = 0;
  };
  std::map<std::tuple<int, int, bool>, Acc> groups;  // (type, action, has tokens/room)
  for (const auto& r : tr.records) {
    const bool live = r.state.idle() ? r.state.tokens < m.token_cap : r.state.tokens > 0;
    auto& g = groups[{r.state.type, as_int(r.action), live}];
    g.expected = expected_reward(m, r.state, r.action);
    g.sum += r.reward;
    g.sum2 += r.reward * r.reward;
    ++g.n;
  }
  for (const auto& [key, g] : groups) {
    const double mean = g.sum / static_cast<double>(g.n);
    const double var = std::max(0.0, g.sum2 / static_cast<double>(g.n) - mean * mean);
    const double se = std::sqrt(var / static_cast<double>(g.n));
    INFO("type " << std::get<0>(key) << " action " << std::get<1>(key) << " n " << g.n);
    CHECK(std::abs(mean - g.expected) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("run_single is seed-deterministic", "[sim]") {
  const auto m = testing::realistic_model();
  const auto pi = value_iteration(m).policy;
  SimConfig cfg;
  cfg.slots = 50'000;
  cfg.seed = 77;
  cfg.keep_records = true;
  const auto a = run_single(m, pi, cfg);
  const auto b = run_single(m, pi, cfg);
  CHECK(a.total_reward == b.total_reward);
  CHECK(a.spend_by_type == b.spend_by_type);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].state == b.records[i].state);
    CHECK(a.records[i].reward == b.records[i].reward);
  }
  cfg.seed = 78;
  CHECK(run_single(m, pi, cfg).total_reward != a.total_reward);
}

TEST_CASE("never acting earns nothing and moves no tokens", "[sim]") {
  const auto m = testing::five_type_model();
  Policy pi(m, kCellular);
  for (int k = 0; k <= m.token_cap; ++k) pi(0, k) = kRefuse;
  SimConfig cfg;
  cfg.slots = 100'000;
  const auto tr = run_single(m, pi, cfg);
  CHECK(tr.total_reward == 0.0);
  CHECK(tr.spend_count() == 0);
  CHECK(tr.earn_count == 0);
  CHECK(tr.final_state.tokens == m.token_cap / 2);
}

TEST_CASE("greedy policy spends whenever it can", "[sim][greedy]") {
  for (const auto& m : {testing::five_type_model(), testing::realistic_model()}) {
    const auto g = build_greedy_policy(m);
    for (int s = 1; s < m.num_types(); ++s) {
      for (int k = 1; k <= m.token_cap; ++k) CHECK(g(s, k) == kD2D);
    }
    CHECK(respects_forced(m, g));
  }
}

TEST_CASE("greedy idle rule matches brute force over idle assignments", "[sim][greedy][oracle]") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    auto m = testing::random_instance(rng, {.max_types = 3, .max_cap = 6});
    Policy base(m, Action::zero);
    for (int s = 1; s < m.num_types(); ++s) {
      for (int k = 1; k <= m.token_cap; ++k) base(s, k) = kD2D;
    }
    base(0, m.token_cap) = kRefuse;
    std::vector<State> idle;
    for (int k = 0; k < m.token_cap; ++k) idle.push_back({0, k});
    const auto bf = brute_force_over(m, base, idle);
    CHECK(bf.candidates == (1u << m.token_cap));

    const auto greedy = build_greedy_policy(m, {.epsilon = 1e-12});
    const auto v = evaluate_policy_exact(m, greedy);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(v.flat(i) - bf.values.flat(i)) < 1e-8);
  }
}

TEST_CASE("greedy spends in proportion to traffic; optimal favours video", "[sim][greedy][statistical]") {
  const auto m = testing::realistic_model();
  SimConfig cfg;
  cfg.slots = 1'000'000;
  cfg.seed = 5;
  const auto greedy = run_single(m, build_greedy_policy(m), cfg);
  const auto optimal = run_single(m, value_iteration(m).policy, cfg);

  const double busy = m.prob(1) + m.prob(2);
  const double spent = static_cast<double>(greedy.spend_count());
  for (int s = 1; s <= 2; ++s) {
    const double share = static_cast<double>(greedy.spend_by_type[static_cast<std::size_t>(s)]) / spent;
    const double target = m.prob(s) / busy;
    CHECK(std::abs(share - target) / target <= 0.02);
  }
  const double video_opt = static_cast<double>(optimal.spend_by_type[2]) / static_cast<double>(optimal.spend_count());
  CHECK(video_opt > static_cast<double>(greedy.spend_by_type[2]) / spent);
  CHECK(optimal.average_reward() >= greedy.average_reward());
}

TEST_CASE("discounted returns converge to the exact policy value", "[sim][statistical]") {
  auto m = testing::five_type_model();
  m.discount = 0.9;
  const auto sol = value_iteration(m);
  const auto exact = evaluate_policy_exact(m, sol.policy);
  const State start{2, 4};
  std::vector<double> returns;
  for (int i = 0; i < 100; ++i) {
    SimConfig cfg;
    cfg.slots = 400;  // 0.9^400 is negligible
    cfg.seed = derive_seed(1234, static_cast<std::uint64_t>(i));
    cfg.initial_type = start.type;
    cfg.initial_tokens = start.tokens;
    returns.push_back(run_single(m, sol.policy, cfg).discounted_reward);
  }
  const auto st = summarize(returns);
  CHECK(std::abs(st.mean - exact[start]) <= 3.0 * st.se());
}

TEST_CASE("common random numbers: identical policies give identical runs", "[sim]") {
  const auto m = testing::realistic_model(0.3);
  CompareConfig cc;
  cc.betas = {0.3};
  cc.seeds = 3;
  cc.slots = 20'000;
  const auto pts = run_compare(m, cc, false);
  REQUIRE(pts.size() == 1);
  CHECK(pts[0].optimal.policy == pts[0].greedy.policy);
  CHECK(pts[0].gap.mean == 0.0);
  CHECK(pts[0].optimal.average_reward == pts[0].greedy.average_reward);
}
