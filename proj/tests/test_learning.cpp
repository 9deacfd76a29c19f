#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "d2dtoken/learning.hpp"
#include "d2dtoken/solver.hpp"
#include "support.hpp"

using namespace d2dtoken;
using Catch::Approx;

TEST_CASE("q_update arithmetic", "[learning]") {
  const auto m = testing::tiny_model(0.5);
  QTable qt(m);
  qt.q({0, 0}, kAccept) = 2.0;
  qt.q({0, 0}, kRefuse) = 4.0;
  const Transition tr{{1, 1}, kD2D, 1.0, {0, 0}};

  // rate 1 replaces the entry with the target r + beta * max Q(s').
  const auto full = q_update(qt, tr, 1.0, 0.5);
  CHECK(full.q({1, 1}, kD2D) == Approx(3.0));
  CHECK(full.visits({1, 1}, kD2D) == 1);
  CHECK(full.q({1, 1}, kCellular) == 0.0);

  const auto half = q_update(qt, tr, 0.5, 0.5);
  CHECK(half.q({1, 1}, kD2D) == Approx(1.5));

  const auto none = q_update(qt, tr, 0.0, 0.5);
  CHECK(none.q({1, 1}, kD2D) == qt.q({1, 1}, kD2D));
}

TEST_CASE("updates on forced-away actions are refused", "[learning]") {
  const auto m = testing::tiny_model();
  QTable qt(m);
  CHECK_FALSE(qt.allowed({1, 0}, kD2D));
  CHECK(qt.allowed({1, 0}, kCellular));
  CHECK_FALSE(qt.allowed({0, 1}, kAccept));
  CHECK(qt.actions({0, 1}).size() == 1);
  CHECK_THROWS_AS(apply_q_update(qt, {{1, 0}, kD2D, 0.0, {0, 0}}, 1.0, 0.5), std::invalid_argument);
  CHECK(qt.greedy({0, 1}) == kRefuse);
}

TEST_CASE("greedy action breaks ties toward action 0", "[learning]") {
  const auto m = testing::tiny_model();
  QTable qt(m);
  CHECK(qt.greedy({1, 1}) == Action::zero);
  qt.q({1, 1}, kD2D) = 1e-9;
  CHECK(qt.greedy({1, 1}) == kD2D);
}

TEST_CASE("Q-learning converges on the two-free-state instance", "[learning][statistical]") {
  const auto m = testing::tiny_model(0.5);
  LearningConfig cfg;
  cfg.slots = 2'000'000;
  cfg.seed = 17;
  const auto res = train(m, cfg);
  const auto w = expected_next_value(m, value_iteration(m, {.epsilon = 1e-12}).values);
  for (const auto& s : enumerate_states(m)) {
    for (Action a : res.qtable.actions(s)) {
      const double target = action_value(m, w, s, a);
      INFO("state " << s << " action " << as_int(a));
      CHECK(std::abs(res.qtable.q(s, a) - target) <= 0.05);
    }
  }
  CHECK(res.policy == value_iteration(m).policy);
}

TEST_CASE("training is seed-deterministic", "[learning]") {
  const auto m = testing::five_type_model();
  LearningConfig cfg;
  cfg.slots = 50'000;
  cfg.seed = 5;
  const auto a = train(m, cfg);
  const auto b = train(m, cfg);
  CHECK(a.qtable == b.qtable);
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) CHECK(a.curve[i].discounted_reward == b.curve[i].discounted_reward);
  cfg.seed = 6;
  CHECK_FALSE(train(m, cfg).qtable == a.qtable);
}

TEST_CASE("training curve is logged at the configured interval", "[learning]") {
  const auto m = testing::tiny_model();
  LearningConfig cfg;
  cfg.slots = 25'000;
  cfg.log_every = 10'000;
  const auto res = train(m, cfg);
  REQUIRE(res.curve.size() == 3);
  CHECK(res.curve[0].slot == 10'000);
  CHECK(res.curve[2].slot == 25'000);
}

TEST_CASE("Q-values stay within the reward bound", "[learning]") {
  Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const auto m = testing::random_instance(rng, {.max_cap = 8, .max_beta = 0.95});
    LearningConfig cfg;
    cfg.slots = 100'000;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const auto res = train(m, cfg);
    const double bound = std::max(m.benefit(m.num_types() - 1), m.cost) / (1.0 - m.discount);
    CHECK(res.qtable.max_abs() <= bound + 1e-9);
  }
}

TEST_CASE("without exploration the learner still runs and respects forced states", "[learning]") {
  const auto m = testing::five_type_model();
  LearningConfig cfg;
  cfg.explore_start = 0.0;
  cfg.explore_end = 0.0;
  cfg.slots = 20'000;
  const auto res = train(m, cfg);
  CHECK(respects_forced(m, res.policy));
  for (const auto& s : enumerate_states(m)) {
    for (Action a : {Action::zero, Action::one}) {
      if (!res.qtable.allowed(s, a)) CHECK(res.qtable.visits(s, a) == 0);
    }
  }
}

TEST_CASE("exploration schedule and config validation", "[learning]") {
  LearningConfig cfg;
  cfg.slots = 1000;
  CHECK(exploration_rate(cfg, 0) == Approx(1.0));
  CHECK(exploration_rate(cfg, 250) == Approx(0.525));
  CHECK(exploration_rate(cfg, 500) == Approx(0.05));
  CHECK(exploration_rate(cfg, 999) == Approx(0.05));

  auto bad = cfg;
  bad.initial_rate = 0.0;
  CHECK_THROWS_AS(validate_learning_config(bad), std::invalid_argument);
  bad = cfg;
  bad.explore_end = 1.5;
  CHECK_THROWS_AS(validate_learning_config(bad), std::invalid_argument);
  bad = cfg;
  bad.slots = 0;
  CHECK_THROWS_AS(validate_learning_config(bad), std::invalid_argument);
  CHECK_NOTHROW(validate_learning_config(cfg));
}
