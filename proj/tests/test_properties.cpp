// Structural properties over a random instance family.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "d2dtoken/solver.hpp"
#include "support.hpp"

using namespace d2dtoken;

TEST_CASE("value iteration agrees with the brute-force oracle on small instances", "[property][oracle]") {
  Rng rng(101);
  const SolverConfig cfg{.epsilon = 1e-9};
  for (int trial = 0; trial < 15; ++trial) {
    const auto m = testing::random_instance(rng, {.max_types = 3, .max_free_states = 16});
    INFO("trial " << trial << " beta " << m.discount << " N " << m.num_types() - 1 << " K " << m.token_cap);
    const auto bf = brute_force_optimal(m);
    const auto vi = value_iteration(m, cfg);
    // Sup-norm error of the last iterate is at most eps * beta / (1 - beta).
    const double bound = 10.0 * cfg.epsilon * m.discount / (1.0 - m.discount);
    for (std::size_t i = 0; i < vi.values.size(); ++i) CHECK(std::abs(vi.values.flat(i) - bf.values.flat(i)) <= bound);
    CHECK(check_one_shot_deviation(m, bf.values, bf.policy).ok());
  }
}

TEST_CASE("every value-iteration iterate is concave in tokens", "[property]") {
  Rng rng(202);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = testing::random_instance(rng);
    double worst = 0.0;
    int checked = 0;
    value_iteration(m, {}, [&](int, const ValueFunction& v) {
      worst = std::max(worst, check_concavity(v).max_violation);
      ++checked;
    });
    INFO("trial " << trial);
    CHECK(checked > 1);
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("optimal policies are thresholds ordered by benefit, values grow with tokens", "[property]") {
  Rng rng(303);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = testing::random_instance(rng);
    const auto sol = value_iteration(m);
    INFO("trial " << trial);
    ThresholdTable t;
    REQUIRE_NOTHROW(t = extract_thresholds(m, sol.policy));
    CHECK(thresholds_follow_benefit_order(m, t));
    CHECK(to_policy(m, t) == sol.policy);
    CHECK(max_token_decrease(sol.values) <= 1e-9);
    CHECK(analyze_structure(m, sol).ok());
  }
}

TEST_CASE("values stay within the reward bound", "[property]") {
  Rng rng(404);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = testing::random_instance(rng);
    const auto sol = value_iteration(m);
    const double bound = m.benefit(m.num_types() - 1) / (1.0 - m.discount);
    for (double v : sol.values.data()) CHECK(std::abs(v) <= bound);
  }
}
