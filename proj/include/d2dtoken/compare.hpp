#pragma once

// Optimal policy against the greedy baseline on common random numbers.

#include <cmath>
#include <cstdint>
#include <future>
#include <numeric>
#include <vector>

#include "d2dtoken/model.hpp"
#include "d2dtoken/rng.hpp"
#include "d2dtoken/sim.hpp"
#include "d2dtoken/solver.hpp"

namespace d2dtoken {

struct SampleStats {
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  double se() const { return n > 0 ? stddev / std::sqrt(static_cast<double>(n)) : 0.0; }
};

inline SampleStats summarize(const std::vector<double>& xs) {
  SampleStats s;
  s.n = xs.size();
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

struct CompareConfig {
  std::vector<double> betas{0.3, 0.5, 0.7, 0.9, 0.99};
  int seeds = 20;
  std::int64_t slots = 1'000'000;
  std::uint64_t seed = 1;
  SolverConfig solver;
};

struct PolicyRuns {
  Policy policy;
  std::vector<double> average_reward;       // one per seed
  std::vector<std::int64_t> spend_by_type;  // summed over seeds
  SampleStats stats;

  double spend_share(int type) const {
    const double total = static_cast<double>(std::accumulate(spend_by_type.begin(), spend_by_type.end(), std::int64_t{0}));
    return total > 0 ? static_cast<double>(spend_by_type[static_cast<std::size_t>(type)]) / total : 0.0;
  }
};

struct ComparePoint {
  double beta = 0.0;
  PolicyRuns optimal;
  PolicyRuns greedy;
  SampleStats gap;  // paired per-seed optimal minus greedy

  double pooled_se() const { return std::sqrt(optimal.stats.se() * optimal.stats.se() + greedy.stats.se() * greedy.stats.se()); }
};

inline PolicyRuns run_policy_seeds(const MdpModel& m, const Policy& pi, const CompareConfig& cfg) {
  PolicyRuns r;
  r.policy = pi;
  r.spend_by_type.assign(static_cast<std::size_t>(m.num_types()), 0);
  for (int i = 0; i < cfg.seeds; ++i) {
    SimConfig sc;
    sc.slots = cfg.slots;
    sc.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
    const SimTrace tr = run_single(m, pi, sc);
    r.average_reward.push_back(tr.average_reward());
    for (std::size_t s = 0; s < r.spend_by_type.size(); ++s) r.spend_by_type[s] += tr.spend_by_type[s];
  }
  r.stats = summarize(r.average_reward);
  return r;
}

inline ComparePoint compare_at(MdpModel m, double beta, const CompareConfig& cfg) {
  m.discount = beta;
  ComparePoint pt;
  pt.beta = beta;
  const Policy opt = value_iteration(m, cfg.solver).policy;
  const Policy greedy = build_greedy_policy(m, cfg.solver);
  pt.optimal = run_policy_seeds(m, opt, cfg);
  pt.greedy = run_policy_seeds(m, greedy, cfg);
  std::vector<double> diff;
  for (std::size_t i = 0; i < pt.optimal.average_reward.size(); ++i) {
    diff.push_back(pt.optimal.average_reward[i] - pt.greedy.average_reward[i]);
  }
  pt.gap = summarize(diff);
  return pt;
}

// Seeds are shared across policies and across beta values.
inline std::vector<ComparePoint> run_compare(const MdpModel& m, const CompareConfig& cfg, bool parallel = true) {
  std::vector<ComparePoint> out;
  if (!parallel) {
    for (double b : cfg.betas) out.push_back(compare_at(m, b, cfg));
    return out;
  }
  std::vector<std::future<ComparePoint>> jobs;
  for (double b : cfg.betas) jobs.push_back(std::async(std::launch::async, compare_at, m, b, cfg));
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

}  // namespace d2dtoken
