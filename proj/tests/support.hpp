#pragma once

// Shared fixtures: the reference instances and a random instance family.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "d2dtoken/model.hpp"
#include "d2dtoken/mos.hpp"
#include "d2dtoken/rng.hpp"

namespace d2dtoken::testing {

// Five equiprobable types, benefits 3..6, c = 1, K = 20, beta = 0.99, p = q = 0.5.
inline MdpModel five_type_model() {
  MdpModel m;
  m.traffic = make_traffic({0.2, 0.2, 0.2, 0.2, 0.2}, {3, 4, 5, 6});
  m.env = {0.5, 0.5};
  m.cost = 1.0;
  m.discount = 0.99;
  m.token_cap = 20;
  return m;
}

// Idle / elastic / video with MOS-derived benefits, p = q = 0.8, c = 0.4.
inline MdpModel realistic_model(double beta = 0.99, int token_cap = 20) {
  const MosParams mp;
  const double elastic = benefit_from_mos(mp, {0, 1500}, {0, 1000}, TrafficKind::elastic);
  const double video = benefit_from_mos(mp, {10, 0}, {5, 0}, TrafficKind::video);
  MdpModel m;
  m.traffic = make_traffic({0.3, 0.5, 0.2}, {elastic, video}, {"idle", "elastic", "video"});
  m.env = {0.8, 0.8};
  m.cost = 0.4;
  m.discount = beta;
  m.token_cap = token_cap;
  return m;
}

inline MdpModel tiny_model(double beta = 0.5) {
  MdpModel m;
  m.traffic = make_traffic({0.5, 0.5}, {3.0});
  m.env = {0.5, 0.5};
  m.cost = 1.0;
  m.discount = beta;
  m.token_cap = 1;
  return m;
}

struct InstanceRanges {
  int min_types = 1, max_types = 5;  // busy types N
  int min_cap = 1, max_cap = 20;     // K
  double min_beta = 0.5, max_beta = 0.999;
  int max_free_states = 0;  // when > 0, require (N+1) K <= max_free_states
};

inline double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

// Random beta, p, q in (0.05, 0.95), increasing benefits, c in (0, 2).
inline MdpModel random_instance(Rng& rng, const InstanceRanges& r = {}) {
  MdpModel m;
  int n = r.min_types + static_cast<int>(rng.index(static_cast<std::size_t>(r.max_types - r.min_types + 1)));
  int cap = r.min_cap + static_cast<int>(rng.index(static_cast<std::size_t>(r.max_cap - r.min_cap + 1)));
  if (r.max_free_states > 0) cap = std::max(1, std::min(cap, r.max_free_states / (n + 1)));
  std::vector<double> probs;
  double total = 0.0;
  for (int i = 0; i <= n; ++i) {
    probs.push_back(uniform_in(rng, 0.05, 1.0));
    total += probs.back();
  }
  for (auto& p : probs) p /= total;
  std::vector<double> benefits;
  double b = 0.0;
  for (int i = 0; i < n; ++i) {
    b += uniform_in(rng, 0.1, 3.0);
    benefits.push_back(b);
  }
  m.traffic = make_traffic(std::move(probs), benefits);
  m.env = {uniform_in(rng, 0.05, 0.95), uniform_in(rng, 0.05, 0.95)};
  m.cost = uniform_in(rng, 0.0, 2.0);
  m.discount = uniform_in(rng, r.min_beta, r.max_beta);
  m.token_cap = cap;
  return m;
}

}  // namespace d2dtoken::testing
