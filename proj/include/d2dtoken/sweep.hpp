#pragma once

// Threshold tables across a one-parameter grid.

#include <algorithm>
#include <future>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "d2dtoken/model.hpp"
#include "d2dtoken/solver.hpp"

namespace d2dtoken {

enum class SweepParam { discount, p_recv, q_accept, cost, benefit };

struct SweepAxis {
  SweepParam param = SweepParam::discount;
  int benefit_type = 0;  // only for SweepParam::benefit
};

// Accepts beta|discount, p, q, c|cost, b:<type>.
inline SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "beta" || name == "discount") return {SweepParam::discount, 0};
  if (name == "p") return {SweepParam::p_recv, 0};
  if (name == "q") return {SweepParam::q_accept, 0};
  if (name == "c" || name == "cost") return {SweepParam::cost, 0};
  if (name.rfind("b:", 0) == 0) {
    std::size_t used = 0;
    const int t = std::stoi(name.substr(2), &used);
    if (used != name.size() - 2 || t < 1) throw std::invalid_argument("bad benefit axis '" + name + "'");
    return {SweepParam::benefit, t};
  }
  throw std::invalid_argument("unknown sweep parameter '" + name + "' (use beta, p, q, c or b:<type>)");
}

inline std::string axis_name(const SweepAxis& a) {
  switch (a.param) {
    case SweepParam::discount: return "beta";
    case SweepParam::p_recv: return "p";
    case SweepParam::q_accept: return "q";
    case SweepParam::cost: return "c";
    case SweepParam::benefit: return "b:" + std::to_string(a.benefit_type);
  }
  return "?";
}

inline MdpModel with_parameter(MdpModel m, const SweepAxis& axis, double value) {
  switch (axis.param) {
    case SweepParam::discount: m.discount = value; break;
    case SweepParam::p_recv: m.env.p_recv = value; break;
    case SweepParam::q_accept: m.env.q_accept = value; break;
    case SweepParam::cost: m.cost = value; break;
    case SweepParam::benefit:
      if (axis.benefit_type >= m.num_types()) throw std::invalid_argument("benefit axis type out of range");
      m.traffic.benefit[static_cast<std::size_t>(axis.benefit_type)] = value;
      break;
  }
  return m;
}

struct SweepPoint {
  double value = 0.0;
  std::optional<ThresholdTable> thresholds;
  int iterations = 0;
  std::string error;  // set when the point failed
};

// Grid points are independent and solved concurrently; output order follows the grid.
inline std::vector<SweepPoint> sweep(const MdpModel& base, const SweepAxis& axis, const std::vector<double>& grid,
                                     const SolverConfig& cfg = {}, bool parallel = true) {
  auto solve_point = [&base, &axis, &cfg](double value) {
    SweepPoint pt;
    pt.value = value;
    try {
      const MdpModel m = with_parameter(base, axis, value);
      const auto sol = value_iteration(m, cfg);
      pt.iterations = sol.iterations;
      pt.thresholds = extract_thresholds(m, sol.policy);
    } catch (const std::exception& e) {
      pt.error = e.what();
    }
    return pt;
  };
  std::vector<SweepPoint> out;
  out.reserve(grid.size());
  if (!parallel) {
    for (double v : grid) out.push_back(solve_point(v));
    return out;
  }
  std::vector<std::future<SweepPoint>> jobs;
  jobs.reserve(grid.size());
  for (double v : grid) jobs.push_back(std::async(std::launch::async, solve_point, v));
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

enum class Trend { non_decreasing, non_increasing };

struct TrendVerdict {
  int type = 0;
  bool monotone = true;  // holds at every consecutive pair of solved points
  bool strict = false;   // at least one consecutive pair changes
};

// Per busy type, whether thresholds follow `trend` as the parameter
// increases. Failed points are skipped.
inline std::vector<TrendVerdict> check_trend(std::vector<SweepPoint> pts, Trend trend, int num_types) {
  std::stable_sort(pts.begin(), pts.end(), [](const SweepPoint& a, const SweepPoint& b) { return a.value < b.value; });
  std::vector<TrendVerdict> out;
  for (int s = 1; s < num_types; ++s) {
    TrendVerdict v{s, true, false};
    const ThresholdTable* prev = nullptr;
    for (const auto& p : pts) {
      if (!p.thresholds) continue;
      if (prev) {
        const int a = prev->at(s);
        const int b = p.thresholds->at(s);
        if (a != b) v.strict = true;
        if (trend == Trend::non_decreasing ? b < a : b > a) v.monotone = false;
      }
      prev = &*p.thresholds;
    }
    out.push_back(v);
  }
  return out;
}

// Expected direction along an increasing grid, where one is known.
inline std::optional<Trend> expected_trend(const SweepAxis& a) {
  switch (a.param) {
    case SweepParam::discount: return Trend::non_decreasing;
    case SweepParam::p_recv: return Trend::non_increasing;
    case SweepParam::q_accept: return Trend::non_decreasing;
    default: return std::nullopt;
  }
}

}  // namespace d2dtoken
