#pragma once

// Delimited-text outputs. Every file starts with '#' lines carrying the
// schema version, the file kind, the fully resolved config as one-line JSON
// and the seed (when one applies), followed by a CSV header row.

#include <array>
#include <charconv>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "d2dtoken/config.hpp"
#include "d2dtoken/learning.hpp"
#include "d2dtoken/sim.hpp"
#include "d2dtoken/solver.hpp"
#include "d2dtoken/sweep.hpp"

namespace d2dtoken {

inline constexpr int kOutputSchemaVersion = 1;

// Shortest representation that round-trips.
inline std::string fmt(double x) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return ec == std::errc{} ? std::string(buf.data(), end) : std::string("nan");
}

struct OutputMeta {
  nlohmann::json config;
  std::optional<std::uint64_t> seed;
  std::vector<std::pair<std::string, std::string>> extra;  // additional key=value lines
};

inline void write_preamble(std::ostream& os, const std::string& kind, const OutputMeta& meta) {
  os << "# d2dtoken schema=" << kOutputSchemaVersion << " kind=" << kind << "\n";
  os << "# config=" << meta.config.dump() << "\n";
  if (meta.seed) os << "# seed=" << *meta.seed << "\n";
  for (const auto& [k, v] : meta.extra) os << "# " << k << "=" << v << "\n";
}

inline void write_value_policy(std::ostream& os, const MdpModel& m, const ValueFunction& v, const Policy& pi,
                               const OutputMeta& meta) {
  write_preamble(os, "value_policy", meta);
  os << "type,tokens,value,action\n";
  for (const auto& s : enumerate_states(m)) {
    os << s.type << "," << s.tokens << "," << fmt(v[s]) << "," << as_int(pi[s]) << "\n";
  }
}

inline void write_thresholds(std::ostream& os, const MdpModel& m, const ThresholdTable& t, const OutputMeta& meta) {
  write_preamble(os, "thresholds", meta);
  os << "type,label,threshold\n";
  for (int s = 0; s < m.num_types(); ++s) os << s << "," << m.traffic.label(s) << "," << t.at(s) << "\n";
}

inline void write_sweep(std::ostream& os, const MdpModel& m, const SweepAxis& axis,
                        const std::vector<SweepPoint>& pts, const OutputMeta& meta) {
  write_preamble(os, "sweep", meta);
  os << "param,value,type,label,threshold,error\n";
  for (const auto& p : pts) {
    for (int s = 0; s < m.num_types(); ++s) {
      os << axis_name(axis) << "," << fmt(p.value) << "," << s << "," << m.traffic.label(s) << ",";
      if (p.thresholds) {
        os << p.thresholds->at(s) << ",";
      } else {
        os << ",\"" << p.error << "\"";
      }
      os << "\n";
    }
  }
}

inline void write_trend_verdicts(std::ostream& os, const MdpModel& m, const SweepAxis& axis,
                                 const std::optional<Trend>& trend, const std::vector<TrendVerdict>& verdicts,
                                 const OutputMeta& meta) {
  write_preamble(os, "sweep_verdicts", meta);
  os << "param,type,label,expected_trend,monotone,strict\n";
  const char* name = !trend ? "none" : *trend == Trend::non_decreasing ? "non-decreasing" : "non-increasing";
  for (const auto& v : verdicts) {
    os << axis_name(axis) << "," << v.type << "," << m.traffic.label(v.type) << "," << name << ","
       << (v.monotone ? "true" : "false") << "," << (v.strict ? "true" : "false") << "\n";
  }
}

inline void write_qtable(std::ostream& os, const MdpModel& m, const QTable& qt, const OutputMeta& meta) {
  write_preamble(os, "qtable", meta);
  os << "type,tokens,value,action,q0,q1,visits0,visits1\n";
  for (const auto& s : enumerate_states(m)) {
    os << s.type << "," << s.tokens << "," << fmt(qt.value(s)) << "," << as_int(qt.greedy(s)) << ",";
    os << (qt.allowed(s, Action::zero) ? fmt(qt.q(s, Action::zero)) : "") << ",";
    os << (qt.allowed(s, Action::one) ? fmt(qt.q(s, Action::one)) : "") << ",";
    os << qt.visits(s, Action::zero) << "," << qt.visits(s, Action::one) << "\n";
  }
}

inline void write_curve(std::ostream& os, const std::vector<CurvePoint>& curve, const OutputMeta& meta) {
  write_preamble(os, "training_curve", meta);
  os << "slot,discounted_reward,window_average\n";
  for (const auto& c : curve) os << c.slot << "," << fmt(c.discounted_reward) << "," << fmt(c.window_average) << "\n";
}

// Line-per-slot full trace.
inline void write_trace(std::ostream& os, const SimTrace& tr, const OutputMeta& meta) {
  write_preamble(os, "trace", meta);
  os << "slot,type,tokens,action,event,reward,token_delta\n";
  for (const auto& r : tr.records) {
    os << r.slot << "," << r.state.type << "," << r.state.tokens << "," << as_int(r.action) << ","
       << event_name(r.event) << "," << fmt(r.reward) << "," << r.token_delta << "\n";
  }
}

// Per-type spend histogram of one trace.
inline void write_token_usage(std::ostream& os, const MdpModel& m, const std::string& policy_name, const SimTrace& tr,
                              bool with_header) {
  if (with_header) os << "policy,type,label,spend_count,share,traffic_share\n";
  double busy = 0.0;
  for (int s = 1; s < m.num_types(); ++s) busy += m.prob(s);
  const auto total = static_cast<double>(tr.spend_count());
  for (int s = 1; s < m.num_types(); ++s) {
    const auto c = tr.spend_by_type[static_cast<std::size_t>(s)];
    os << policy_name << "," << s << "," << m.traffic.label(s) << "," << c << ","
       << fmt(total > 0 ? static_cast<double>(c) / total : 0.0) << "," << fmt(m.prob(s) / busy) << "\n";
  }
}

inline void write_benefit_report(std::ostream& os, const ExperimentConfig& cfg, const OutputMeta& meta) {
  write_preamble(os, "benefits", meta);
  os << "type,label,source,kind,d2d_psnr_db,d2d_throughput_kbps,cellular_psnr_db,cellular_throughput_kbps,"
        "mos_d2d,mos_cellular,benefit,log_base\n";
  for (const auto& p : cfg.provenance) {
    os << p.type << "," << p.label << ",";
    if (p.from_mos) {
      os << "mos," << kind_name(p.kind) << "," << fmt(p.d2d.psnr_db) << "," << fmt(p.d2d.throughput_kbps) << ","
         << fmt(p.cellular.psnr_db) << "," << fmt(p.cellular.throughput_kbps) << "," << fmt(p.mos_d2d) << ","
         << fmt(p.mos_cellular) << "," << fmt(p.benefit) << "," << log_base_name(cfg.mos->log_base) << "\n";
    } else {
      os << "explicit,,,,,,,," << fmt(p.benefit) << ",\n";
    }
  }
}

}  // namespace d2dtoken
