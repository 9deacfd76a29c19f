#pragma once

// JSON model configuration.
//
//   {
//     "schema_version": 1,
//     "token_cap": 20, "discount": 0.99, "cost": 1.0,
//     "env": {"p": 0.5, "q": 0.5},
//     "traffic": [
//       {"label": "idle",  "prob": 0.2},
//       {"label": "s1",    "prob": 0.2, "benefit": 3.0},
//       {"label": "video", "prob": 0.2, "kind": "video",
//        "d2d": {"psnr_db": 10}, "cellular": {"psnr_db": 5}}
//     ],
//     "mos": {"b1": 1, "b2": 5, "b3": 2.6949, "b4": 0.0235, "log_base": "natural"},
//     "solver": {"epsilon": 1e-9, "max_iterations": 100000}
//   }
//
// The first traffic entry is the idle type. Busy types give either an
// explicit "benefit" or a MOS "kind" with D2D and cellular link qualities
// (a "benefit" given next to a "kind" must match the derived value).
// Types are kept in file order, so benefits must already be increasing.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "d2dtoken/model.hpp"
#include "d2dtoken/mos.hpp"
#include "d2dtoken/solver.hpp"

namespace d2dtoken {

inline constexpr int kConfigSchemaVersion = 1;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BenefitProvenance {
  int type = 0;
  std::string label;
  bool from_mos = false;
  TrafficKind kind = TrafficKind::video;
  LinkQuality d2d;
  LinkQuality cellular;
  double mos_d2d = 0.0;
  double mos_cellular = 0.0;
  double benefit = 0.0;
};

struct ExperimentConfig {
  MdpModel model;
  SolverConfig solver;
  std::optional<MosParams> mos;
  std::vector<BenefitProvenance> provenance;  // one per busy type
};

namespace detail {

template <typename T>
T get_required(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": bad \"" + key + "\": " + e.what());
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? get_required<T>(j, key, where) : fallback;
}

inline LinkQuality parse_link(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": link quality must be an object");
  LinkQuality q;
  q.psnr_db = get_or<double>(j, "psnr_db", 0.0, where);
  q.throughput_kbps = get_or<double>(j, "throughput_kbps", 0.0, where);
  return q;
}

}  // namespace detail

inline MosParams parse_mos(const nlohmann::json& j) {
  MosParams p;
  p.b1 = detail::get_or<double>(j, "b1", p.b1, "mos");
  p.b2 = detail::get_or<double>(j, "b2", p.b2, "mos");
  p.b3 = detail::get_or<double>(j, "b3", p.b3, "mos");
  p.b4 = detail::get_or<double>(j, "b4", p.b4, "mos");
  if (j.contains("log_base")) p.log_base = parse_log_base(detail::get_required<std::string>(j, "log_base", "mos"));
  validate_mos_params(p);
  return p;
}

// `log_base` overrides the file's MOS log base when given.
inline ExperimentConfig parse_config(const nlohmann::json& j, std::optional<LogBase> log_base = std::nullopt) {
  if (!j.is_object()) throw ConfigError("config root must be an object");
  const int version = detail::get_or<int>(j, "schema_version", kConfigSchemaVersion, "config");
  if (version != kConfigSchemaVersion) {
    throw ConfigError("unsupported config schema_version " + std::to_string(version));
  }
  ExperimentConfig cfg;
  MdpModel& m = cfg.model;
  m.token_cap = detail::get_required<int>(j, "token_cap", "config");
  m.discount = detail::get_required<double>(j, "discount", "config");
  m.cost = detail::get_required<double>(j, "cost", "config");
  const auto& env = j.contains("env") ? j.at("env") : throw ConfigError("config: missing \"env\"");
  m.env.p_recv = detail::get_required<double>(env, "p", "env");
  m.env.q_accept = detail::get_required<double>(env, "q", "env");

  try {
    if (j.contains("mos")) cfg.mos = parse_mos(j.at("mos"));
    if (log_base) {
      if (!cfg.mos) cfg.mos = MosParams{};
      cfg.mos->log_base = *log_base;
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("mos: ") + e.what());
  }

  if (!j.contains("traffic") || !j.at("traffic").is_array()) throw ConfigError("config: \"traffic\" must be an array");
  const auto& traffic = j.at("traffic");
  if (traffic.size() < 2) throw ConfigError("config: traffic needs the idle entry and at least one busy type");
  std::vector<double> probs;
  std::vector<double> benefits;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < traffic.size(); ++i) {
    const auto& t = traffic[i];
    const std::string where = "traffic[" + std::to_string(i) + "]";
    probs.push_back(detail::get_required<double>(t, "prob", where));
    labels.push_back(detail::get_or<std::string>(t, "label", i == 0 ? "idle" : "s" + std::to_string(i), where));
    if (i == 0) {
      if (t.contains("benefit") || t.contains("kind")) throw ConfigError(where + ": the idle type takes no benefit");
      continue;
    }
    BenefitProvenance prov;
    prov.type = static_cast<int>(i);
    prov.label = labels.back();
    if (t.contains("kind")) {
      if (!cfg.mos) cfg.mos = MosParams{};
      try {
        prov.from_mos = true;
        prov.kind = parse_traffic_kind(detail::get_required<std::string>(t, "kind", where));
        prov.d2d = detail::parse_link(detail::get_required<nlohmann::json>(t, "d2d", where), where + ".d2d");
        prov.cellular =
            detail::parse_link(detail::get_required<nlohmann::json>(t, "cellular", where), where + ".cellular");
        prov.mos_d2d = mos(*cfg.mos, prov.d2d, prov.kind);
        prov.mos_cellular = mos(*cfg.mos, prov.cellular, prov.kind);
        prov.benefit = benefit_from_mos(*cfg.mos, prov.d2d, prov.cellular, prov.kind);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        throw ConfigError(where + ": " + e.what());
      }
      // A resolved config carries both; they must agree.
      if (t.contains("benefit")) {
        const double stated = detail::get_required<double>(t, "benefit", where);
        if (std::abs(stated - prov.benefit) > 1e-9 * std::max(1.0, std::abs(prov.benefit))) {
          throw ConfigError(where + ": \"benefit\" disagrees with the MOS-derived value");
        }
      }
    } else if (t.contains("benefit")) {
      prov.benefit = detail::get_required<double>(t, "benefit", where);
    } else {
      throw ConfigError(where + ": needs \"benefit\" or a MOS \"kind\"");
    }
    benefits.push_back(prov.benefit);
    cfg.provenance.push_back(prov);
  }
  m.traffic = make_traffic(std::move(probs), benefits, std::move(labels));

  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    cfg.solver.epsilon = detail::get_or<double>(s, "epsilon", cfg.solver.epsilon, "solver");
    cfg.solver.max_iterations = detail::get_or<int>(s, "max_iterations", cfg.solver.max_iterations, "solver");
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path, std::optional<LogBase> log_base = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return parse_config(j, log_base);
}

// Fully resolved form: benefits materialized, MOS provenance kept.
inline nlohmann::json to_json(const ExperimentConfig& cfg) {
  const MdpModel& m = cfg.model;
  nlohmann::json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["token_cap"] = m.token_cap;
  j["discount"] = m.discount;
  j["cost"] = m.cost;
  j["env"] = {{"p", m.env.p_recv}, {"q", m.env.q_accept}};
  nlohmann::json traffic = nlohmann::json::array();
  for (int s = 0; s < m.num_types(); ++s) {
    nlohmann::json t{{"label", m.traffic.label(s)}, {"prob", m.prob(s)}};
    if (s > 0) t["benefit"] = m.benefit(s);
    for (const auto& p : cfg.provenance) {
      if (p.type == s && p.from_mos) {
        t["kind"] = kind_name(p.kind);
        t["d2d"] = {{"psnr_db", p.d2d.psnr_db}, {"throughput_kbps", p.d2d.throughput_kbps}};
        t["cellular"] = {{"psnr_db", p.cellular.psnr_db}, {"throughput_kbps", p.cellular.throughput_kbps}};
      }
    }
    traffic.push_back(std::move(t));
  }
  j["traffic"] = std::move(traffic);
  if (cfg.mos) {
    j["mos"] = {{"b1", cfg.mos->b1},
                {"b2", cfg.mos->b2},
                {"b3", cfg.mos->b3},
                {"b4", cfg.mos->b4},
                {"log_base", log_base_name(cfg.mos->log_base)}};
  }
  j["solver"] = {{"epsilon", cfg.solver.epsilon}, {"max_iterations", cfg.solver.max_iterations}};
  return j;
}

inline ExperimentConfig from_model(const MdpModel& m, const SolverConfig& solver = {}) {
  ExperimentConfig cfg;
  cfg.model = m;
  cfg.solver = solver;
  for (int s = 1; s < m.num_types(); ++s) {
    BenefitProvenance p;
    p.type = s;
    p.label = m.traffic.label(s);
    p.benefit = m.benefit(s);
    cfg.provenance.push_back(p);
  }
  return cfg;
}

}  // namespace d2dtoken
