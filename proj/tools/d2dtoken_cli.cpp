// d2dtoken: experiment runner for the token-based D2D incentive model.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "d2dtoken/d2dtoken.hpp"

namespace fs = std::filesystem;
using namespace d2dtoken;
using nlohmann::json;

namespace {

enum ExitCode : int { kOk = 0, kOther = 1, kValidation = 2, kSolver = 3, kStructure = 4 };

constexpr const char* kOutEnv = "D2DTOKEN_OUT";

struct Options {
  std::string config;
  std::string out;
  std::uint64_t seed = 1;
  std::optional<std::int64_t> slots;
  std::string grid;
  std::string param;
  std::string log_base;
  std::optional<double> epsilon;
  std::optional<int> max_iterations;
  std::string policy = "optimal";
  bool trace = false;
  std::optional<int> start_type;
  std::optional<int> start_tokens;
  int num_ues = 20;
  int rounds = 1;
  int seeds = 20;
  std::int64_t log_every = 10'000;
};

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto end = comma == std::string::npos ? text.size() : comma;
    std::string item = text.substr(pos, end - pos);
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc{} || p != item.data() + item.size()) {
      throw std::invalid_argument("bad grid value '" + item + "'");
    }
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw std::invalid_argument("empty grid");
  return out;
}

class Run {
 public:
  Run(std::string command, const Options& o) : command_(std::move(command)), opt_(o) {
    std::optional<LogBase> base;
    if (!o.log_base.empty()) base = parse_log_base(o.log_base);
    cfg_ = load_config(o.config, base);
    if (o.epsilon) cfg_.solver.epsilon = *o.epsilon;
    if (o.max_iterations) cfg_.solver.max_iterations = *o.max_iterations;
    if (!(cfg_.solver.epsilon > 0.0)) throw ConfigError("solver epsilon must be positive");
    if (cfg_.solver.max_iterations < 1) throw ConfigError("solver max_iterations must be positive");
    require_valid(cfg_.model);
    out_ = o.out;
    if (out_.empty()) {
      const char* env = std::getenv(kOutEnv);
      out_ = env && *env ? env : "d2dtoken_out";
    }
    run_["command"] = command_;
    run_["config_path"] = o.config;
  }

  const MdpModel& model() const { return cfg_.model; }
  const ExperimentConfig& config() const { return cfg_; }
  const SolverConfig& solver() const { return cfg_.solver; }
  json& run_info() { return run_; }

  OutputMeta meta() const { return {to_json(cfg_), opt_.seed, {{"run", run_.dump()}}}; }

  // Opened lazily so that failed validation leaves no files behind.
  std::ofstream open(const std::string& name) {
    fs::create_directories(out_);
    const fs::path p = out_ / name;
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os.precision(17);
    written_.push_back(p.string());
    return os;
  }

  void report_files() const {
    for (const auto& f : written_) std::cout << "wrote " << f << "\n";
  }

 private:
  std::string command_;
  Options opt_;
  ExperimentConfig cfg_;
  fs::path out_;
  json run_;
  std::vector<std::string> written_;
};

Policy policy_for(const std::string& name, const MdpModel& m, const SolverConfig& s) {
  if (name == "optimal") return value_iteration(m, s).policy;
  if (name == "greedy") return build_greedy_policy(m, s);
  throw std::invalid_argument("unknown policy '" + name + "'");
}

PolicyKind policy_kind(const std::string& name) {
  if (name == "optimal") return PolicyKind::optimal;
  if (name == "greedy") return PolicyKind::greedy;
  throw std::invalid_argument("unknown policy '" + name + "'");
}

int cmd_solve(const Options& o) {
  Run run("solve", o);
  const auto& m = run.model();
  const auto sol = value_iteration(m, run.solver());
  const auto rep = analyze_structure(m, sol);
  run.run_info()["iterations"] = sol.iterations;
  const auto meta = run.meta();

  auto vf = run.open("values.csv");
  write_value_policy(vf, m, sol.values, sol.policy, meta);
  if (rep.threshold_form) {
    auto tf = run.open("thresholds.csv");
    write_thresholds(tf, m, rep.thresholds, meta);
  }
  auto sf = run.open("structure.csv");
  write_preamble(sf, "structure", meta);
  sf << "check,passed,detail\n";
  sf << "one-shot-deviation," << rep.one_shot.ok() << ",violations=" << rep.one_shot.violations.size() << "\n";
  sf << "concavity," << rep.concavity.ok() << ",max_second_difference=" << fmt(rep.concavity.max_violation) << "\n";
  sf << "monotone-in-tokens," << (rep.max_token_decrease <= 1e-9) << ",max_decrease="
     << fmt(rep.max_token_decrease) << "\n";
  sf << "threshold-form," << rep.threshold_form << ",\"" << rep.threshold_error << "\"\n";
  sf << "benefit-order," << rep.benefit_order << ",\n";
  for (const auto& v : rep.one_shot.violations) {
    sf << "# one-shot violation at type " << v.state.type << " tokens " << v.state.tokens << " slack " << fmt(v.slack)
       << "\n";
  }
  auto bf = run.open("benefits.csv");
  write_benefit_report(bf, run.config(), meta);

  std::cout << "converged in " << sol.iterations << " iterations\n";
  if (rep.threshold_form) {
    std::cout << "thresholds:";
    for (int s = 0; s < m.num_types(); ++s) std::cout << " " << m.traffic.label(s) << "=" << rep.thresholds.at(s);
    std::cout << "\n";
  }
  std::cout << "structure checks: " << (rep.ok() ? "all passed" : "FAILED") << "\n";
  run.report_files();
  return rep.ok() ? kOk : kStructure;
}

int cmd_sweep(const Options& o) {
  if (o.param.empty()) throw std::invalid_argument("sweep needs --param");
  if (o.grid.empty()) throw std::invalid_argument("sweep needs --grid");
  const auto axis = parse_sweep_axis(o.param);
  const auto grid = parse_grid(o.grid);
  Run run("sweep", o);
  const auto& m = run.model();
  if (axis.param == SweepParam::benefit && (axis.benefit_type >= m.num_types())) {
    throw std::invalid_argument("sweep benefit type out of range");
  }
  run.run_info()["param"] = axis_name(axis);
  run.run_info()["grid"] = grid;
  const auto pts = sweep(m, axis, grid, run.solver());
  const auto trend = expected_trend(axis);
  std::vector<TrendVerdict> verdicts;
  if (trend) verdicts = check_trend(pts, *trend, m.num_types());

  const auto meta = run.meta();
  auto sf = run.open("sweep.csv");
  write_sweep(sf, m, axis, pts, meta);
  auto vf = run.open("sweep_verdicts.csv");
  write_trend_verdicts(vf, m, axis, trend, verdicts, meta);

  int failed_points = 0;
  for (const auto& p : pts) {
    std::cout << axis_name(axis) << "=" << fmt(p.value) << ":";
    if (p.thresholds) {
      for (int s = 1; s < m.num_types(); ++s) std::cout << " " << p.thresholds->at(s);
    } else {
      ++failed_points;
      std::cout << " error: " << p.error;
    }
    std::cout << "\n";
  }
  bool monotone = true;
  for (const auto& v : verdicts) monotone = monotone && v.monotone;
  if (trend) std::cout << "trend check: " << (monotone ? "monotone" : "VIOLATED") << "\n";
  run.report_files();
  if (failed_points > 0) return kSolver;
  return monotone ? kOk : kStructure;
}

int cmd_simulate(const Options& o) {
  Run run("simulate", o);
  const auto& m = run.model();
  const Policy pi = policy_for(o.policy, m, run.solver());
  SimConfig sc;
  sc.slots = o.slots.value_or(1'000'000);
  sc.seed = o.seed;
  sc.initial_type = o.start_type;
  sc.initial_tokens = o.start_tokens;
  sc.keep_records = o.trace;
  run.run_info()["policy"] = o.policy;
  run.run_info()["slots"] = sc.slots;
  if (o.start_type) run.run_info()["start_type"] = *o.start_type;
  if (o.start_tokens) run.run_info()["start_tokens"] = *o.start_tokens;
  const auto tr = run_single(m, pi, sc);

  const auto meta = run.meta();
  auto sf = run.open("summary.csv");
  write_preamble(sf, "sim_summary", meta);
  sf << "policy,slots,total_reward,average_reward,discounted_reward,spend_count,earn_count,rejected_count,"
        "final_type,final_tokens\n";
  sf << o.policy << "," << tr.slots << "," << fmt(tr.total_reward) << "," << fmt(tr.average_reward()) << ","
     << fmt(tr.discounted_reward) << "," << tr.spend_count() << "," << tr.earn_count << "," << tr.rejected_count
     << "," << tr.final_state.type << "," << tr.final_state.tokens << "\n";
  auto uf = run.open("token_usage.csv");
  write_preamble(uf, "token_usage", meta);
  write_token_usage(uf, m, o.policy, tr, true);
  if (o.trace) {
    auto tf = run.open("trace.csv");
    write_trace(tf, tr, meta);
  }
  std::cout << o.policy << " policy: average reward " << fmt(tr.average_reward()) << " over " << tr.slots
            << " slots, " << tr.spend_count() << " tokens spent\n";
  run.report_files();
  return kOk;
}

int cmd_network(const Options& o) {
  if (o.rounds < 1) throw std::invalid_argument("--rounds must be at least 1");
  Run run("network", o);
  const auto& m = run.model();
  NetworkConfig nc;
  nc.num_ues = o.num_ues;
  nc.slots = o.slots.value_or(100'000);
  nc.seed = o.seed;
  nc.policies = {UePolicy{policy_kind(o.policy), std::nullopt}};
  nc.solver = run.solver();
  run.run_info()["policy"] = o.policy;
  run.run_info()["num_ues"] = nc.num_ues;
  run.run_info()["slots"] = nc.slots;
  run.run_info()["rounds"] = o.rounds;

  std::optional<FixedPointResult> fp;
  NetworkResult res;
  if (o.rounds > 1) {
    fp = run_network_fixed_point({m}, nc, o.rounds);
    res = fp->last;
  } else {
    res = run_network({m}, nc);
  }

  const auto meta = run.meta();
  auto ef = run.open("network_env.csv");
  write_preamble(ef, "network_env", meta);
  ef << "ue,accept_slots,accept_hits,p_hat,p_se,requests,served,q_hat,q_se,average_reward,spend_count,earn_count\n";
  for (std::size_t i = 0; i < res.env.size(); ++i) {
    const auto& e = res.env[i];
    const auto& tr = res.traces[i];
    ef << i << "," << e.accept_slots << "," << e.accept_hits << "," << fmt(e.p_hat()) << "," << fmt(e.p_se()) << ","
       << e.requests << "," << e.served << "," << fmt(e.q_hat()) << "," << fmt(e.q_se()) << ","
       << fmt(tr.average_reward()) << "," << tr.spend_count() << "," << tr.earn_count << "\n";
  }
  auto sf = run.open("network_summary.csv");
  write_preamble(sf, "network_summary", meta);
  sf << "num_ues,slots,initial_total_tokens,final_total_tokens,conservation_breaks,clipped_transfers\n";
  sf << nc.num_ues << "," << nc.slots << "," << res.initial_total_tokens << "," << res.final_total_tokens << ","
     << res.conservation_breaks << "," << res.clipped_transfers << "\n";
  if (fp) {
    auto ff = run.open("fixed_point.csv");
    write_preamble(ff, "fixed_point", meta);
    ff << "round,ue,p,q,policy_changes,mean_reward\n";
    for (std::size_t r = 0; r < fp->rounds.size(); ++r) {
      const auto& fr = fp->rounds[r];
      for (std::size_t i = 0; i < fr.measured.size(); ++i) {
        ff << r << "," << i << "," << fmt(fr.measured[i].p_recv) << "," << fmt(fr.measured[i].q_accept) << ","
           << fr.policy_changes[i] << "," << fmt(fr.mean_reward) << "\n";
      }
    }
    std::cout << "fixed point: " << fp->rounds.size() << " rounds, " << (fp->converged ? "converged" : "not converged")
              << "\n";
  }
  const bool conserved = res.conservation_breaks == 0 && res.initial_total_tokens == res.final_total_tokens;
  std::cout << nc.num_ues << " UEs, " << nc.slots << " slots: token total " << res.initial_total_tokens << " -> "
            << res.final_total_tokens << (conserved ? " (conserved)" : " (NOT conserved)") << "\n";
  run.report_files();
  return conserved ? kOk : kStructure;
}

int cmd_learn(const Options& o) {
  Run run("learn", o);
  const auto& m = run.model();
  LearningConfig lc;
  lc.slots = o.slots.value_or(1'000'000);
  lc.seed = o.seed;
  lc.log_every = o.log_every;
  run.run_info()["slots"] = lc.slots;
  run.run_info()["log_every"] = lc.log_every;
  const auto res = train(m, lc);
  const auto opt = value_iteration(m, run.solver()).policy;
  const auto agree = agreement(res.policy, opt);

  const auto meta = run.meta();
  auto qf = run.open("qtable.csv");
  write_qtable(qf, m, res.qtable, meta);
  auto cf = run.open("curve.csv");
  write_curve(cf, res.curve, meta);
  auto sf = run.open("learn_summary.csv");
  write_preamble(sf, "learn_summary", meta);
  sf << "slots,states,agreeing_states,agreement\n";
  sf << lc.slots << "," << opt.size() << "," << agree << ","
     << fmt(static_cast<double>(agree) / static_cast<double>(opt.size())) << "\n";
  std::cout << "learned policy agrees with the optimal policy on " << agree << " of " << opt.size() << " states\n";
  run.report_files();
  return kOk;
}

int cmd_compare(const Options& o) {
  CompareConfig cc;
  if (!o.grid.empty()) cc.betas = parse_grid(o.grid);
  if (o.seeds < 1) throw std::invalid_argument("--seeds must be at least 1");
  cc.seeds = o.seeds;
  cc.slots = o.slots.value_or(1'000'000);
  cc.seed = o.seed;
  Run run("compare", o);
  const auto& m = run.model();
  cc.solver = run.solver();
  for (double b : cc.betas) require_valid(with_parameter(m, {SweepParam::discount, 0}, b));
  run.run_info()["betas"] = cc.betas;
  run.run_info()["seeds"] = cc.seeds;
  run.run_info()["slots"] = cc.slots;
  const auto pts = run_compare(m, cc);

  const auto meta = run.meta();
  auto cf = run.open("compare.csv");
  write_preamble(cf, "compare", meta);
  cf << "beta,seeds,optimal_mean,optimal_se,greedy_mean,greedy_se,gap_mean,gap_se,pooled_se\n";
  for (const auto& p : pts) {
    cf << fmt(p.beta) << "," << p.optimal.stats.n << "," << fmt(p.optimal.stats.mean) << ","
       << fmt(p.optimal.stats.se()) << "," << fmt(p.greedy.stats.mean) << "," << fmt(p.greedy.stats.se()) << ","
       << fmt(p.gap.mean) << "," << fmt(p.gap.se()) << "," << fmt(p.pooled_se()) << "\n";
  }
  auto uf = run.open("token_usage.csv");
  write_preamble(uf, "token_usage", meta);
  uf << "beta,policy,type,label,spend_count,share,traffic_share\n";
  double busy = 0.0;
  for (int s = 1; s < m.num_types(); ++s) busy += m.prob(s);
  for (const auto& p : pts) {
    for (const auto* runs : {&p.optimal, &p.greedy}) {
      for (int s = 1; s < m.num_types(); ++s) {
        uf << fmt(p.beta) << "," << (runs == &p.optimal ? "optimal" : "greedy") << "," << s << ","
           << m.traffic.label(s) << "," << runs->spend_by_type[static_cast<std::size_t>(s)] << ","
           << fmt(runs->spend_share(s)) << "," << fmt(m.prob(s) / busy) << "\n";
      }
    }
  }
  for (const auto& p : pts) {
    std::cout << "beta=" << fmt(p.beta) << ": optimal " << fmt(p.optimal.stats.mean) << ", greedy "
              << fmt(p.greedy.stats.mean) << ", gap " << fmt(p.gap.mean) << " +- " << fmt(p.gap.se()) << "\n";
  }
  run.report_files();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Token-based D2D incentive model: solve, sweep, simulate, network, learn, compare"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "d2dtoken 1.0");
  Options o;
  int (*command)(const Options&) = nullptr;

  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "Model config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, std::string("Output directory (default $") + kOutEnv + " or ./d2dtoken_out)");
    sub->add_option("--seed", o.seed, "Random seed");
    sub->add_option("--log-base", o.log_base, "MOS log base for elastic traffic")
        ->check(CLI::IsMember({"natural", "base10"}));
    sub->add_option("--epsilon", o.epsilon, "Value-iteration stopping tolerance");
    sub->add_option("--max-iterations", o.max_iterations, "Value-iteration iteration cap");
  };

  auto* solve = app.add_subcommand("solve", "Optimal policy, thresholds and structure checks");
  common(solve);
  solve->callback([&] { command = cmd_solve; });

  auto* sw = app.add_subcommand("sweep", "Thresholds over a parameter grid");
  common(sw);
  sw->add_option("--param", o.param, "beta, p, q, c or b:<type>")->required();
  sw->add_option("--grid", o.grid, "Comma-separated parameter values")->required();
  sw->callback([&] { command = cmd_sweep; });

  auto* sim = app.add_subcommand("simulate", "Single-UE Monte-Carlo run");
  common(sim);
  sim->add_option("--slots", o.slots, "Number of slots (default 1000000)");
  sim->add_option("--policy", o.policy, "optimal or greedy")->check(CLI::IsMember({"optimal", "greedy"}));
  sim->add_flag("--trace", o.trace, "Write the per-slot trace");
  sim->add_option("--start-type", o.start_type, "Initial traffic type");
  sim->add_option("--start-tokens", o.start_tokens, "Initial token count (default K/2)");
  sim->callback([&] { command = cmd_simulate; });

  auto* net = app.add_subcommand("network", "Multi-UE token economy");
  common(net);
  net->add_option("--slots", o.slots, "Number of slots (default 100000)");
  net->add_option("--num-ues", o.num_ues, "Number of UEs")->check(CLI::Range(2, 100000));
  net->add_option("--policy", o.policy, "optimal or greedy")->check(CLI::IsMember({"optimal", "greedy"}));
  net->add_option("--rounds", o.rounds, "Re-solve against measured p, q for this many rounds");
  net->callback([&] { command = cmd_network; });

  auto* learn = app.add_subcommand("learn", "Q-learning with unknown p and q");
  common(learn);
  learn->add_option("--slots", o.slots, "Training budget in slots (default 1000000)");
  learn->add_option("--log-every", o.log_every, "Training-curve interval")->check(CLI::PositiveNumber);
  learn->callback([&] { command = cmd_learn; });

  auto* cmp = app.add_subcommand("compare", "Optimal against greedy on common random numbers");
  common(cmp);
  cmp->add_option("--grid", o.grid, "Comma-separated discount factors (default 0.3,0.5,0.7,0.9,0.99)");
  cmp->add_option("--slots", o.slots, "Slots per seed (default 1000000)");
  cmp->add_option("--seeds", o.seeds, "Number of seeds");
  cmp->callback([&] { command = cmd_compare; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kOther;
  }

  try {
    return command(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kValidation;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const NonConvergenceError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kSolver;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
}
