#include "harqnc/io.hpp"
#include "harqnc/sim.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using namespace harqnc;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitRuntime = 3;

struct Options {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::string policy;
  std::string output;
  std::string format;
  std::string per_run;
  std::string delta_mode = "zero";
  int workers = 0;
  int run_index = 0;
  std::optional<int> c1, c2, c4;
};

std::vector<std::string> split_policies(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<PolicySpec> resolve_policies(const Options& opt, const ScenarioConfig& cfg) {
  std::vector<PolicySpec> out;
  if (opt.policy.empty()) {
    out.push_back(cfg.policy);
  } else {
    for (const auto& p : split_policies(opt.policy)) out.push_back(PolicySpec::parse(p));
  }
  if (opt.delta_mode == "exact") {
    for (auto& p : out)
      if (p.kind == PolicySpec::Kind::HarqOptimal) p.kind = PolicySpec::Kind::HarqOptimalExactDelta;
  }
  return out;
}

/// Loads the scenario and applies overrides, then validates the result.
ScenarioConfig load_with_overrides(const Options& opt) {
  ScenarioConfig cfg = load_scenario(opt.scenario);
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.runs) cfg.runs = *opt.runs;
  if (opt.c1) cfg.dp.c1 = *opt.c1;
  if (opt.c2) cfg.dp.c2 = *opt.c2;
  if (opt.c4) cfg.dp.c4 = *opt.c4;
  const auto policies = resolve_policies(opt, cfg);
  cfg.policy = policies.front();
  const auto violations = validate_scenario(cfg);
  if (!violations.empty()) throw ValidationError(format_violations(violations));
  return cfg;
}

template <typename Writer>
void emit(const std::string& path, Writer&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open output file " + path);
  write(out);
  if (!out) throw std::runtime_error("failed writing " + path);
}

int cmd_validate(const Options& opt) {
  std::ifstream in(opt.scenario, std::ios::binary);
  if (!in) throw ParseError("cannot open scenario file '" + opt.scenario + "'");
  ScenarioConfig cfg;
  try {
    cfg = parse_scenario(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  const auto violations = validate_scenario(cfg);
  std::cout << format_violations(violations) << "\n";
  return violations.empty() ? kExitOk : kExitInvalid;
}

int cmd_simulate(const Options& opt) {
  const ScenarioConfig cfg = load_with_overrides(opt);
  PrepareOptions popts;
  popts.dp_workers = resolve_workers(opt.workers);
  const auto prep = prepare(cfg, popts);
  const RunTrace trace = run_episode(*prep, opt.run_index);
  const auto meta = make_meta(cfg, "trace");
  emit(opt.output, [&](std::ostream& os) {
    if (opt.format == "json")
      os << trace_to_json(trace, meta).dump(1) << "\n";
    else
      write_trace_csv(os, trace, meta);
  });
  return kExitOk;
}

int cmd_montecarlo(const Options& opt) {
  const ScenarioConfig cfg = load_with_overrides(opt);
  const auto policies = resolve_policies(opt, cfg);
  PrepareOptions popts;
  popts.dp_workers = resolve_workers(opt.workers);
  for (const auto& p : policies)
    if (p.kind == PolicySpec::Kind::HarqOptimalExactDelta) popts.with_dp = true;
  const auto prep = prepare(cfg, popts);

  MonteCarloOptions mopts;
  mopts.runs = cfg.runs;
  mopts.workers = resolve_workers(opt.workers);
  const MonteCarloResult result = monte_carlo(*prep, policies, mopts);

  const auto meta = make_meta(cfg, "summary");
  emit(opt.output, [&](std::ostream& os) {
    if (opt.format == "csv")
      write_summary_csv(os, result, meta);
    else
      os << summary_to_json(result, meta).dump(1) << "\n";
  });
  if (!opt.per_run.empty())
    emit(opt.per_run, [&](std::ostream& os) { write_per_run_csv(os, result, make_meta(cfg, "per_run")); });
  return kExitOk;
}

int cmd_dp_oracle(const Options& opt) {
  const ScenarioConfig cfg = load_with_overrides(opt);
  DpOracle::check_supported(cfg.system);
  PrepareOptions popts;
  popts.with_dp = true;
  popts.dp_workers = resolve_workers(opt.workers);
  const auto prep = prepare(cfg, popts);
  const auto meta = make_meta(cfg, "dp");
  emit(opt.output, [&](std::ostream& os) {
    if (opt.format == "json")
      os << dp_to_json(*prep->dp(), meta).dump(1) << "\n";
    else
      write_dp_csv(os, *prep->dp(), meta);
  });
  return kExitOk;
}

int cmd_dump_gains(const Options& opt) {
  const ScenarioConfig cfg = load_with_overrides(opt);
  const GainSchedule gains = riccati_backward(cfg.system, cfg.cost, cfg.horizon);
  emit(opt.output, [&](std::ostream& os) { write_gains_csv(os, gains, make_meta(cfg, "gains")); });
  return kExitOk;
}

void add_scenario(CLI::App* sub, Options& opt) {
  sub->add_option("scenario_path", opt.scenario, "Scenario JSON file");
  sub->add_option("--scenario", opt.scenario, "Scenario JSON file");
}

void add_common(CLI::App* sub, Options& opt) {
  sub->add_option("--seed", opt.seed, "Override the scenario seed");
  sub->add_option("--runs", opt.runs, "Override the Monte Carlo run count")->check(CLI::PositiveNumber);
  sub->add_option("--policy", opt.policy, "Policy name, or a comma-separated list for montecarlo");
  sub->add_option("--output,-o", opt.output, "Output file (default: stdout)");
  sub->add_option("--workers", opt.workers, "Worker threads (default: HARQ_NC_WORKERS or all cores)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--delta-mode", opt.delta_mode, "Delta term of the switching rule")
      ->check(CLI::IsMember({"zero", "exact"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HARQ networked control simulator"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Options opt;

  auto* validate = app.add_subcommand("validate", "Check a scenario file");
  add_scenario(validate, opt);

  auto* simulate = app.add_subcommand("simulate", "Run one episode and write its trace");
  add_scenario(simulate, opt);
  add_common(simulate, opt);
  simulate->add_option("--run-index", opt.run_index, "Run index within the seed")
      ->check(CLI::NonNegativeNumber);
  simulate->add_option("--format", opt.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  auto* montecarlo = app.add_subcommand("montecarlo", "Monte Carlo estimate of the control loss");
  add_scenario(montecarlo, opt);
  add_common(montecarlo, opt);
  montecarlo->add_option("--format", opt.format, "json or csv")->check(CLI::IsMember({"csv", "json"}));
  montecarlo->add_option("--per-run", opt.per_run, "Also write per-run losses to this CSV file");

  auto* dp = app.add_subcommand("dp-oracle", "Solve the scalar dynamic program");
  add_scenario(dp, opt);
  add_common(dp, opt);
  dp->add_option("--format", opt.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  dp->add_option("--c1", opt.c1, "Mismatch grid points")->check(CLI::Range(2, 100000));
  dp->add_option("--c2", opt.c2, "Offset grid points")->check(CLI::Range(2, 100000));
  dp->add_option("--c4", opt.c4, "Gauss-Hermite nodes")->check(CLI::Range(1, 200));

  auto* gains = app.add_subcommand("dump-gains", "Write the S and L schedules as CSV");
  add_scenario(gains, opt);
  add_common(gains, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }
  for (auto* sub : app.get_subcommands()) {
    if (opt.scenario.empty()) {
      std::cerr << "error: " << sub->get_name() << " needs a scenario file\n";
      return kExitInvalid;
    }
  }

  try {
    if (validate->parsed()) return cmd_validate(opt);
    if (simulate->parsed()) return cmd_simulate(opt);
    if (montecarlo->parsed()) return cmd_montecarlo(opt);
    if (dp->parsed()) return cmd_dp_oracle(opt);
    if (gains->parsed()) return cmd_dump_gains(opt);
  } catch (const ValidationError& e) {  // includes UnsupportedError
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitInvalid;
}
