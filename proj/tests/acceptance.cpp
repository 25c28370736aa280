// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include "harqnc/estimator.hpp"
#include "harqnc/io.hpp"
#include "harqnc/lqr.hpp"
#include "harqnc/rng.hpp"
#include "harqnc/sim.hpp"

#include "support.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace harqnc;
using namespace harqnc::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void criterion(int id, const std::string& title, double budget_s, const std::function<void(Outcome&)>& body) {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(out);
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail << " [exception: " << e.what() << "]";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > budget_s) {
    out.pass = false;
    out.detail << " [runtime over " << budget_s << " s]";
  }
  failures += !out.pass;
  std::cout << "criterion " << id << ": " << (out.pass ? "PASS" : "FAIL") << "  " << title << " ("
            << std::fixed << std::setprecision(2) << secs << " s)" << std::defaultfloat
            << out.detail.str() << std::endl;
}

ScenarioConfig pendulum_scenario() {
  return load_scenario(std::string(HARQNC_SCENARIO_DIR) + "/pendulum.json");
}

void riccati(Outcome& o) {
  const auto cfg = scalar_config(1, 1, 1, 1, 1, 1, 1, 60, {0.0});
  const auto g = riccati_backward(cfg.system, cfg.cost, cfg.horizon);
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  const double err = std::abs(g.S[0](0, 0) - golden);
  o.detail << "|S_0 - phi| = " << err;
  o.require(err <= 1e-9, "golden-ratio fixed point");

  const auto pc = pendulum_scenario();
  const auto gp = riccati_backward(pc.system, pc.cost, pc.horizon);
  const double rel = rel_diff(gp.S[0], reference_riccati(pc)[0]);
  o.detail << ", pendulum S_0 rel diff = " << rel;
  o.require(rel <= 1e-8, "pendulum S_0 against reference recursion");
}

void filter_oracle(Outcome& o) {
  SystemModel s;
  s.A = Schedule(mat({{1.05, 0.2}, {-0.1, 0.9}}));
  s.B = Schedule(mat({{0.3}, {1.0}}));
  s.C = Schedule(mat({{1.0, 0.5}}));
  s.W = Schedule(mat({{0.4, 0.1}, {0.1, 0.3}}));
  s.V = Schedule(mat({{0.25}}));
  s.m0 = vec({0.5, -1.0});
  s.M0 = mat({{1.0, 0.3}, {0.3, 2.0}});
  Rng rng = make_stream(2024, 0, Substream::ProcessNoise);
  const Matrix fw = covariance_factor(s.W.at(0)), fv = covariance_factor(s.V.at(0));
  Vector x(2), w(2), v(1);
  sample_gaussian(rng, covariance_factor(s.M0), x);
  x += s.m0;
  std::vector<Vector> ys, controls;
  FilterState st;
  double worst = 0.0;
  for (int k = 0; k <= 5; ++k) {
    sample_gaussian(rng, fv, v);
    ys.push_back(s.C.at(k) * x + v);
    st = k == 0 ? kf_initialize(s, ys.back()) : kf_step(st, controls.back(), ys.back(), s);
    const auto b = batch_conditioning(s, controls, ys);
    worst = std::max({worst, (st.x_check - b.mean).cwiseAbs().maxCoeff(),
                      (st.P - b.cov).cwiseAbs().maxCoeff()});
    controls.push_back(vec({std::cos(0.3 * k)}));
    sample_gaussian(rng, fw, w);
    x = s.A.at(k) * x + s.B.at(k) * controls.back() + w;
  }
  o.detail << "max deviation " << worst;
  o.require(worst <= 1e-8, "filter against batch conditioning");
}

void recursion_equivalence(Outcome& o) {
  const auto prep = prepare(pendulum_scenario());
  MonteCarloOptions mc;
  mc.runs = 1000;
  mc.workers = resolve_workers(0);
  mc.episode.check_invariants = true;
  mc.episode.tolerance = 1e-9;
  const auto s = monte_carlo(*prep, prep->config().policy, mc);
  const long long steps = static_cast<long long>(mc.runs) * (prep->horizon() + 1);
  o.detail << "max residuals e_tilde " << s.max_e_tilde_residual << ", e_hat " << s.max_e_hat_residual;
  o.require(s.tx + s.rtx == steps, "TX + RTX = N + 1");
  o.require(s.max_e_tilde_residual <= 1e-9 && s.max_e_hat_residual <= 1e-9, "mismatch recursions");
}

void analytic_loss(Outcome& o) {
  auto cfg = pendulum_scenario();
  cfg.channel.fading[0].lambda = {0.0, 0.0};
  const auto prep = prepare(cfg);
  MonteCarloOptions mc;
  mc.runs = 10000;
  mc.workers = resolve_workers(0);
  const auto s = monte_carlo(*prep, cfg.policy, mc);
  const double expected = analytic_perfect_channel_loss(*prep);
  const double z = (s.mean - expected) / s.std_error;
  o.detail << "MC " << s.mean << " +- " << s.std_error << ", analytic " << expected << ", z = " << z;
  o.require(std::abs(z) <= 3.0, "within 3 standard errors");
  o.require(s.rtx == 0, "no RTX on a perfect link");
}

void non_inferiority(Outcome& o) {
  const auto prep = prepare(pendulum_scenario());
  MonteCarloOptions mc;
  mc.runs = 500;
  mc.workers = resolve_workers(0);
  const auto r = monte_carlo(*prep, {PolicySpec::parse("harq_optimal"), PolicySpec::parse("always_tx")}, mc);
  const auto& h = r.policies[0];
  const auto& tx = r.policies[1];
  const double ez = (h.erasure_fraction - h.expected_erasure_fraction) / h.erasure_std_error;
  o.detail << "harq_optimal " << h.mean << " vs always_tx " << tx.mean << " (paired diff "
           << r.comparisons[0].mean_diff << " +- " << r.comparisons[0].std_error << "); per run TX "
           << double(h.tx) / h.runs << " RTX " << double(h.rtx) / h.runs << " PL "
           << double(h.packet_losses) / h.runs << "; forced tau0 " << h.forced_tau0 << ", omega cap "
           << h.forced_omega_cap << "; erasure " << h.erasure_fraction << " vs "
           << h.expected_erasure_fraction << " (z = " << ez << ")";
  o.require(h.mean <= tx.mean, "mean loss not above always_tx");
  o.require(h.rtx > 0, "RTX used");
  o.require(h.forced_tau0 > 0 && h.forced_omega_cap > 0, "forced rules exercised");
  o.require(std::abs(ez) <= 3.0, "erasure fraction within 3 standard errors");
}

void dp_oracle(Outcome& o) {
  auto cfg = scalar_config(1.2, 1, 1, 1, 1, 1, 1, 6, {0.5, 0.05}, 1);
  const auto gains = riccati_backward(cfg.system, cfg.cost, cfg.horizon);
  const auto cov = precompute_covariances(cfg.system, cfg.horizon);
  auto run = [&](int c) {
    DpOptions opts;
    opts.grid = cfg.dp;
    opts.grid.c1 = opts.grid.c2 = c;
    opts.workers = resolve_workers(0);
    auto dp = std::make_unique<DpOracle>(cfg, gains, cov, opts);
    dp->solve();
    return dp;
  };
  const auto fine = run(201), mid = run(101), coarse = run(51);
  const int N = cfg.horizon;

  bool terminal_zero = true, nonneg = true, map_ok = true;
  long agree = 0, total = 0, compared = 0;
  for (double v : fine->grid(N + 1).values) terminal_zero = terminal_zero && v == 0.0;
  for (int k = 0; k <= N; ++k) {
    const auto& g = fine->grid(k);
    for (double v : g.values) nonneg = nonneg && v >= 0.0;
    const auto look = fine->lookahead_decision_map(k);
    const auto exact = fine->decision_map(k);
    const double a = cfg.system.A.at(k)(0, 0);
    const double gamma = gains.Gamma[static_cast<std::size_t>(k) + 1](0, 0);
    const double l0 = cfg.channel.lambda(0, 0), l1 = cfg.channel.lambda(0, 1);
    for (int i = 0; i < g.e_axis.count; ++i)
      for (int j = 0; j < g.eps_axis[1].count; ++j) {
        const double e = g.e_axis.node(i), eps = g.eps_axis[1].node(j);
        const double omega = (l1 - l0) * gamma * a * a * e * e + (1 - l1) * gamma * eps * eps;
        if (std::abs(omega) > 1e-9 * std::max(1.0, gamma * (a * a * e * e + eps * eps))) {
          ++compared;
          map_ok = map_ok && (look[g.index(1, 0, i, j)] == Decision::Rtx) == (omega < 0.0);
        }
      }
    for (std::size_t i = 0; i < exact.size(); ++i) {
      agree += exact[i] == look[i];
      ++total;
    }
  }
  double d1 = 0.0, d2 = 0.0;
  const auto& gc = coarse->grid(0);
  const auto& gm = mid->grid(0);
  const auto& gf = fine->grid(0);
  for (int tau = 0; tau < gc.tau_levels; ++tau) {
    const int cj = gc.eps_axis[static_cast<std::size_t>(tau)].count;
    for (int i = 0; i < gc.e_axis.count; ++i)
      for (int j = 0; j < cj; ++j) {
        const double vc = gc.values[gc.index(tau, 0, i, j)];
        const double vm = gm.values[gm.index(tau, 0, 2 * i, cj == 1 ? 0 : 2 * j)];
        const double vf = gf.values[gf.index(tau, 0, 4 * i, cj == 1 ? 0 : 4 * j)];
        d1 = std::max(d1, std::abs(vm - vc));
        d2 = std::max(d2, std::abs(vf - vm));
      }
  }
  o.detail << "refinement change 51->101 " << d1 << ", 101->201 " << d2 << "; Omega-sign nodes " << compared
           << "; exact vs lookahead agreement " << double(agree) / double(total);
  o.require(terminal_zero, "V_{N+1} = 0");
  o.require(nonneg, "V >= 0");
  o.require(d2 < d1, "refinement convergence");
  o.require(map_ok && compared > 0, "lookahead map equals closed-form sign");
}

void degenerate_channels(Outcome& o) {
  auto base = pendulum_scenario();
  base.horizon = 200;
  MonteCarloOptions mc;
  mc.runs = 50;
  mc.workers = resolve_workers(0);

  auto perfect = base;
  perfect.channel.fading[0].lambda = {0.0, 0.0};
  const auto sp = monte_carlo(*prepare(perfect), PolicySpec::parse("harq_optimal"), mc);
  o.require(sp.rtx == 0 && sp.packet_losses == 0, "lambda = 0 never retransmits");

  auto dead = base;
  dead.channel.fading[0].lambda = {1.0, 1.0};
  const auto dprep = prepare(dead);
  const auto sd = monte_carlo(*dprep, PolicySpec::parse("age_threshold(1)"), mc);
  o.require(sd.forced_omega_cap > 0, "lambda = 1 reaches the omega cap");
  const auto sdh = monte_carlo(*dprep, PolicySpec::parse("harq_optimal"), mc);
  o.require(sdh.rtx == 0, "lambda = 1 with harq_optimal ties to TX");

  auto flat = base;
  flat.channel.fading[0].lambda = {0.3, 0.3};
  const auto fr = monte_carlo(*prepare(flat), {PolicySpec::parse("harq_optimal"), PolicySpec::parse("always_tx")}, mc);
  o.require(fr.policies[0].rtx == 0, "flat lambda never retransmits");
  o.require(fr.policies[0].per_run == fr.policies[1].per_run, "flat lambda equals always_tx run by run");
  o.detail << "omega-cap hits at lambda = 1: " << sd.forced_omega_cap;
}

std::string render_trace(const PreparedScenario& prep, int run) {
  std::ostringstream os;
  write_trace_csv(os, run_episode(prep, run), make_meta(prep.config(), "trace"));
  return os.str();
}

std::string render_summary(const PreparedScenario& prep, int workers) {
  MonteCarloOptions mc;
  mc.runs = 64;
  mc.workers = workers;
  const std::vector<PolicySpec> pols = {PolicySpec::parse("harq_optimal"), PolicySpec::parse("always_tx"),
                                        PolicySpec::parse("random(0.25)")};
  const auto r = monte_carlo(prep, pols, mc);
  const auto meta = make_meta(prep.config(), "summary");
  std::ostringstream os;
  write_summary_csv(os, r, meta);
  write_per_run_csv(os, r, meta);
  os << summary_to_json(r, meta).dump(2);
  return os.str();
}

void determinism(Outcome& o) {
  const auto a = prepare(pendulum_scenario());
  const auto b = prepare(pendulum_scenario());
  o.require(render_trace(*a, 5) == render_trace(*b, 5), "trace repeat");
  const auto s1 = render_summary(*a, 1);
  o.require(s1 == render_summary(*b, 1), "summary repeat");
  o.require(s1 == render_summary(*a, 3), "summary 1 vs 3 workers");
  o.detail << "trace and summary outputs byte-identical";
}

}  // namespace

int main() {
  criterion(1, "Riccati fixed point and pendulum S_0", 1.0, riccati);
  criterion(2, "filter against batch Gaussian conditioning", 1.0, filter_oracle);
  criterion(3, "mismatch recursions over 1000 pendulum runs", 30.0, recursion_equivalence);
  criterion(4, "perfect-channel loss against the analytic value", 120.0, analytic_loss);
  criterion(5, "harq_optimal not worse than always_tx", 300.0, non_inferiority);
  criterion(6, "scalar DP oracle", 300.0, dp_oracle);
  criterion(7, "degenerate channels", 60.0, degenerate_channels);
  criterion(8, "deterministic outputs", 60.0, determinism);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
