#include "harqnc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <thread>

namespace harqnc {

PreparedScenario::PreparedScenario(ScenarioConfig cfg, const PrepareOptions& opts)
    : cfg_(std::move(cfg)) {
  gains_ = riccati_backward(cfg_.system, cfg_.cost, cfg_.horizon);
  FilterOptions fopts;
  cov_ = precompute_covariances(cfg_.system, cfg_.horizon, fopts);
  const bool need_dp =
      opts.with_dp || cfg_.policy.kind == PolicySpec::Kind::HarqOptimalExactDelta;
  if (need_dp) {
    DpOptions dopts;
    dopts.grid = cfg_.dp;
    dopts.workers = opts.dp_workers;
    dp_ = std::make_unique<DpOracle>(cfg_, gains_, cov_, dopts);
    dp_->solve();
  }
}

std::shared_ptr<const PreparedScenario> prepare(const ScenarioConfig& cfg,
                                                const PrepareOptions& opts) {
  const auto violations = validate_scenario(cfg);
  if (!violations.empty()) throw ValidationError(format_violations(violations));
  return std::make_shared<const PreparedScenario>(cfg, opts);
}

// ---------------------------------------------------------------------------
// Policies

namespace {

bool rtx_allowed(const LinkState& link, int omega_max) {
  return link.tau >= 1 && link.omega <= omega_max;
}

/// Forced cases first; otherwise a Threshold record with the Delta = 0
/// statistic attached for diagnostics.
DecisionRecord baseline_record(const Encoder& enc) {
  const auto& link = enc.link_view();
  const int omega_max = enc.channel_spec().omega_max;
  if (!rtx_allowed(link, omega_max)) return threshold_rule(link.tau, link.omega, omega_max, 0.0);
  DecisionRecord out;
  out.reason = ForcedReason::Threshold;
  double eps_norm = 0.0;
  out.omega = enc.omega_gap(nullptr, &eps_norm);
  out.delta = 0.0;
  out.epsilon_norm = eps_norm;
  return out;
}

class ThresholdPolicy final : public SwitchingPolicy {
 public:
  explicit ThresholdPolicy(DeltaMode mode) : mode_(mode) {}
  DecisionRecord decide(const Encoder& enc, Rng&) const override { return enc.decide(); }
  DeltaMode delta_mode() const override { return mode_; }
  std::string name() const override {
    return mode_ == DeltaMode::Exact ? "harq_optimal_exact_delta" : "harq_optimal";
  }

 private:
  DeltaMode mode_;
};

class AlwaysTxPolicy final : public SwitchingPolicy {
 public:
  DecisionRecord decide(const Encoder& enc, Rng&) const override {
    auto out = baseline_record(enc);
    out.u = Decision::Tx;
    return out;
  }
  std::string name() const override { return "always_tx"; }
};

class RandomPolicy final : public SwitchingPolicy {
 public:
  explicit RandomPolicy(double p) : p_(p) {}
  DecisionRecord decide(const Encoder& enc, Rng& rng) const override {
    // One draw per step whatever the state, so the stream stays aligned.
    const double u = uniform01(rng);
    auto out = baseline_record(enc);
    const bool allowed = rtx_allowed(enc.link_view(), enc.channel_spec().omega_max);
    out.u = allowed && u < p_ ? Decision::Rtx : Decision::Tx;
    return out;
  }
  std::string name() const override { return PolicySpec{PolicySpec::Kind::Random, p_, 1}.to_string(); }

 private:
  double p_;
};

class AgeThresholdPolicy final : public SwitchingPolicy {
 public:
  explicit AgeThresholdPolicy(int d) : d_(d) {}
  DecisionRecord decide(const Encoder& enc, Rng&) const override {
    auto out = baseline_record(enc);
    const int tau = enc.link_view().tau;
    out.u = tau >= 1 && tau <= std::min(d_, enc.channel_spec().omega_max) ? Decision::Rtx
                                                                            : Decision::Tx;
    return out;
  }
  std::string name() const override {
    return PolicySpec{PolicySpec::Kind::AgeThreshold, 0.0, d_}.to_string();
  }

 private:
  int d_;
};

}  // namespace

std::unique_ptr<SwitchingPolicy> baseline_policy(const std::string& name, double param) {
  if (name == "always_tx") return std::make_unique<AlwaysTxPolicy>();
  if (name == "random") {
    if (!(param >= 0.0 && param <= 1.0))
      throw ValidationError("random(p): p must lie in [0, 1]");
    return std::make_unique<RandomPolicy>(param);
  }
  if (name == "age_threshold") {
    if (param < 1.0 || param != std::floor(param))
      throw ValidationError("age_threshold(d): d must be an integer >= 1");
    return std::make_unique<AgeThresholdPolicy>(static_cast<int>(param));
  }
  throw ValidationError("unknown baseline policy '" + name + "'");
}

std::unique_ptr<SwitchingPolicy> make_policy(const PolicySpec& spec) {
  switch (spec.kind) {
    case PolicySpec::Kind::HarqOptimal:
      return std::make_unique<ThresholdPolicy>(DeltaMode::Zero);
    case PolicySpec::Kind::HarqOptimalExactDelta:
      return std::make_unique<ThresholdPolicy>(DeltaMode::Exact);
    case PolicySpec::Kind::AlwaysTx:
      return baseline_policy("always_tx");
    case PolicySpec::Kind::Random:
      return baseline_policy("random", spec.p);
    case PolicySpec::Kind::AgeThreshold:
      return baseline_policy("age_threshold", spec.d);
  }
  throw ValidationError("unknown policy");
}

// ---------------------------------------------------------------------------
// Episode

namespace {

struct ErrorHistory {
  int k = -1;
  Vector filter_error;  // x_k - x_check_k
  Vector noise;         // w_k
};

double quad_form(const Vector& v, const Matrix& m) { return v.dot(m * v); }

[[noreturn]] void invariant_failure(int run, int k, const std::string& what) {
  std::ostringstream os;
  os << "invariant violated in run " << run << " at k=" << k << ": " << what;
  throw ProtocolError(os.str());
}

}  // namespace

RunTrace run_episode(const PreparedScenario& prep, const SwitchingPolicy& policy, int run_index,
                     const EpisodeOptions& opts) {
  const auto& cfg = prep.config();
  const auto& sys = cfg.system;
  const auto& gains = prep.gains();
  const int N = cfg.horizon;
  const double scale = 1.0 / static_cast<double>(N + 1);
  const int omega_max = cfg.channel.omega_max;

  if (policy.delta_mode() == DeltaMode::Exact && prep.dp() == nullptr)
    throw UnsupportedError("policy " + policy.name() + " needs the scalar DP oracle");

  RunTrace trace;
  trace.run_index = run_index;
  trace.seed = cfg.seed;
  trace.policy = policy.name();
  if (opts.record_steps) trace.steps.reserve(static_cast<std::size_t>(N) + 2);

  RunStreams rng(cfg.seed, static_cast<std::uint64_t>(run_index));
  const Matrix m0_factor = covariance_factor(sys.M0);
  std::vector<Matrix> w_factor, v_factor;
  auto factor_for = [](std::vector<Matrix>& cache, const Schedule& s, int k) -> const Matrix& {
    const auto idx = static_cast<std::size_t>(s.time_varying() ? k : 0);
    if (cache.size() <= idx) cache.resize(idx + 1);
    if (cache[idx].size() == 0) cache[idx] = covariance_factor(s.at(k));
    return cache[idx];
  };

  Encoder enc(sys, cfg.channel, prep.covariances(), gains, policy.delta_mode(), prep.dp());
  Channel channel(cfg.channel);
  DecoderState dec = decoder_initialize(sys, omega_max);

  Vector x(sys.n()), y(sys.p()), w(sys.n()), v(sys.p()), a;
  sample_gaussian(rng.process, m0_factor, x);
  x += sys.m0;

  RingBuffer<ErrorHistory> history(static_cast<std::size_t>(omega_max) + 2);
  Vector e_hat_rec = x - sys.m0;  // x_0 - x_hat_0

  Ack ack_prev{};
  int tau_prev = 0;
  ChannelOutput z;  // z_k
  double total = 0.0;

  for (int k = 0; k <= N; ++k) {
    // (1) measurement
    sample_gaussian(rng.measurement, factor_for(v_factor, sys.V, k), v);
    y.noalias() = sys.C.at(k) * x;
    y += v;

    // (2) encoder, (3) decoder
    if (k == 0) {
      enc.start(y, channel.link().fading_state);
    } else {
      enc.advance(y, a, ack_prev, channel.link().fading_state);
      advance_decoder(dec, z, ack_prev, tau_prev, sys);

      // Error recursion from the true state side.
      if (ack_prev.gamma == 0) {
        e_hat_rec = sys.A.at(k - 1) * e_hat_rec + history.recent(0).noise;
      } else {
        const int origin = ack_prev.u == Decision::Tx ? k - 1 : k - tau_prev - 1;
        const auto& start = history.recent(static_cast<std::size_t>(k - 1 - origin));
        if (start.k != origin) invariant_failure(run_index, k, "error history underflow");
        Vector acc = start.filter_error;
        for (int t = origin; t < k; ++t)
          acc = sys.A.at(t) * acc + history.recent(static_cast<std::size_t>(k - 1 - t)).noise;
        e_hat_rec = std::move(acc);
      }
    }

    const Vector& x_check = enc.x_check();
    const Vector& x_hat = dec.x_hat;

    if (opts.check_invariants) {
      if (channel.link().tau != enc.link_view().tau)
        invariant_failure(run_index, k, "channel tau " + std::to_string(channel.link().tau) +
                                            " != encoder tau " + std::to_string(enc.link_view().tau));
      if (enc.link_view().omega != enc.link_view().tau)
        invariant_failure(run_index, k, "omega != tau");
      const double et = (enc.e_tilde() - (x_check - x_hat)).norm() /
                        std::max(1.0, x_check.norm());
      const double eh = (e_hat_rec - (x - x_hat)).norm() / std::max(1.0, x.norm());
      trace.max_e_tilde_residual = std::max(trace.max_e_tilde_residual, et);
      trace.max_e_hat_residual = std::max(trace.max_e_hat_residual, eh);
      if (!(et <= opts.tolerance))
        invariant_failure(run_index, k, "e_tilde recursion differs from x_check - x_hat by " +
                                            std::to_string(et));
      if (!(eh <= opts.tolerance))
        invariant_failure(run_index, k, "e_hat recursion differs from x - x_hat by " +
                                            std::to_string(eh));
    }

    // (4) control
    a = control_input(dec, gains);

    // (5) decision and transmission
    const int tau_now = channel.link().tau;
    const int fading_now = channel.link().fading_state;
    DecisionRecord d = policy.decide(enc, rng.policy);
    if (opts.check_invariants && d.u == Decision::Rtx &&
        (tau_now == 0 || enc.link_view().omega > omega_max))
      invariant_failure(run_index, k, "RTX chosen with tau = 0 or omega above the cap");
    Transmission tr = channel.transmit(d.u, x_check, rng.erasure, rng.fading);

    const double stage = scale * (quad_form(x, cfg.cost.Q.at(k)) + quad_form(a, cfg.cost.R.at(k)));
    total += stage;

    if (d.u == Decision::Tx) ++trace.tx; else ++trace.rtx;
    if (tr.gamma == 0) ++trace.packet_losses;
    if (d.reason == ForcedReason::Tau0) ++trace.forced_tau0;
    if (d.reason == ForcedReason::OmegaCap) ++trace.forced_omega_cap;
    trace.lambda_sum += tr.lambda;
    trace.lambda_var_sum += tr.lambda * (1.0 - tr.lambda);

    if (opts.record_steps) {
      StepRecord rec;
      rec.k = k;
      rec.x = x;
      rec.y = y;
      rec.x_check = x_check;
      rec.x_hat = x_hat;
      rec.a = a;
      rec.u = d.u;
      rec.reason = d.reason;
      rec.gamma = tr.gamma;
      rec.tau = tau_now;
      rec.omega = enc.link_view().omega;
      rec.fading_state = fading_now;
      rec.lambda_used = tr.lambda;
      rec.z_delivered = z.is_delivered();
      rec.delivered_origin = z.is_delivered() ? z.origin : -1;
      rec.stage_cost = stage;
      rec.omega_gap = d.omega;
      rec.delta = d.delta;
      rec.e_tilde_norm = enc.e_tilde().norm();
      rec.e_hat_norm = (x - x_hat).norm();
      rec.epsilon_norm = d.epsilon_norm;
      trace.steps.push_back(std::move(rec));
    }

    // (6) plant
    sample_gaussian(rng.process, factor_for(w_factor, sys.W, k), w);
    history.push({k, x - x_check, w});
    x = sys.A.at(k) * x + sys.B.at(k) * a + w;

    ack_prev = Ack{d.u, tr.gamma};
    tau_prev = tau_now;
    z = std::move(tr.z);
  }

  const double terminal = scale * quad_form(x, cfg.cost.Q.at(N + 1));
  total += terminal;
  trace.loss = total;

  if (opts.record_steps) {
    StepRecord rec;
    rec.k = N + 1;
    rec.x = x;
    rec.tau = channel.link().tau;
    rec.omega = channel.link().omega;
    rec.fading_state = channel.link().fading_state;
    rec.z_delivered = z.is_delivered();
    rec.delivered_origin = z.is_delivered() ? z.origin : -1;
    rec.stage_cost = terminal;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rec.lambda_used = nan;
    rec.omega_gap = nan;
    rec.delta = nan;
    rec.e_tilde_norm = nan;
    rec.e_hat_norm = nan;
    rec.epsilon_norm = nan;
    trace.steps.push_back(std::move(rec));
  }
  return trace;
}

RunTrace run_episode(const PreparedScenario& prep, int run_index, const EpisodeOptions& opts) {
  const auto policy = make_policy(prep.config().policy);
  return run_episode(prep, *policy, run_index, opts);
}

double evaluate_loss(const RunTrace& trace, const CostSpec& cost) {
  if (trace.steps.empty()) throw std::invalid_argument("evaluate_loss: trace has no recorded steps");
  const int last = trace.steps.back().k;
  double sum = 0.0;
  for (const auto& s : trace.steps) {
    sum += quad_form(s.x, cost.Q.at(s.k));
    if (s.k < last) sum += quad_form(s.a, cost.R.at(s.k));
  }
  return sum / static_cast<double>(last);
}

// ---------------------------------------------------------------------------
// Monte Carlo

Quantiles compute_quantiles(std::vector<double> values) {
  Quantiles q;
  if (values.empty()) return q;
  std::sort(values.begin(), values.end());
  auto at = [&](double p) {
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
  };
  q.min = values.front();
  q.p05 = at(0.05);
  q.p25 = at(0.25);
  q.p50 = at(0.50);
  q.p75 = at(0.75);
  q.p95 = at(0.95);
  q.max = values.back();
  return q;
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("HARQ_NC_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_error_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

MonteCarloResult monte_carlo(const PreparedScenario& prep, const std::vector<PolicySpec>& policies,
                             const MonteCarloOptions& opts) {
  if (opts.runs < 1) throw ValidationError("monte_carlo: runs must be >= 1");
  if (policies.empty()) throw ValidationError("monte_carlo: no policy given");
  const int runs = opts.runs;
  const auto n_pol = policies.size();

  std::vector<std::unique_ptr<SwitchingPolicy>> impl;
  for (const auto& p : policies) impl.push_back(make_policy(p));

  // results[p][r]; every slot is written by exactly one worker.
  std::vector<std::vector<RunTrace>> results(n_pol, std::vector<RunTrace>(static_cast<std::size_t>(runs)));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(runs));

  auto work = [&](int first, int stride) {
    for (int r = first; r < runs; r += stride) {
      try {
        for (std::size_t p = 0; p < n_pol; ++p)
          results[p][static_cast<std::size_t>(r)] = run_episode(prep, *impl[p], r, opts.episode);
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
      }
    }
  };
  const int workers = std::clamp(opts.workers, 1, runs);
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  const double steps = static_cast<double>(prep.horizon() + 1);
  MonteCarloResult out;
  for (std::size_t p = 0; p < n_pol; ++p) {
    LossSummary s;
    s.policy = impl[p]->name();
    s.runs = runs;
    double lambda_sum = 0.0, lambda_var = 0.0;
    for (const auto& t : results[p]) {
      s.per_run.push_back(t.loss);
      s.tx += t.tx;
      s.rtx += t.rtx;
      s.packet_losses += t.packet_losses;
      s.forced_tau0 += t.forced_tau0;
      s.forced_omega_cap += t.forced_omega_cap;
      lambda_sum += t.lambda_sum;
      lambda_var += t.lambda_var_sum;
      s.max_e_tilde_residual = std::max(s.max_e_tilde_residual, t.max_e_tilde_residual);
      s.max_e_hat_residual = std::max(s.max_e_hat_residual, t.max_e_hat_residual);
    }
    const double attempts = steps * runs;
    s.mean = mean_of(s.per_run);
    s.std_error = std_error_of(s.per_run, s.mean);
    s.quantiles = compute_quantiles(s.per_run);
    s.erasure_fraction = static_cast<double>(s.packet_losses) / attempts;
    s.expected_erasure_fraction = lambda_sum / attempts;
    s.erasure_std_error = std::sqrt(lambda_var) / attempts;
    out.policies.push_back(std::move(s));
  }
  for (std::size_t p = 1; p < n_pol; ++p) {
    std::vector<double> diff(static_cast<std::size_t>(runs));
    for (std::size_t r = 0; r < diff.size(); ++r)
      diff[r] = out.policies[p].per_run[r] - out.policies[0].per_run[r];
    PairedComparison c;
    c.a = out.policies[p].policy;
    c.b = out.policies[0].policy;
    c.mean_diff = mean_of(diff);
    c.std_error = std_error_of(diff, c.mean_diff);
    out.comparisons.push_back(c);
  }
  return out;
}

LossSummary monte_carlo(const PreparedScenario& prep, const PolicySpec& policy,
                        const MonteCarloOptions& opts) {
  return std::move(monte_carlo(prep, std::vector<PolicySpec>{policy}, opts).policies.front());
}

double analytic_perfect_channel_loss(const PreparedScenario& prep) {
  const auto& cfg = prep.config();
  const auto& sys = cfg.system;
  const auto& g = prep.gains();
  const auto& cov = prep.covariances();
  const int N = cfg.horizon;
  double sum = quad_form(sys.m0, g.S[0]) + (g.S[0] * sys.M0).trace();
  for (int k = 0; k <= N; ++k)
    sum += (g.S[static_cast<std::size_t>(k) + 1] * sys.W.at(k)).trace();
  sum += (g.Gamma[0] * sys.M0).trace();
  for (int k = 1; k <= N; ++k)
    sum += (g.Gamma[static_cast<std::size_t>(k)] * cov.M[static_cast<std::size_t>(k)]).trace();
  return sum / static_cast<double>(N + 1);
}

}  // namespace harqnc
