#pragma once

#include "harqnc/decoder.hpp"
#include "harqnc/dp_oracle.hpp"
#include "harqnc/encoder.hpp"

#include <memory>
#include <string>
#include <vector>

namespace harqnc {

struct PrepareOptions {
  /// Solve the scalar DP oracle even if the scenario policy does not need it.
  bool with_dp = false;
  int dp_workers = 1;
};

/// A validated scenario with its data-independent schedules. Encoders and
/// filters keep pointers into it, so it never moves once built.
class PreparedScenario {
 public:
  explicit PreparedScenario(ScenarioConfig cfg, const PrepareOptions& opts = {});
  PreparedScenario(const PreparedScenario&) = delete;
  PreparedScenario& operator=(const PreparedScenario&) = delete;

  const ScenarioConfig& config() const { return cfg_; }
  const GainSchedule& gains() const { return gains_; }
  const CovarianceSchedule& covariances() const { return cov_; }
  /// nullptr unless a DP oracle was solved.
  const DpOracle* dp() const { return dp_.get(); }
  int horizon() const { return cfg_.horizon; }

 private:
  ScenarioConfig cfg_;
  GainSchedule gains_;
  CovarianceSchedule cov_;
  std::unique_ptr<DpOracle> dp_;
};

/// Validates, precomputes gains and covariances, and solves the DP oracle when
/// the policy (or opts) asks for it. Throws ValidationError on a bad config.
std::shared_ptr<const PreparedScenario> prepare(const ScenarioConfig& cfg,
                                                const PrepareOptions& opts = {});

/// Decision rule with the same inputs as Encoder::decide plus a policy stream.
class SwitchingPolicy {
 public:
  virtual ~SwitchingPolicy() = default;
  virtual DecisionRecord decide(const Encoder& enc, Rng& policy_rng) const = 0;
  virtual DeltaMode delta_mode() const { return DeltaMode::Zero; }
  virtual std::string name() const = 0;
};

std::unique_ptr<SwitchingPolicy> make_policy(const PolicySpec& spec);

/// always_tx, random(p) or age_threshold(d). Throws ValidationError for an
/// unknown name, p outside [0, 1] or d < 1.
std::unique_ptr<SwitchingPolicy> baseline_policy(const std::string& name, double param = 0.0);

/// One row per time step k = 0..N+1. The last row only carries x_{N+1} and
/// the terminal cost.
struct StepRecord {
  int k = 0;
  Vector x, y, x_check, x_hat, a;
  Decision u = Decision::Tx;
  ForcedReason reason = ForcedReason::Tau0;
  int gamma = -1;
  int tau = 0;
  int omega = 0;
  int fading_state = 0;
  double lambda_used = 0.0;
  bool z_delivered = false;  // status of z_k
  int delivered_origin = -1; // origin time of the payload in z_k
  double stage_cost = 0.0;
  double omega_gap = 0.0;    // NaN when the decision was forced
  double delta = 0.0;
  double e_tilde_norm = 0.0;
  double e_hat_norm = 0.0;
  double epsilon_norm = 0.0;
};

struct RunTrace {
  int run_index = 0;
  std::uint64_t seed = 0;
  std::string policy;
  std::vector<StepRecord> steps;  // empty when not recorded

  int tx = 0;
  int rtx = 0;
  int packet_losses = 0;
  int forced_tau0 = 0;
  int forced_omega_cap = 0;
  double loss = 0.0;  // realized Upsilon
  double lambda_sum = 0.0;       // sum of lambda_used over k = 0..N
  double lambda_var_sum = 0.0;   // sum of lambda (1 - lambda)
  double max_e_tilde_residual = 0.0;
  double max_e_hat_residual = 0.0;
};

struct EpisodeOptions {
  bool record_steps = true;
  /// Per-step cross checks between modules; a failure throws ProtocolError.
  bool check_invariants = true;
  double tolerance = 1e-9;
};

RunTrace run_episode(const PreparedScenario& prep, const SwitchingPolicy& policy, int run_index,
                     const EpisodeOptions& opts = {});
/// Uses the policy named in the scenario.
RunTrace run_episode(const PreparedScenario& prep, int run_index, const EpisodeOptions& opts = {});

/// (1/(N+1)) [sum_{k=0}^{N+1} x'Q x + sum_{k=0}^{N} a'R a] from recorded steps.
double evaluate_loss(const RunTrace& trace, const CostSpec& cost);

struct Quantiles {
  double min = 0, p05 = 0, p25 = 0, p50 = 0, p75 = 0, p95 = 0, max = 0;
};

/// Linear-interpolation quantiles of the values (they need not be sorted).
Quantiles compute_quantiles(std::vector<double> values);

struct LossSummary {
  std::string policy;
  int runs = 0;
  double mean = 0.0;
  double std_error = 0.0;
  Quantiles quantiles;
  long long tx = 0, rtx = 0, packet_losses = 0;
  long long forced_tau0 = 0, forced_omega_cap = 0;
  double erasure_fraction = 0.0;
  /// Mean of lambda_used over all transmissions and its binomial standard error.
  double expected_erasure_fraction = 0.0;
  double erasure_std_error = 0.0;
  double max_e_tilde_residual = 0.0;
  double max_e_hat_residual = 0.0;
  std::vector<double> per_run;
};

/// Paired difference mean(a) - mean(b) over common random numbers.
struct PairedComparison {
  std::string a, b;
  double mean_diff = 0.0;
  double std_error = 0.0;
};

struct MonteCarloOptions {
  int runs = 1;
  int workers = 1;
  EpisodeOptions episode{false, true, 1e-9};
};

struct MonteCarloResult {
  std::vector<LossSummary> policies;
  std::vector<PairedComparison> comparisons;  // each later policy against the first
};

MonteCarloResult monte_carlo(const PreparedScenario& prep, const std::vector<PolicySpec>& policies,
                             const MonteCarloOptions& opts);
LossSummary monte_carlo(const PreparedScenario& prep, const PolicySpec& policy,
                        const MonteCarloOptions& opts);

/// Expected loss under a perfect channel (lambda = 0 everywhere):
/// (1/(N+1)) [m0'S0 m0 + tr(S0 M0) + sum_k tr(S_{k+1} W_k) + sum_k tr(Gamma_k M_k)].
double analytic_perfect_channel_loss(const PreparedScenario& prep);

/// Number of workers from a flag value, HARQ_NC_WORKERS, then hardware concurrency.
int resolve_workers(int requested);

}  // namespace harqnc
