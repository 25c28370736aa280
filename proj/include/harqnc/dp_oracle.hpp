#pragma once

#include "harqnc/estimator.hpp"
#include "harqnc/lqr.hpp"
#include "harqnc/model.hpp"

#include <cstdint>
#include <vector>

namespace harqnc {

/// Gauss-Hermite rule for a standard normal variable: E[f(Z)] ~= sum_q w_q f(x_q).
/// Nodes are ascending, weights sum to one. Built with Golub-Welsch.
struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};

Quadrature gauss_hermite_normal(int count);

/// Uniform 1-D grid. With count == 1 the axis collapses to the single node lo.
struct GridAxis {
  double lo = 0.0;
  double hi = 0.0;
  int count = 1;

  double node(int i) const;
  /// Cell index and weight of x, clamped to the grid ends.
  void locate(double x, int& cell, double& weight) const;
};

/// Tabulated encoder value function V^e_k for a scalar plant.
///
/// State per node: mismatch e_tilde, the retransmission offset eps (the value
/// the pending packet would leave unexplained), tau and the fading state. For
/// a scalar plant eps summarizes the innovation window exactly, so the window
/// grid collapses to one axis. The eps axis has a single node on tau levels
/// where no retransmission is possible (tau = 0 and tau = omega_max + 1).
struct ValueGrid {
  int k = 0;
  GridAxis e_axis;
  std::vector<GridAxis> eps_axis;  // one per tau level
  int tau_levels = 0;              // omega_max + 2
  int fading_states = 0;

  std::vector<double> values;
  std::vector<double> q_tx;
  std::vector<double> q_rtx;            // +inf where RTX is not allowed
  std::vector<std::uint8_t> rtx;        // argmin decision, 1 = RTX
  std::vector<std::size_t> level_offset;

  std::size_t index(int tau, int fading, int i, int j) const;
  std::size_t node_count() const { return values.size(); }
  double interpolate(double e, double eps, int tau, int fading) const;
};

/// Action values at one encoder state, split into the pieces of the Bellman backup.
struct ActionValues {
  bool rtx_allowed = false;
  double q_tx = 0.0;
  double q_rtx = 0.0;
  double lambda_zero = 0.0;
  double lambda_omega = 0.0;
  // Expected continuation value per (decision, outcome).
  double v_fail_tx = 0.0;
  double v_fail_rtx = 0.0;
  double v_success_tx = 0.0;
  double v_success_rtx = 0.0;
  /// Closed-form one-step gap (l_w - l_0) G (A e)^2 + (1 - l_w) G eps^2.
  double one_step_gap = 0.0;
  /// Residual of the exact continuation values:
  /// l_w V[RTX,fail] - l_0 V[TX,fail] - (1 - l_0) V[TX,ok] + (1 - l_w) V[RTX,ok].
  double delta = 0.0;
};

struct DpOptions {
  DpGridSpec grid;
  int workers = 1;
};

/// Finite-horizon Bellman backup of V^e for scalar plants (n = p = 1).
class DpOracle {
 public:
  DpOracle(const ScenarioConfig& cfg, const GainSchedule& gains, const CovarianceSchedule& cov,
           DpOptions opts);

  /// Throws UnsupportedError unless the plant is scalar.
  static void check_supported(const SystemModel& sys);

  /// Builds V^e_{N+1} = 0 and backs up to k = 0.
  void solve();

  /// One backup step: V^e_k from the stored V^e_{k+1}.
  ValueGrid backup_value(int k) const;

  /// Evaluates both decisions at an arbitrary state using V^e_{k+1}.
  /// With with_continuation = false, V^e_{k+1} is treated as zero.
  ActionValues action_values(int k, double e, double eps, int tau, int fading,
                             bool with_continuation = true) const;

  double exact_delta(int k, double e, double eps, int tau, int fading) const;

  /// Argmin decisions at every node of V^e_k (ties go to TX).
  std::vector<Decision> decision_map(int k) const;
  /// Decisions with V^e_{k+1} zeroed inside the comparison.
  std::vector<Decision> lookahead_decision_map(int k) const;

  const ValueGrid& grid(int k) const { return grids_.at(static_cast<std::size_t>(k)); }
  int horizon() const { return horizon_; }
  bool solved() const { return solved_; }
  const Quadrature& quadrature() const { return quad_; }
  const ScenarioConfig& config() const { return cfg_; }

  /// Forward-simulated value of the greedy-from-grid policy started at the
  /// given state at time k: mean of sum_{t=k+1}^{N} (Gamma_t e_t^2 + Gamma_t P_t).
  struct Rollout {
    double mean = 0.0;
    double std_error = 0.0;
  };
  Rollout rollout_value(int k, double e, double eps, int tau, int fading, int rollouts,
                        std::uint64_t seed) const;

 private:
  ValueGrid make_layout(int k) const;
  double scalar(const std::vector<Matrix>& v, int k) const { return v[static_cast<std::size_t>(k)](0, 0); }

  ScenarioConfig cfg_;
  GainSchedule gains_;
  CovarianceSchedule cov_;
  DpOptions opts_;
  int horizon_;
  Quadrature quad_;
  std::vector<double> e_sigma_;
  std::vector<std::vector<double>> eps_sigma_;
  std::vector<ValueGrid> grids_;
  bool solved_ = false;
};

inline constexpr double kDecisionTieTolerance = 1e-12;

}  // namespace harqnc
