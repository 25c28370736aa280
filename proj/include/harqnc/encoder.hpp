#pragma once

#include "harqnc/channel.hpp"
#include "harqnc/estimator.hpp"
#include "harqnc/lqr.hpp"
#include "harqnc/ring_buffer.hpp"

#include <limits>
#include <string_view>

namespace harqnc {

class DpOracle;

/// How the value residual Delta_k enters the threshold statistic.
enum class DeltaMode {
  Zero,   // one-step lookahead
  Exact,  // read from the scalar DP oracle
};

/// Why a decision was taken: forced by tau = 0, forced by the retransmission
/// cap, or chosen by the threshold test (or a baseline rule).
enum class ForcedReason { Tau0, OmegaCap, Threshold };

std::string_view to_string(ForcedReason r);

/// K_t nu_t tagged with its time index.
struct InnovationTerm {
  int k = -1;
  Vector gain_nu;
};

using InnovationWindow = RingBuffer<InnovationTerm>;

/// K_t nu_t for time t; throws ProtocolError if t is no longer retained.
const Vector& window_term(const InnovationWindow& window, int t);

/// Estimation mismatch recursion at time k from the step k-1 acknowledgment.
///   TX delivered:  K_k nu_k
///   RTX delivered: sum_{t=0}^{tau_prev} A_{k-1}...A_{k-t} K_{k-t} nu_{k-t}
///   erased:        A_{k-1} e_prev + K_k nu_k
Vector update_mismatch(const Vector& e_prev, const InnovationWindow& window, int k, int tau_prev,
                       const Ack& ack, const SystemModel& sys);

/// eps_k = sum_{t=0}^{tau-1} A_k A_{k-1}...A_{k-t} K_{k-t} nu_{k-t}, i.e. the
/// part of A_k x_check_k a successful retransmission would not convey.
Vector compute_epsilon(const InnovationWindow& window, int k, int tau, const SystemModel& sys);

/// Omega_k = (l_w - l_0) e' A' G A e + (1 - l_w) eps' G eps + delta, with G = Gamma_{k+1}.
double compute_omega_gap(const Vector& e_tilde, const Vector& eps, double lambda_omega,
                         double lambda_zero, const Matrix& A_k, const Matrix& gamma_next,
                         double delta);

struct DecisionRecord {
  Decision u = Decision::Tx;
  ForcedReason reason = ForcedReason::Tau0;
  double omega = std::numeric_limits<double>::quiet_NaN();
  double delta = std::numeric_limits<double>::quiet_NaN();
  double epsilon_norm = std::numeric_limits<double>::quiet_NaN();
};

/// TX if tau = 0, or omega > omega_max, or Omega >= 0; RTX otherwise.
DecisionRecord threshold_rule(int tau, int omega, int omega_max, double omega_gap);

/// Sensor-side decision maker: Kalman filter, mismatch bookkeeping, innovation
/// window and the TX/RTX switching rule. The link view is rebuilt from
/// acknowledgments only.
class Encoder {
 public:
  Encoder(const SystemModel& sys, const ChannelSpec& spec, const CovarianceSchedule& cov,
          const GainSchedule& gains, DeltaMode mode = DeltaMode::Zero, const DpOracle* dp = nullptr);

  /// Time 0: filter initialization and e_tilde_0 = K_0 nu_0.
  void start(const Vector& y0, int fading_state);
  /// Time k > 0: filter step on y_k, then the mismatch update for the step k-1 ack.
  void advance(const Vector& y, const Vector& a_prev, const Ack& ack, int fading_state);

  /// Needs tau >= 1.
  Vector epsilon() const;
  /// Omega_k and the Delta_k used; needs 1 <= tau <= omega_max.
  double omega_gap(double* delta_out = nullptr, double* eps_norm_out = nullptr) const;
  DecisionRecord decide() const;

  int k() const { return filter_.k(); }
  const Vector& x_check() const { return filter_.x_check(); }
  const Vector& nu() const { return filter_.nu(); }
  const Vector& e_tilde() const { return e_tilde_; }
  const LinkState& link_view() const { return link_; }
  const InnovationWindow& window() const { return window_; }
  const ChannelSpec& channel_spec() const { return *spec_; }
  DeltaMode delta_mode() const { return mode_; }

 private:
  void push_innovation();

  const SystemModel* sys_;
  const ChannelSpec* spec_;
  const CovarianceSchedule* cov_;
  const GainSchedule* gains_;
  DeltaMode mode_;
  const DpOracle* dp_;

  ScheduledFilter filter_;
  Vector e_tilde_;
  InnovationWindow window_;
  LinkState link_;
};

}  // namespace harqnc
