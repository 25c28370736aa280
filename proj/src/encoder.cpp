#include "harqnc/encoder.hpp"

#include "harqnc/dp_oracle.hpp"

namespace harqnc {

std::string_view to_string(ForcedReason r) {
  switch (r) {
    case ForcedReason::Tau0:
      return "tau0";
    case ForcedReason::OmegaCap:
      return "omega_cap";
    case ForcedReason::Threshold:
      return "threshold";
  }
  return "?";
}

const Vector& window_term(const InnovationWindow& window, int t) {
  if (!window.empty()) {
    const int newest = window.recent(0).k;
    const int age = newest - t;
    if (age >= 0 && static_cast<std::size_t>(age) < window.size()) {
      const auto& term = window.recent(static_cast<std::size_t>(age));
      if (term.k == t) return term.gain_nu;
    }
  }
  throw ProtocolError("innovation window underflow: K nu at time " + std::to_string(t) +
                      " is not retained");
}

Vector update_mismatch(const Vector& e_prev, const InnovationWindow& window, int k, int tau_prev,
                       const Ack& ack, const SystemModel& sys) {
  if (ack.gamma == 0) return sys.A.at(k - 1) * e_prev + window_term(window, k);
  if (ack.u == Decision::Tx) return window_term(window, k);
  // Horner form of the sum, oldest innovation first.
  Vector acc = window_term(window, k - tau_prev);
  for (int t = k - tau_prev + 1; t <= k; ++t) acc = sys.A.at(t - 1) * acc + window_term(window, t);
  return acc;
}

Vector compute_epsilon(const InnovationWindow& window, int k, int tau, const SystemModel& sys) {
  if (tau < 1) throw ProtocolError("compute_epsilon: requires tau >= 1");
  Vector acc = window_term(window, k - tau + 1);
  for (int t = k - tau + 2; t <= k; ++t) acc = sys.A.at(t - 1) * acc + window_term(window, t);
  return sys.A.at(k) * acc;
}

double compute_omega_gap(const Vector& e_tilde, const Vector& eps, double lambda_omega,
                         double lambda_zero, const Matrix& A_k, const Matrix& gamma_next,
                         double delta) {
  const Vector ae = A_k * e_tilde;
  const double stale = ae.dot(gamma_next * ae);
  const double residual = eps.dot(gamma_next * eps);
  return (lambda_omega - lambda_zero) * stale + (1.0 - lambda_omega) * residual + delta;
}

DecisionRecord threshold_rule(int tau, int omega, int omega_max, double omega_gap) {
  DecisionRecord out;
  if (tau == 0) {
    out.reason = ForcedReason::Tau0;
    out.u = Decision::Tx;
  } else if (omega > omega_max) {
    out.reason = ForcedReason::OmegaCap;
    out.u = Decision::Tx;
  } else {
    out.reason = ForcedReason::Threshold;
    out.omega = omega_gap;
    out.u = omega_gap >= 0.0 ? Decision::Tx : Decision::Rtx;
  }
  return out;
}

Encoder::Encoder(const SystemModel& sys, const ChannelSpec& spec, const CovarianceSchedule& cov,
                 const GainSchedule& gains, DeltaMode mode, const DpOracle* dp)
    : sys_(&sys),
      spec_(&spec),
      cov_(&cov),
      gains_(&gains),
      mode_(mode),
      dp_(dp),
      filter_(sys, cov),
      window_(static_cast<std::size_t>(spec.omega_max) + 1),
      link_(initial_link(spec)) {
  if (mode_ == DeltaMode::Exact && dp_ == nullptr)
    throw UnsupportedError("encoder: exact Delta mode needs a solved DP oracle");
}

void Encoder::push_innovation() {
  InnovationTerm term;
  term.k = filter_.k();
  term.gain_nu = filter_.K() * filter_.nu();
  window_.push(std::move(term));
}

void Encoder::start(const Vector& y0, int fading_state) {
  filter_.initialize(y0);
  window_.clear();
  push_innovation();
  e_tilde_ = window_term(window_, 0);
  link_ = initial_link(*spec_);
  link_.fading_state = fading_state;
}

void Encoder::advance(const Vector& y, const Vector& a_prev, const Ack& ack, int fading_state) {
  filter_.step(a_prev, y);
  push_innovation();
  const int k = filter_.k();
  e_tilde_ = update_mismatch(e_tilde_, window_, k, link_.tau, ack, *sys_);

  LinkState next;
  next.tau = next_tau(link_.tau, ack.u, ack.gamma);
  next.omega = next.tau;
  next.fading_state = fading_state;
  next.last_u = ack.u;
  next.last_gamma = ack.gamma;
  next.k = k;
  link_ = next;
}

Vector Encoder::epsilon() const { return compute_epsilon(window_, k(), link_.tau, *sys_); }

double Encoder::omega_gap(double* delta_out, double* eps_norm_out) const {
  const int k = this->k();
  const Vector eps = epsilon();
  const double l0 = spec_->lambda(link_.fading_state, 0);
  const double lw = spec_->lambda(link_.fading_state, link_.omega);
  double delta = 0.0;
  if (mode_ == DeltaMode::Exact)
    delta = dp_->exact_delta(k, e_tilde_(0), eps(0), link_.tau, link_.fading_state);
  if (delta_out) *delta_out = delta;
  if (eps_norm_out) *eps_norm_out = eps.norm();
  return compute_omega_gap(e_tilde_, eps, lw, l0, sys_->A.at(k),
                           gains_->Gamma[static_cast<std::size_t>(k) + 1], delta);
}

DecisionRecord Encoder::decide() const {
  if (link_.tau == 0 || link_.omega > spec_->omega_max)
    return threshold_rule(link_.tau, link_.omega, spec_->omega_max, 0.0);
  double delta = 0.0;
  double eps_norm = 0.0;
  const double omega = omega_gap(&delta, &eps_norm);
  auto out = threshold_rule(link_.tau, link_.omega, spec_->omega_max, omega);
  out.delta = delta;
  out.epsilon_norm = eps_norm;
  return out;
}

}  // namespace harqnc
