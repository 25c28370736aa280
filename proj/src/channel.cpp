#include "harqnc/channel.hpp"

namespace harqnc {

int next_tau(int tau, Decision u, int gamma) {
  if (gamma == 0) return u == Decision::Tx ? 1 : tau + 1;
  return 0;
}

LinkState initial_link(const ChannelSpec& spec) {
  LinkState link;
  link.fading_state = spec.initial_state;
  return link;
}

double error_rate(const ChannelSpec& spec, const LinkState& link, Decision u) {
  if (u == Decision::Tx) return spec.lambda(link.fading_state, 0);
  if (link.tau == 0) throw ProtocolError("error_rate: RTX requested with nothing pending (tau = 0)");
  return spec.lambda(link.fading_state, link.omega);
}

int step_fading(const ChannelSpec& spec, int state, Rng& rng) {
  const double u = uniform01(rng);
  const int count = spec.state_count();
  if (count == 1) return state;
  double acc = 0.0;
  for (int j = 0; j < count; ++j) {
    acc += spec.transition(state, j);
    if (u < acc) return j;
  }
  // Rounding in the row sum; fall back to the last state with positive mass.
  for (int j = count - 1; j >= 0; --j)
    if (spec.transition(state, j) > 0.0) return j;
  return state;
}

Channel::Channel(const ChannelSpec& spec) : spec_(&spec), link_(initial_link(spec)) {}

Transmission Channel::transmit(Decision u, const Vector& fresh_payload, Rng& erasure_rng,
                               Rng& fading_rng) {
  const double lambda = error_rate(*spec_, link_, u);
  const int gamma = uniform01(erasure_rng) >= lambda ? 1 : 0;
  return transmit_with_outcome(u, fresh_payload, gamma, fading_rng);
}

Transmission Channel::transmit_with_outcome(Decision u, const Vector& fresh_payload, int gamma,
                                            Rng& fading_rng) {
  Transmission out;
  out.lambda = error_rate(*spec_, link_, u);
  out.gamma = gamma;

  if (u == Decision::Tx) {
    pending_ = fresh_payload;
    pending_origin_ = link_.k;
  } else if (pending_origin_ != link_.k - link_.tau) {
    throw ProtocolError("channel: pending payload origin " + std::to_string(pending_origin_) +
                        " does not match k - tau = " + std::to_string(link_.k - link_.tau));
  }

  if (gamma == 1) {
    out.z = ChannelOutput::delivered(pending_, pending_origin_);
    pending_origin_ = -1;
  } else {
    out.z = ChannelOutput::erased();
  }

  LinkState next;
  next.tau = next_tau(link_.tau, u, gamma);
  next.omega = next.tau;
  next.fading_state = step_fading(*spec_, link_.fading_state, fading_rng);
  next.last_u = u;
  next.last_gamma = gamma;
  next.k = link_.k + 1;
  link_ = next;
  out.next = next;
  return out;
}

}  // namespace harqnc
