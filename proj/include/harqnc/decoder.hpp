#pragma once

#include "harqnc/channel.hpp"
#include "harqnc/lqr.hpp"
#include "harqnc/ring_buffer.hpp"

namespace harqnc {

struct ControlRecord {
  int k = -1;
  Vector a;
};

/// Actuator-side state: switching MMSE estimate and recent controls.
struct DecoderState {
  Vector x_hat;  // E[x_k | decoder information at k]
  RingBuffer<ControlRecord> a_history;
  int k = 0;
};

/// x_hat_0 = m_0, empty control history sized for omega_max + 2 entries.
DecoderState decoder_initialize(const SystemModel& sys, int omega_max);

/// a_t from the history; throws ProtocolError if it was not retained.
const Vector& control_at(const DecoderState& st, int t);

/// x_hat_k from z_k and the step k-1 acknowledgment, where st is at time k-1
/// and already holds a_{k-1}.
///   TX delivered:  A_{k-1} x_check_{k-1} + B_{k-1} a_{k-1}
///   RTX delivered: x_check_{k-tau-1} propagated through A, B and the controls since
///   erased:        A_{k-1} x_hat_{k-1} + B_{k-1} a_{k-1}
/// The propagation runs one factor at a time instead of forming the products.
Vector update_estimate(const DecoderState& st, const ChannelOutput& z, const Ack& ack,
                       int tau_prev, const SystemModel& sys);

/// Applies update_estimate and moves st to time k.
void advance_decoder(DecoderState& st, const ChannelOutput& z, const Ack& ack, int tau_prev,
                     const SystemModel& sys);

/// a_k = -L_k x_hat_k, recorded in the history.
Vector control_input(DecoderState& st, const GainSchedule& sched);

}  // namespace harqnc
