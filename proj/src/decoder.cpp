#include "harqnc/decoder.hpp"

namespace harqnc {

DecoderState decoder_initialize(const SystemModel& sys, int omega_max) {
  DecoderState st;
  st.x_hat = sys.m0;
  st.a_history = RingBuffer<ControlRecord>(static_cast<std::size_t>(omega_max) + 2);
  st.k = 0;
  return st;
}

const Vector& control_at(const DecoderState& st, int t) {
  if (!st.a_history.empty()) {
    const int newest = st.a_history.recent(0).k;
    const int age = newest - t;
    if (age >= 0 && static_cast<std::size_t>(age) < st.a_history.size()) {
      const auto& rec = st.a_history.recent(static_cast<std::size_t>(age));
      if (rec.k == t) return rec.a;
    }
  }
  throw ProtocolError("decoder: control a_" + std::to_string(t) + " not retained");
}

Vector update_estimate(const DecoderState& st, const ChannelOutput& z, const Ack& ack,
                       int tau_prev, const SystemModel& sys) {
  const int k = st.k + 1;
  if (z.is_delivered() != (ack.gamma == 1))
    throw ProtocolError("decoder: channel output disagrees with acknowledgment at k=" +
                        std::to_string(k));
  if (ack.gamma == 0) return sys.A.at(k - 1) * st.x_hat + sys.B.at(k - 1) * control_at(st, k - 1);

  const int expected_origin = ack.u == Decision::Tx ? k - 1 : k - tau_prev - 1;
  if (z.origin != expected_origin || !z.payload)
    throw ProtocolError("decoder: payload origin " + std::to_string(z.origin) + " at k=" +
                        std::to_string(k) + ", expected " + std::to_string(expected_origin));
  Vector x = *z.payload;
  for (int t = expected_origin; t < k; ++t) x = sys.A.at(t) * x + sys.B.at(t) * control_at(st, t);
  return x;
}

void advance_decoder(DecoderState& st, const ChannelOutput& z, const Ack& ack, int tau_prev,
                     const SystemModel& sys) {
  st.x_hat = update_estimate(st, z, ack, tau_prev, sys);
  st.k += 1;
}

Vector control_input(DecoderState& st, const GainSchedule& sched) {
  Vector a = -(control_gain(sched, st.k) * st.x_hat);
  st.a_history.push({st.k, a});
  return a;
}

}  // namespace harqnc
