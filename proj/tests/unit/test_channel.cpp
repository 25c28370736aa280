#include "harqnc/channel.hpp"

#include "../support.hpp"

#include <doctest.h>

using namespace harqnc;
using namespace harqnc::testing;

namespace {

ChannelSpec harq_spec() { return pendulum_config().channel; }

ChannelSpec two_state_spec(Matrix transition) {
  ChannelSpec s;
  s.omega_max = 2;
  s.fading = {FadingState{{0.6, 0.2, 0.1}}, FadingState{{0.3, 0.05, 0.02}}};
  s.transition = std::move(transition);
  return s;
}

}  // namespace

TEST_CASE("tau recursion branches") {
  CHECK(next_tau(0, Decision::Tx, 0) == 1);
  CHECK(next_tau(3, Decision::Tx, 0) == 1);
  CHECK(next_tau(1, Decision::Rtx, 0) == 2);
  CHECK(next_tau(2, Decision::Rtx, 0) == 3);
  CHECK(next_tau(0, Decision::Tx, 1) == 0);
  CHECK(next_tau(2, Decision::Rtx, 1) == 0);
}

TEST_CASE("error rate per decision") {
  const auto spec = harq_spec();
  LinkState link = initial_link(spec);
  CHECK(error_rate(spec, link, Decision::Tx) == 0.5);
  CHECK_THROWS_AS(error_rate(spec, link, Decision::Rtx), ProtocolError);
  link.tau = link.omega = 1;
  CHECK(error_rate(spec, link, Decision::Rtx) == 0.05);
  link.tau = link.omega = 4;  // beyond the table: clamps
  CHECK(error_rate(spec, link, Decision::Rtx) == 0.05);
}

TEST_CASE("forced outcomes follow the tau recursion and deliver the right payload") {
  const auto spec = harq_spec();
  Channel ch(spec);
  Rng fading = make_stream(1, 0, Substream::Fading);
  const Vector p0 = vec({1.0, 2.0});
  const Vector p1 = vec({3.0, 4.0});

  auto t0 = ch.transmit_with_outcome(Decision::Tx, p0, 0, fading);
  CHECK_FALSE(t0.z.is_delivered());
  CHECK_FALSE(t0.z.payload.has_value());
  CHECK(t0.next.tau == 1);
  CHECK(t0.next.omega == 1);
  CHECK(ch.pending_origin() == 0);

  // RTX ignores the fresh payload and resends the pending one.
  auto t1 = ch.transmit_with_outcome(Decision::Rtx, p1, 0, fading);
  CHECK(t1.next.tau == 2);
  CHECK(t1.lambda == 0.05);
  auto t2 = ch.transmit_with_outcome(Decision::Rtx, p1, 1, fading);
  REQUIRE(t2.z.is_delivered());
  CHECK(*t2.z.payload == p0);
  CHECK(t2.z.origin == 0);
  CHECK(t2.next.tau == 0);
  CHECK(t2.next.k == 3);
  CHECK(t2.next.last_u == Decision::Rtx);
  CHECK(t2.next.last_gamma == 1);

  auto t3 = ch.transmit_with_outcome(Decision::Tx, p1, 1, fading);
  REQUIRE(t3.z.is_delivered());
  CHECK(*t3.z.payload == p1);
  CHECK(t3.z.origin == 3);
  CHECK_THROWS_AS(ch.transmit_with_outcome(Decision::Rtx, p1, 1, fading), ProtocolError);
}

TEST_CASE("single-state and identity chains never move") {
  Rng rng = make_stream(5, 0, Substream::Fading);
  const auto single = harq_spec();
  const auto ident = two_state_spec(Matrix::Identity(2, 2));
  for (int i = 0; i < 1000; ++i) {
    CHECK(step_fading(single, 0, rng) == 0);
    CHECK(step_fading(ident, 0, rng) == 0);
    CHECK(step_fading(ident, 1, rng) == 1);
  }
}

TEST_CASE("uniform two-state chain occupancy") {
  const auto spec = two_state_spec(Matrix::Constant(2, 2, 0.5));
  Rng rng = make_stream(6, 0, Substream::Fading);
  int state = 0;
  int in_one = 0;
  const int samples = 100000;
  for (int i = 0; i < samples; ++i) {
    state = step_fading(spec, state, rng);
    in_one += state;
  }
  CHECK(std::abs(in_one / double(samples) - 0.5) < 0.01);
}

TEST_CASE("erasure frequency per fading state and attempt matches lambda") {
  const auto spec = two_state_spec(mat({{0.9, 0.1}, {0.3, 0.7}}));
  Channel ch(spec);
  RunStreams rng(77, 0);
  const Vector payload = vec({0.0});
  // counts[state][s] of attempts and erasures
  double attempts[2][3] = {}, erasures[2][3] = {};
  for (int i = 0; i < 300000; ++i) {
    const auto& link = ch.link();
    const Decision u = (link.tau >= 1 && link.tau <= spec.omega_max) ? Decision::Rtx : Decision::Tx;
    const int s = u == Decision::Tx ? 0 : link.omega;
    const int f = link.fading_state;
    const auto tr = ch.transmit(u, payload, rng.erasure, rng.fading);
    attempts[f][s] += 1;
    erasures[f][s] += 1 - tr.gamma;
    // Acknowledgment fidelity.
    CHECK(tr.next.last_gamma == tr.gamma);
    CHECK(tr.next.tau == tr.next.omega);
  }
  for (int f = 0; f < 2; ++f)
    for (int s = 0; s <= spec.s_max(f) && s <= spec.omega_max; ++s) {
      const double lam = spec.lambda(f, s);
      const double n = attempts[f][s];
      REQUIRE(n > 1000);
      const double se = std::sqrt(lam * (1 - lam) / n);
      CAPTURE(f);
      CAPTURE(s);
      CHECK(std::abs(erasures[f][s] / n - lam) < 3.0 * se);
    }
}

TEST_CASE("always-erasing channel keeps counting up to the forced retransmission cap") {
  auto spec = harq_spec();
  spec.fading[0].lambda = {1.0, 1.0};
  Channel ch(spec);
  RunStreams rng(1, 0);
  const Vector payload = vec({1.0});
  auto tr = ch.transmit(Decision::Tx, payload, rng.erasure, rng.fading);
  CHECK(tr.next.tau == 1);
  tr = ch.transmit(Decision::Rtx, payload, rng.erasure, rng.fading);
  CHECK(tr.next.tau == 2);
  CHECK(tr.gamma == 0);
}
