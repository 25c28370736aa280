#include "harqnc/decoder.hpp"
#include "harqnc/encoder.hpp"

#include "../support.hpp"

#include <doctest.h>

using namespace harqnc;
using namespace harqnc::testing;

namespace {

SystemModel scalar_ab(double a, double b) {
  return scalar_config(a, b, 1, 1, 1, 1, 1, 10, {0.5, 0.1}).system;
}

/// Decoder at time k-1 holding x_hat_{k-1} and the given controls.
DecoderState decoder_at(int k_prev, double x_hat, const std::vector<std::pair<int, double>>& controls) {
  DecoderState st = decoder_initialize(scalar_ab(1, 1), 2);
  st.k = k_prev;
  st.x_hat = vec({x_hat});
  for (const auto& [t, a] : controls) st.a_history.push({t, vec({a})});
  return st;
}

}  // namespace

TEST_CASE("initial estimate is the prior mean") {
  const auto sys = pendulum_config().system;
  const auto st = decoder_initialize(sys, 1);
  CHECK(st.x_hat == sys.m0);
  CHECK(st.k == 0);
  CHECK(st.a_history.capacity() == 3);
}

TEST_CASE("erasure propagates the previous estimate") {
  const auto sys = scalar_ab(2, 1);
  const auto st = decoder_at(4, 1.0, {{4, 0.5}});
  const Vector x = update_estimate(st, ChannelOutput::erased(), Ack{Decision::Tx, 0}, 0, sys);
  CHECK(x(0) == doctest::Approx(2.5));
}

TEST_CASE("delivered transmission propagates the payload one step") {
  const auto sys = scalar_ab(2, 1);
  const auto st = decoder_at(4, 100.0, {{4, 0.5}});
  const Vector x = update_estimate(st, ChannelOutput::delivered(vec({3.0}), 4), Ack{Decision::Tx, 1}, 0, sys);
  CHECK(x(0) == doctest::Approx(6.5));
}

TEST_CASE("delivered retransmission propagates the stale payload through the controls") {
  const auto sys = scalar_ab(2, 1);
  const auto st = decoder_at(4, 100.0, {{3, 0.5}, {4, -1.0}});
  // k = 5, tau_4 = 1, payload x_check_3.
  const Vector x = update_estimate(st, ChannelOutput::delivered(vec({1.0}), 3), Ack{Decision::Rtx, 1}, 1, sys);
  CHECK(x(0) == doctest::Approx(4.0));
}

TEST_CASE("retransmission propagation matches the literal product sum") {
  SystemModel sys = scalar_ab(1, 1);
  std::vector<Matrix> a, b;
  for (int k = 0; k <= 11; ++k) {
    a.push_back(mat({{1.0 + 0.1 * k, 0.2}, {-0.3, 0.9}}));
    b.push_back(mat({{0.5}, {1.0 - 0.1 * k}}));
  }
  sys.A = Schedule(a);
  sys.B = Schedule(b);
  sys.m0 = Vector::Zero(2);
  const int k = 9;
  const int tau_prev = 2;
  DecoderState st = decoder_initialize(sys, 2);
  st.k = k - 1;
  for (int t = k - 4; t <= k - 1; ++t) st.a_history.push({t, vec({std::cos(1.0 * t)})});
  const Vector payload = vec({0.7, -0.4});
  const int origin = k - tau_prev - 1;

  Matrix prod = Matrix::Identity(2, 2);
  for (int t = 1; t <= tau_prev + 1; ++t) prod = prod * sys.A.at(k - t);
  Vector literal = prod * payload;
  for (int t = 0; t <= tau_prev; ++t) {
    Matrix p = Matrix::Identity(2, 2);
    for (int tp = 1; tp <= t; ++tp) p = p * sys.A.at(k - tp);
    literal += p * sys.B.at(k - t - 1) * vec({std::cos(1.0 * (k - t - 1))});
  }
  const Vector x = update_estimate(st, ChannelOutput::delivered(payload, origin), Ack{Decision::Rtx, 1},
                                   tau_prev, sys);
  CHECK((x - literal).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("protocol violations are detected") {
  const auto sys = scalar_ab(2, 1);
  const auto st = decoder_at(4, 1.0, {{3, 0.5}, {4, -1.0}});
  CHECK_THROWS_AS(update_estimate(st, ChannelOutput::erased(), Ack{Decision::Tx, 1}, 0, sys), ProtocolError);
  CHECK_THROWS_AS(update_estimate(st, ChannelOutput::delivered(vec({1.0}), 4), Ack{Decision::Tx, 0}, 0, sys),
                  ProtocolError);
  CHECK_THROWS_AS(update_estimate(st, ChannelOutput::delivered(vec({1.0}), 2), Ack{Decision::Rtx, 1}, 1, sys),
                  ProtocolError);
  const auto empty = decoder_at(4, 1.0, {});
  CHECK_THROWS_AS(update_estimate(empty, ChannelOutput::erased(), Ack{Decision::Tx, 0}, 0, sys), ProtocolError);
}

TEST_CASE("certainty-equivalent control") {
  const auto cfg = scalar_config(1, 1, 1, 1, 1, 1, 1, 0, {0.0});
  const auto g = riccati_backward(cfg.system, cfg.cost, 0);
  DecoderState st = decoder_initialize(cfg.system, 1);
  st.x_hat = vec({0.0});
  CHECK(control_input(st, g)(0) == 0.0);
  st.x_hat = vec({2.0});
  CHECK(control_input(st, g)(0) == doctest::Approx(-1.0));
  CHECK(control_at(st, 0)(0) == doctest::Approx(-1.0));

  const auto pend = pendulum_config();
  const auto gp = riccati_backward(pend.system, pend.cost, pend.horizon);
  DecoderState sp = decoder_initialize(pend.system, 1);
  const Matrix& A = pend.system.A.at(0);
  const Matrix& B = pend.system.B.at(0);
  const Matrix L0 = (B.transpose() * gp.S[1] * B + pend.cost.R.at(0)).inverse() * B.transpose() * gp.S[1] * A;
  CHECK((control_input(sp, gp) + L0 * pend.system.m0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("decoder estimate is unbiased and orthogonal to its error for a fixed outcome sequence") {
  // Fixed (u, gamma) prefix covering every branch, omega_max = 2.
  const std::vector<Ack> outcomes = {{Decision::Tx, 0},  {Decision::Rtx, 0}, {Decision::Rtx, 1},
                                     {Decision::Tx, 1},  {Decision::Tx, 0},  {Decision::Tx, 0},
                                     {Decision::Rtx, 1}, {Decision::Tx, 0},  {Decision::Rtx, 0},
                                     {Decision::Tx, 1}};
  const int T = static_cast<int>(outcomes.size());
  auto cfg = scalar_config(1, 1, 1, 1, 1, 1, 1, T, {0.5, 0.1, 0.05}, 2);
  cfg.system.A = Schedule(mat({{1.05, 0.2}, {-0.1, 0.9}}));
  cfg.system.B = Schedule(mat({{0.3}, {1.0}}));
  cfg.system.C = Schedule(mat({{1.0, 0.5}}));
  cfg.system.W = Schedule(mat({{0.4, 0.1}, {0.1, 0.3}}));
  cfg.system.V = Schedule(mat({{0.25}}));
  cfg.system.m0 = vec({0.5, -1.0});
  cfg.system.M0 = mat({{1.0, 0.3}, {0.3, 2.0}});
  cfg.cost.Q = Schedule(Matrix::Identity(2, 2));
  const auto& sys = cfg.system;
  const auto gains = riccati_backward(sys, cfg.cost, T);
  const auto cov = precompute_covariances(sys, T);
  const Matrix fw = covariance_factor(sys.W.at(0));
  const Matrix fv = covariance_factor(sys.V.at(0));
  const Matrix f0 = covariance_factor(sys.M0);

  const int runs = 10000;
  // Per k: sums of e_hat (2), e_hat * x_hat' (4) and their squares.
  std::vector<Eigen::Matrix<double, 6, 1>> sum(T + 1, Eigen::Matrix<double, 6, 1>::Zero());
  std::vector<Eigen::Matrix<double, 6, 1>> sum_sq = sum;
  for (int r = 0; r < runs; ++r) {
    RunStreams rng(555, static_cast<std::uint64_t>(r));
    Encoder enc(sys, cfg.channel, cov, gains);
    Channel ch(cfg.channel);
    DecoderState dec = decoder_initialize(sys, 2);
    Vector x(2), w(2), v(1), a;
    sample_gaussian(rng.process, f0, x);
    x += sys.m0;
    ChannelOutput z;
    Ack ack{};
    int tau_prev = 0;
    for (int k = 0; k <= T; ++k) {
      sample_gaussian(rng.measurement, fv, v);
      const Vector y = sys.C.at(k) * x + v;
      if (k == 0) {
        enc.start(y, 0);
      } else {
        enc.advance(y, a, ack, 0);
        advance_decoder(dec, z, ack, tau_prev, sys);
        if (ack.u == Decision::Tx && ack.gamma == 1)
          REQUIRE((enc.e_tilde() - cov.K[static_cast<std::size_t>(k)] * enc.nu()).norm() < 1e-12);
      }
      REQUIRE((enc.e_tilde() - (enc.x_check() - dec.x_hat)).cwiseAbs().maxCoeff() < 1e-9);
      const Vector e = x - dec.x_hat;
      Eigen::Matrix<double, 6, 1> s;
      s << e(0), e(1), e(0) * dec.x_hat(0), e(0) * dec.x_hat(1), e(1) * dec.x_hat(0), e(1) * dec.x_hat(1);
      sum[static_cast<std::size_t>(k)] += s;
      sum_sq[static_cast<std::size_t>(k)] += s.cwiseProduct(s);
      if (k == T) break;

      a = control_input(dec, gains);
      const Ack out = outcomes[static_cast<std::size_t>(k)];
      tau_prev = ch.link().tau;
      const auto tr = ch.transmit_with_outcome(out.u, enc.x_check(), out.gamma, rng.fading);
      z = tr.z;
      ack = out;
      sample_gaussian(rng.process, fw, w);
      x = sys.A.at(k) * x + sys.B.at(k) * a + w;
    }
  }
  for (int k = 0; k <= T; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    const Eigen::Matrix<double, 6, 1> mean = sum[kk] / runs;
    const Eigen::Matrix<double, 6, 1> var = (sum_sq[kk] / runs - mean.cwiseProduct(mean)) * runs / (runs - 1.0);
    for (int i = 0; i < 6; ++i) {
      CAPTURE(k);
      CAPTURE(i);
      CHECK(std::abs(mean(i)) < 5.0 * std::sqrt(var(i) / runs));
    }
  }
}
