#pragma once

// Fixtures and independent reference computations shared by the unit tests.

#include "harqnc/model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

namespace harqnc::testing {

inline Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = static_cast<Eigen::Index>(rows.begin()->size());
  Matrix m(r, c);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

inline Matrix scalar_matrix(double v) { return Matrix::Constant(1, 1, v); }
inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1e-300, b.norm());
}

/// Scalar scenario with one fading state.
inline ScenarioConfig scalar_config(double a, double b, double c, double w, double v, double q,
                                    double r, int horizon, std::vector<double> lambda,
                                    int omega_max = 1) {
  ScenarioConfig cfg;
  cfg.system.A = Schedule(scalar_matrix(a));
  cfg.system.B = Schedule(scalar_matrix(b));
  cfg.system.C = Schedule(scalar_matrix(c));
  cfg.system.W = Schedule(scalar_matrix(w));
  cfg.system.V = Schedule(scalar_matrix(v));
  cfg.system.m0 = Vector::Zero(1);
  cfg.system.M0 = scalar_matrix(1.0);
  cfg.cost.Q = Schedule(scalar_matrix(q));
  cfg.cost.R = Schedule(scalar_matrix(r));
  cfg.channel.omega_max = omega_max;
  cfg.channel.fading = {FadingState{std::move(lambda)}};
  cfg.channel.transition = scalar_matrix(1.0);
  cfg.horizon = horizon;
  cfg.seed = 1;
  cfg.runs = 1;
  return cfg;
}

/// The scalar fixture used throughout the DP tests.
inline ScenarioConfig scalar_dp_fixture() {
  return scalar_config(1.2, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 6, {0.5, 0.05});
}

/// Inverted-pendulum model with the HARQ link of the reference experiment.
inline ScenarioConfig pendulum_config() {
  ScenarioConfig cfg;
  auto& s = cfg.system;
  s.A = Schedule(mat({{1, 0.01, 0.0001, 0},
                      {0, 0.9982, 0.0267, 0.0001},
                      {0, 0, 1.0016, 0.01},
                      {0, -0.0045, 0.3122, 1.0016}}));
  s.B = Schedule(mat({{0.0001}, {0.0182}, {0.0002}, {0.0454}}));
  s.C = Schedule(mat({{1, 0, 0, 0}, {0, 0, 1, 0}}));
  const Matrix W = 1e-4 * mat({{6, 3, 1, 6}, {3, 8, 3, 4}, {1, 3, 7, 6}, {6, 4, 6, 31}});
  s.W = Schedule(W);
  s.V = Schedule(1e-4 * mat({{20, 0}, {0, 10}}));
  s.m0 = vec({0, 0, 0.2, 0});
  s.M0 = 10.0 * W;
  Matrix Q = Matrix::Identity(4, 4);
  Q(2, 2) = 1000.0;
  cfg.cost.Q = Schedule(Q);
  cfg.cost.R = Schedule(scalar_matrix(1.0));
  cfg.channel.omega_max = 1;
  cfg.channel.fading = {FadingState{{0.5, 0.05}}};
  cfg.channel.transition = scalar_matrix(1.0);
  cfg.horizon = 500;
  cfg.seed = 7;
  cfg.runs = 500;
  return cfg;
}

/// Riccati recursion written as S = A'(S - S B (B'SB + R)^{-1} B'S) A + Q with
/// a full-pivot LU inverse, i.e. a different evaluation order from the library.
inline std::vector<Matrix> reference_riccati(const ScenarioConfig& cfg) {
  const int N = cfg.horizon;
  std::vector<Matrix> S(static_cast<std::size_t>(N) + 2);
  S[static_cast<std::size_t>(N) + 1] = cfg.cost.Q.at(N + 1);
  for (int t = N; t >= 0; --t) {
    const Matrix& A = cfg.system.A.at(t);
    const Matrix& B = cfg.system.B.at(t);
    const Matrix& Sn = S[static_cast<std::size_t>(t) + 1];
    const Matrix inner = (B.transpose() * Sn * B + cfg.cost.R.at(t)).fullPivLu().inverse();
    S[static_cast<std::size_t>(t)] =
        A.transpose() * (Sn - Sn * B * inner * B.transpose() * Sn) * A + cfg.cost.Q.at(t);
  }
  return S;
}

/// Joint-Gaussian conditioning over a whole trajectory. Returns E[x_T | y_0..y_T]
/// and Cov[x_T | y_0..y_T] for the given measurements and known controls.
struct BatchEstimate {
  Vector mean;
  Matrix cov;
};

inline BatchEstimate batch_conditioning(const SystemModel& sys, const std::vector<Vector>& controls,
                                        const std::vector<Vector>& ys) {
  const int T = static_cast<int>(ys.size()) - 1;
  const auto n = sys.n();
  const auto p = sys.p();
  // x_k = Phi_k [x_0; w_0; ...; w_{k-1}] + known input response.
  const Eigen::Index dim = n * (T + 1);
  std::vector<Matrix> phi(static_cast<std::size_t>(T) + 1);
  std::vector<Vector> mu(static_cast<std::size_t>(T) + 1);
  phi[0] = Matrix::Zero(n, dim);
  phi[0].leftCols(n).setIdentity();
  mu[0] = sys.m0;
  for (int k = 1; k <= T; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    phi[kk] = sys.A.at(k - 1) * phi[kk - 1];
    phi[kk].block(0, n * k, n, n) += Matrix::Identity(n, n);
    mu[kk] = sys.A.at(k - 1) * mu[kk - 1] + sys.B.at(k - 1) * controls[kk - 1];
  }
  Matrix prior = Matrix::Zero(dim, dim);
  prior.topLeftCorner(n, n) = sys.M0;
  for (int k = 0; k < T; ++k) prior.block(n * (k + 1), n * (k + 1), n, n) = sys.W.at(k);

  const Eigen::Index ydim = p * (T + 1);
  Matrix H(ydim, dim);
  Vector y_mean(ydim), y(ydim);
  Matrix Rv = Matrix::Zero(ydim, ydim);
  for (int k = 0; k <= T; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    H.middleRows(p * k, p) = sys.C.at(k) * phi[kk];
    y_mean.segment(p * k, p) = sys.C.at(k) * mu[kk];
    y.segment(p * k, p) = ys[kk];
    Rv.block(p * k, p * k, p, p) = sys.V.at(k);
  }
  const Matrix Syy = H * prior * H.transpose() + Rv;
  const Matrix& G = phi[static_cast<std::size_t>(T)];
  const Matrix Sxy = G * prior * H.transpose();
  const Eigen::LDLT<Matrix> solver(Syy);
  BatchEstimate out;
  out.mean = mu[static_cast<std::size_t>(T)] + Sxy * solver.solve(y - y_mean);
  out.cov = G * prior * G.transpose() - Sxy * solver.solve(Sxy.transpose());
  return out;
}

}  // namespace harqnc::testing
