#include "harqnc/dp_oracle.hpp"

#include "harqnc/channel.hpp"
#include "harqnc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

namespace harqnc {

Quadrature gauss_hermite_normal(int count) {
  if (count < 1) throw std::invalid_argument("gauss_hermite_normal: count must be >= 1");
  // Jacobi matrix of the monic probabilists' Hermite recurrence
  // He_{j+1} = x He_j - j He_{j-1}.
  Matrix jacobi = Matrix::Zero(count, count);
  for (int j = 1; j < count; ++j) {
    jacobi(j, j - 1) = std::sqrt(static_cast<double>(j));
    jacobi(j - 1, j) = jacobi(j, j - 1);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(jacobi);
  Quadrature q;
  q.nodes.resize(static_cast<std::size_t>(count));
  q.weights.resize(static_cast<std::size_t>(count));
  double total = 0.0;
  for (int i = 0; i < count; ++i) {
    q.nodes[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    const double v = es.eigenvectors()(0, i);
    q.weights[static_cast<std::size_t>(i)] = v * v;
    total += v * v;
  }
  for (auto& w : q.weights) w /= total;
  // Exact symmetry about zero.
  for (int i = 0; i < count / 2; ++i) {
    auto lo = static_cast<std::size_t>(i);
    auto hi = static_cast<std::size_t>(count - 1 - i);
    const double x = 0.5 * (q.nodes[hi] - q.nodes[lo]);
    q.nodes[lo] = -x;
    q.nodes[hi] = x;
    const double w = 0.5 * (q.weights[lo] + q.weights[hi]);
    q.weights[lo] = w;
    q.weights[hi] = w;
  }
  if (count % 2 == 1) q.nodes[static_cast<std::size_t>(count / 2)] = 0.0;
  return q;
}

double GridAxis::node(int i) const {
  if (count <= 1) return lo;
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
}

void GridAxis::locate(double x, int& cell, double& weight) const {
  if (count <= 1 || hi <= lo) {
    cell = 0;
    weight = 0.0;
    return;
  }
  double t = (x - lo) / (hi - lo) * static_cast<double>(count - 1);
  t = std::clamp(t, 0.0, static_cast<double>(count - 1));
  cell = std::min(static_cast<int>(t), count - 2);
  weight = t - static_cast<double>(cell);
}

std::size_t ValueGrid::index(int tau, int fading, int i, int j) const {
  const auto block = static_cast<std::size_t>(tau * fading_states + fading);
  const auto eps_count = static_cast<std::size_t>(eps_axis[static_cast<std::size_t>(tau)].count);
  return level_offset[block] + static_cast<std::size_t>(i) * eps_count + static_cast<std::size_t>(j);
}

double ValueGrid::interpolate(double e, double eps, int tau, int fading) const {
  int i = 0;
  double wi = 0.0;
  e_axis.locate(e, i, wi);
  const auto& ax = eps_axis[static_cast<std::size_t>(tau)];
  if (ax.count <= 1) {
    const double v0 = values[index(tau, fading, i, 0)];
    const double v1 = values[index(tau, fading, i + 1, 0)];
    return (1.0 - wi) * v0 + wi * v1;
  }
  int j = 0;
  double wj = 0.0;
  ax.locate(eps, j, wj);
  const double v00 = values[index(tau, fading, i, j)];
  const double v01 = values[index(tau, fading, i, j + 1)];
  const double v10 = values[index(tau, fading, i + 1, j)];
  const double v11 = values[index(tau, fading, i + 1, j + 1)];
  return (1.0 - wi) * ((1.0 - wj) * v00 + wj * v01) + wi * ((1.0 - wj) * v10 + wj * v11);
}

// ---------------------------------------------------------------------------

void DpOracle::check_supported(const SystemModel& sys) {
  if (sys.n() != 1 || sys.p() != 1)
    throw UnsupportedError("dp-oracle supports scalar plants only (n = p = 1); got n = " +
                           std::to_string(sys.n()) + ", p = " + std::to_string(sys.p()));
}

DpOracle::DpOracle(const ScenarioConfig& cfg, const GainSchedule& gains,
                   const CovarianceSchedule& cov, DpOptions opts)
    : cfg_(cfg), gains_(gains), cov_(cov), opts_(opts), horizon_(cfg.horizon) {
  check_supported(cfg_.system);
  quad_ = gauss_hermite_normal(opts_.grid.c4);

  const int levels = cfg_.channel.omega_max + 2;
  double lambda_max = 0.0;
  for (int f = 0; f < cfg_.channel.state_count(); ++f)
    for (int s = 0; s <= cfg_.channel.omega_max; ++s)
      lambda_max = std::max(lambda_max, cfg_.channel.lambda(f, s));

  const auto steps = static_cast<std::size_t>(horizon_) + 2;
  eps_sigma_.assign(steps, std::vector<double>(static_cast<std::size_t>(levels), 0.0));
  std::vector<double> e_var(steps, 0.0);
  std::vector<std::vector<double>> eps_var = eps_sigma_;

  for (int k = 0; k <= horizon_ + 1; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    const double a = cfg_.system.A.at(k)(0, 0);
    const double kn = scalar(cov_.K, k) * scalar(cov_.K, k) * scalar(cov_.N, k);
    for (int tau = 1; tau <= cfg_.channel.omega_max; ++tau) {
      const double prev = (tau >= 2 && k >= 1) ? eps_var[kk - 1][static_cast<std::size_t>(tau - 1)] : 0.0;
      eps_var[kk][static_cast<std::size_t>(tau)] = a * a * (prev + kn);
    }
    if (k == 0) {
      e_var[0] = kn;
    } else {
      const double a_prev = cfg_.system.A.at(k - 1)(0, 0);
      const double eps_prev = *std::max_element(eps_var[kk - 1].begin(), eps_var[kk - 1].end());
      e_var[kk] = lambda_max * a_prev * a_prev * e_var[kk - 1] + eps_prev + kn;
    }
  }
  auto sigma = [](double var) {
    const double s = std::sqrt(std::max(var, 0.0));
    return s > 1e-12 ? s : 1.0;
  };
  e_sigma_.resize(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    e_sigma_[k] = sigma(e_var[k]);
    for (std::size_t t = 0; t < static_cast<std::size_t>(levels); ++t) eps_sigma_[k][t] = sigma(eps_var[k][t]);
  }
}

ValueGrid DpOracle::make_layout(int k) const {
  const auto kk = static_cast<std::size_t>(k);
  const double span = opts_.grid.span_sigmas;
  ValueGrid g;
  g.k = k;
  g.tau_levels = cfg_.channel.omega_max + 2;
  g.fading_states = cfg_.channel.state_count();
  g.e_axis = {-span * e_sigma_[kk], span * e_sigma_[kk], opts_.grid.c1};
  g.eps_axis.resize(static_cast<std::size_t>(g.tau_levels));
  for (int tau = 0; tau < g.tau_levels; ++tau) {
    auto& ax = g.eps_axis[static_cast<std::size_t>(tau)];
    if (tau >= 1 && tau <= cfg_.channel.omega_max) {
      const double s = eps_sigma_[kk][static_cast<std::size_t>(tau)];
      ax = {-span * s, span * s, opts_.grid.c2};
    } else {
      ax = {0.0, 0.0, 1};
    }
  }
  std::size_t offset = 0;
  for (int tau = 0; tau < g.tau_levels; ++tau) {
    for (int f = 0; f < g.fading_states; ++f) {
      g.level_offset.push_back(offset);
      offset += static_cast<std::size_t>(g.e_axis.count) *
                static_cast<std::size_t>(g.eps_axis[static_cast<std::size_t>(tau)].count);
    }
  }
  g.values.assign(offset, 0.0);
  g.q_tx.assign(offset, 0.0);
  g.q_rtx.assign(offset, std::numeric_limits<double>::infinity());
  g.rtx.assign(offset, 0);
  return g;
}

ActionValues DpOracle::action_values(int k, double e, double eps, int tau, int fading,
                                     bool with_continuation) const {
  if (k < 0 || k > horizon_) throw std::out_of_range("dp_oracle: k outside 0..N");
  const auto& spec = cfg_.channel;
  const ValueGrid* next = nullptr;
  if (with_continuation) {
    next = &grids_.at(static_cast<std::size_t>(k) + 1);
    if (next->values.empty()) throw std::logic_error("dp_oracle: V_{k+1} not computed yet");
  }

  const double a = cfg_.system.A.at(k)(0, 0);
  const double a_next = cfg_.system.A.at(k + 1)(0, 0);
  const double gamma = scalar(gains_.Gamma, k + 1);
  const double gain = scalar(cov_.K, k + 1);
  const double nu_sd = std::sqrt(std::max(scalar(cov_.N, k + 1), 0.0));
  const double trace_term = gamma * scalar(cov_.P, k + 1);

  ActionValues out;
  out.rtx_allowed = tau >= 1 && tau <= spec.omega_max;
  out.lambda_zero = spec.lambda(fading, 0);
  out.lambda_omega = out.rtx_allowed ? spec.lambda(fading, tau) : out.lambda_zero;
  const int fail_rtx_level = std::min(tau + 1, spec.omega_max + 1);
  const int states = spec.state_count();

  // Expected V_{k+1} over the next fading state.
  auto continuation = [&](double e_next, double eps_next, int tau_next) {
    if (!next) return 0.0;
    double acc = 0.0;
    for (int f = 0; f < states; ++f) {
      const double pr = spec.transition(fading, f);
      if (pr != 0.0) acc += pr * next->interpolate(e_next, eps_next, tau_next, f);
    }
    return acc;
  };

  double cost_fail = 0.0, cost_success_tx = 0.0, cost_success_rtx = 0.0;
  const double ae = a * e;
  for (std::size_t q = 0; q < quad_.nodes.size(); ++q) {
    const double w = quad_.weights[q];
    const double kn = gain * nu_sd * quad_.nodes[q];
    const double e_fail = ae + kn;
    cost_fail += w * gamma * e_fail * e_fail;
    cost_success_tx += w * gamma * kn * kn;
    out.v_fail_tx += w * continuation(e_fail, a_next * kn, 1);
    out.v_success_tx += w * continuation(kn, 0.0, 0);
    if (out.rtx_allowed) {
      const double e_rtx = eps + kn;
      cost_success_rtx += w * gamma * e_rtx * e_rtx;
      out.v_fail_rtx += w * continuation(e_fail, a_next * (eps + kn), fail_rtx_level);
      out.v_success_rtx += w * continuation(e_rtx, 0.0, 0);
    }
  }

  const double l0 = out.lambda_zero;
  out.q_tx = trace_term + l0 * (cost_fail + out.v_fail_tx) + (1.0 - l0) * (cost_success_tx + out.v_success_tx);
  if (out.rtx_allowed) {
    const double lw = out.lambda_omega;
    out.q_rtx = trace_term + lw * (cost_fail + out.v_fail_rtx) +
                (1.0 - lw) * (cost_success_rtx + out.v_success_rtx);
    out.one_step_gap = (lw - l0) * gamma * ae * ae + (1.0 - lw) * gamma * eps * eps;
    out.delta = lw * out.v_fail_rtx - l0 * out.v_fail_tx - (1.0 - l0) * out.v_success_tx +
                (1.0 - lw) * out.v_success_rtx;
  } else {
    out.q_rtx = std::numeric_limits<double>::infinity();
  }
  return out;
}

double DpOracle::exact_delta(int k, double e, double eps, int tau, int fading) const {
  return action_values(k, e, eps, tau, fading).delta;
}

ValueGrid DpOracle::backup_value(int k) const {
  ValueGrid g = make_layout(k);
  auto work = [&](int worker, int stride) {
    for (int tau = 0; tau < g.tau_levels; ++tau) {
      const auto& eps_ax = g.eps_axis[static_cast<std::size_t>(tau)];
      for (int f = 0; f < g.fading_states; ++f) {
        for (int i = worker; i < g.e_axis.count; i += stride) {
          const double e = g.e_axis.node(i);
          for (int j = 0; j < eps_ax.count; ++j) {
            const auto idx = g.index(tau, f, i, j);
            const auto av = action_values(k, e, eps_ax.node(j), tau, f);
            g.q_tx[idx] = av.q_tx;
            g.q_rtx[idx] = av.q_rtx;
            const bool rtx = av.rtx_allowed && av.q_rtx < av.q_tx - kDecisionTieTolerance;
            g.rtx[idx] = rtx ? 1 : 0;
            g.values[idx] = rtx ? av.q_rtx : av.q_tx;
          }
        }
      }
    }
  };
  const int workers = std::max(1, opts_.workers);
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    for (auto& t : pool) t.join();
  }
  return g;
}

void DpOracle::solve() {
  grids_.assign(static_cast<std::size_t>(horizon_) + 2, ValueGrid{});
  grids_.back() = make_layout(horizon_ + 1);  // V_{N+1} = 0
  for (int k = horizon_; k >= 0; --k) grids_[static_cast<std::size_t>(k)] = backup_value(k);
  solved_ = true;
}

std::vector<Decision> DpOracle::decision_map(int k) const {
  const auto& g = grid(k);
  std::vector<Decision> out(g.node_count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = g.rtx[i] ? Decision::Rtx : Decision::Tx;
  return out;
}

std::vector<Decision> DpOracle::lookahead_decision_map(int k) const {
  const auto& g = grid(k);
  std::vector<Decision> out(g.node_count(), Decision::Tx);
  for (int tau = 0; tau < g.tau_levels; ++tau) {
    const auto& eps_ax = g.eps_axis[static_cast<std::size_t>(tau)];
    for (int f = 0; f < g.fading_states; ++f)
      for (int i = 0; i < g.e_axis.count; ++i)
        for (int j = 0; j < eps_ax.count; ++j) {
          const auto av = action_values(k, g.e_axis.node(i), eps_ax.node(j), tau, f, false);
          if (av.rtx_allowed && av.q_rtx < av.q_tx - kDecisionTieTolerance)
            out[g.index(tau, f, i, j)] = Decision::Rtx;
        }
  }
  return out;
}

DpOracle::Rollout DpOracle::rollout_value(int k, double e0, double eps0, int tau0, int fading0,
                                          int rollouts, std::uint64_t seed) const {
  if (!solved_) throw std::logic_error("dp_oracle: solve() first");
  const auto& spec = cfg_.channel;
  Rng rng = make_stream(seed, 0, Substream::Policy);
  double sum = 0.0;
  double sum_sq = 0.0;
  const Matrix unit = Matrix::Identity(1, 1);
  Vector z(1);
  for (int r = 0; r < rollouts; ++r) {
    double e = e0, eps = eps0;
    int tau = tau0, f = fading0;
    double total = 0.0;
    for (int t = k; t <= horizon_; ++t) {
      const auto av = action_values(t, e, eps, tau, f);
      const bool rtx = av.rtx_allowed && av.q_rtx < av.q_tx - kDecisionTieTolerance;
      const double lambda = rtx ? av.lambda_omega : av.lambda_zero;
      const int gamma = uniform01(rng) >= lambda ? 1 : 0;
      sample_gaussian(rng, unit, z);
      const double kn = scalar(cov_.K, t + 1) * std::sqrt(scalar(cov_.N, t + 1)) * z(0);
      const double a = cfg_.system.A.at(t)(0, 0);
      const double a_next = cfg_.system.A.at(t + 1)(0, 0);
      double e_next = 0.0, eps_next = 0.0;
      if (gamma == 1) {
        e_next = rtx ? eps + kn : kn;
      } else {
        e_next = a * e + kn;
        eps_next = rtx ? a_next * (eps + kn) : a_next * kn;
      }
      const int tau_next = next_tau(tau, rtx ? Decision::Rtx : Decision::Tx, gamma);
      const double g = scalar(gains_.Gamma, t + 1);
      total += g * (e_next * e_next + scalar(cov_.P, t + 1));
      e = e_next;
      eps = eps_next;
      tau = std::min(tau_next, spec.omega_max + 1);
      f = step_fading(spec, f, rng);
    }
    sum += total;
    sum_sq += total * total;
  }
  Rollout out;
  const double n = static_cast<double>(rollouts);
  out.mean = sum / n;
  const double var = rollouts > 1 ? (sum_sq - n * out.mean * out.mean) / (n - 1.0) : 0.0;
  out.std_error = std::sqrt(std::max(var, 0.0) / n);
  return out;
}

}  // namespace harqnc
