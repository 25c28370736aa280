#pragma once

#include "harqnc/model.hpp"

#include <vector>

namespace harqnc {

/// Encoder-side MMSE filter state at time k.
struct FilterState {
  Vector x_check;  // E[x_k | encoder information at k]
  Matrix P;        // Cov[x_k | I^e_k]
  Matrix M;        // Cov[x_k | I^e_{k-1}]
  Matrix K;        // P C' V^{-1}
  Matrix N_inno;   // C M C' + V
  Vector nu;       // y_k - C m_k
  int k = 0;
  bool joseph = false;  // covariance came from the fallback path
};

struct FilterOptions {
  /// Use the Joseph covariance form when the information form is not usable.
  bool allow_fallback = true;
  /// Condition number of M above which the information form is abandoned.
  double max_condition = 1e10;
};

struct CovarianceUpdate {
  Matrix P;
  Matrix K;
  Matrix N;
  bool joseph = false;
};

/// P = (M^{-1} + C' V^{-1} C)^{-1}, K = P C' V^{-1}. Throws NumericalError
/// when M or V is not positive definite.
CovarianceUpdate information_form_update(const Matrix& M, const Matrix& C, const Matrix& V);

/// K = M C' (C M C' + V)^+, P = (I - K C) M (I - K C)' + K V K'.
/// Pseudo-inverse semantics keep it defined for singular M and V.
CovarianceUpdate joseph_form_update(const Matrix& M, const Matrix& C, const Matrix& V);

/// Information form when M is well conditioned and V is invertible, Joseph otherwise.
CovarianceUpdate covariance_update(const Matrix& M, const Matrix& C, const Matrix& V,
                                   const FilterOptions& opts = {});

FilterState kf_initialize(const SystemModel& sys, const Vector& y0, const FilterOptions& opts = {});

/// Advances st (time k-1) to time k given a_{k-1} and y_k.
FilterState kf_step(const FilterState& st, const Vector& a_prev, const Vector& y,
                    const SystemModel& sys, const FilterOptions& opts = {});

/// Data-independent covariance quantities for k = 0..N+1.
struct CovarianceSchedule {
  int horizon = 0;
  std::vector<Matrix> P, M, K, N;
  std::vector<char> joseph;
};

CovarianceSchedule precompute_covariances(const SystemModel& sys, int horizon,
                                          const FilterOptions& opts = {});

/// Mean-only filter driven by a precomputed covariance schedule.
class ScheduledFilter {
 public:
  ScheduledFilter(const SystemModel& sys, const CovarianceSchedule& cov) : sys_(&sys), cov_(&cov) {}

  /// x_check_0 = m_0 + K_0 (y_0 - C_0 m_0).
  void initialize(const Vector& y0);
  /// x_check_k = m_k + K_k (y_k - C_k m_k), m_k = A x_check_{k-1} + B a_{k-1}.
  void step(const Vector& a_prev, const Vector& y);

  int k() const { return k_; }
  const Vector& x_check() const { return x_check_; }
  const Vector& nu() const { return nu_; }
  const Matrix& K() const { return cov_->K[static_cast<std::size_t>(k_)]; }

 private:
  const SystemModel* sys_;
  const CovarianceSchedule* cov_;
  Vector x_check_;
  Vector nu_;
  Vector pred_;
  int k_ = -1;
};

}  // namespace harqnc
