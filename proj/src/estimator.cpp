#include "harqnc/estimator.hpp"

#include <cmath>
#include <limits>

namespace harqnc {

namespace {

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix spd_inverse(const Matrix& m, const char* what) {
  Eigen::LLT<Matrix> llt(symmetrize(m));
  if (llt.info() != Eigen::Success)
    throw NumericalError(std::string("information form: ") + what + " is not positive definite");
  return llt.solve(Matrix::Identity(m.rows(), m.cols()));
}

// Moore-Penrose inverse of a symmetric PSD matrix.
Matrix psd_pinv(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  const auto& ev = es.eigenvalues();
  const double cutoff = std::max(1.0, ev.cwiseAbs().maxCoeff()) * 1e-14 * static_cast<double>(m.rows());
  Vector inv(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) inv(i) = ev(i) > cutoff ? 1.0 / ev(i) : 0.0;
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

double condition_number(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

bool positive_definite(const Matrix& m) {
  Eigen::LLT<Matrix> llt(symmetrize(m));
  return llt.info() == Eigen::Success;
}

}  // namespace

CovarianceUpdate information_form_update(const Matrix& M, const Matrix& C, const Matrix& V) {
  const Matrix Minv = spd_inverse(M, "M");
  const Matrix Vinv = spd_inverse(V, "V");
  const Matrix info = symmetrize(Minv + C.transpose() * Vinv * C);
  CovarianceUpdate out;
  out.P = symmetrize(spd_inverse(info, "information matrix"));
  out.K = out.P * C.transpose() * Vinv;
  out.N = symmetrize(C * M * C.transpose() + V);
  return out;
}

CovarianceUpdate joseph_form_update(const Matrix& M, const Matrix& C, const Matrix& V) {
  CovarianceUpdate out;
  out.N = symmetrize(C * M * C.transpose() + V);
  out.K = M * C.transpose() * psd_pinv(out.N);
  const Matrix I_KC = Matrix::Identity(M.rows(), M.cols()) - out.K * C;
  out.P = symmetrize(I_KC * M * I_KC.transpose() + out.K * V * out.K.transpose());
  out.joseph = true;
  return out;
}

CovarianceUpdate covariance_update(const Matrix& M, const Matrix& C, const Matrix& V,
                                   const FilterOptions& opts) {
  const bool usable = condition_number(M) <= opts.max_condition && positive_definite(V);
  if (usable) return information_form_update(M, C, V);
  if (!opts.allow_fallback) {
    // Let the information form report which factor is singular.
    return information_form_update(M, C, V);
  }
  return joseph_form_update(M, C, V);
}

FilterState kf_initialize(const SystemModel& sys, const Vector& y0, const FilterOptions& opts) {
  FilterState st;
  st.k = 0;
  st.M = sys.M0;
  const auto upd = covariance_update(st.M, sys.C.at(0), sys.V.at(0), opts);
  st.P = upd.P;
  st.K = upd.K;
  st.N_inno = upd.N;
  st.joseph = upd.joseph;
  st.nu = y0 - sys.C.at(0) * sys.m0;
  st.x_check = sys.m0 + st.K * st.nu;
  return st;
}

FilterState kf_step(const FilterState& prev, const Vector& a_prev, const Vector& y,
                    const SystemModel& sys, const FilterOptions& opts) {
  const int k = prev.k + 1;
  const Matrix& A = sys.A.at(k - 1);
  FilterState st;
  st.k = k;
  st.M = symmetrize(A * prev.P * A.transpose() + sys.W.at(k - 1));
  const auto upd = covariance_update(st.M, sys.C.at(k), sys.V.at(k), opts);
  st.P = upd.P;
  st.K = upd.K;
  st.N_inno = upd.N;
  st.joseph = upd.joseph;
  const Vector pred = A * prev.x_check + sys.B.at(k - 1) * a_prev;
  st.nu = y - sys.C.at(k) * pred;
  st.x_check = pred + st.K * st.nu;
  return st;
}

CovarianceSchedule precompute_covariances(const SystemModel& sys, int horizon,
                                          const FilterOptions& opts) {
  CovarianceSchedule out;
  out.horizon = horizon;
  const auto count = static_cast<std::size_t>(horizon) + 2;
  out.P.reserve(count);
  out.M.reserve(count);
  out.K.reserve(count);
  out.N.reserve(count);
  out.joseph.reserve(count);

  Matrix M = sys.M0;
  for (std::size_t k = 0; k < count; ++k) {
    const int t = static_cast<int>(k);
    if (k > 0) {
      const Matrix& A = sys.A.at(t - 1);
      M = symmetrize(A * out.P.back() * A.transpose() + sys.W.at(t - 1));
    }
    auto upd = covariance_update(M, sys.C.at(t), sys.V.at(t), opts);
    out.M.push_back(M);
    out.P.push_back(std::move(upd.P));
    out.K.push_back(std::move(upd.K));
    out.N.push_back(std::move(upd.N));
    out.joseph.push_back(upd.joseph ? 1 : 0);
  }
  return out;
}

void ScheduledFilter::initialize(const Vector& y0) {
  k_ = 0;
  nu_ = y0 - sys_->C.at(0) * sys_->m0;
  x_check_ = sys_->m0 + cov_->K[0] * nu_;
}

void ScheduledFilter::step(const Vector& a_prev, const Vector& y) {
  ++k_;
  pred_.noalias() = sys_->A.at(k_ - 1) * x_check_;
  pred_.noalias() += sys_->B.at(k_ - 1) * a_prev;
  nu_ = y;
  nu_.noalias() -= sys_->C.at(k_) * pred_;
  x_check_ = pred_;
  x_check_.noalias() += cov_->K[static_cast<std::size_t>(k_)] * nu_;
}

}  // namespace harqnc
