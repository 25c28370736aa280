#include "harqnc/lqr.hpp"

#include <sstream>
#include <stdexcept>

namespace harqnc {

GainSchedule riccati_backward(const SystemModel& sys, const CostSpec& cost, int horizon) {
  if (horizon < 0) throw std::invalid_argument("riccati_backward: negative horizon");
  const auto steps = static_cast<std::size_t>(horizon) + 1;
  const int n = sys.n();

  GainSchedule out;
  out.horizon = horizon;
  out.S.resize(steps + 1);
  out.L.resize(steps);
  out.Lambda.resize(steps);
  out.Gamma.resize(steps + 1);

  out.S[steps] = cost.Q.at(horizon + 1);
  out.Gamma[steps] = Matrix::Zero(n, n);

  for (int t = horizon; t >= 0; --t) {
    const Matrix& A = sys.A.at(t);
    const Matrix& B = sys.B.at(t);
    const Matrix& S_next = out.S[t + 1];

    const Matrix SB = S_next * B;
    Matrix Lambda = B.transpose() * SB + cost.R.at(t);
    Lambda = 0.5 * (Lambda + Lambda.transpose());

    Eigen::SelfAdjointEigenSolver<Matrix> es(Lambda, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > 1e12) {
      std::ostringstream os;
      os << "riccati_backward: Lambda_" << t << " singular or ill-conditioned (eigenvalues " << lo
         << " .. " << hi << ")";
      throw NumericalError(os.str());
    }
    Eigen::LLT<Matrix> llt(Lambda);
    if (llt.info() != Eigen::Success) throw NumericalError("riccati_backward: Cholesky failed");

    const Matrix BtSA = SB.transpose() * A;
    Matrix L = llt.solve(BtSA);
    Matrix S = cost.Q.at(t) + A.transpose() * S_next * A - BtSA.transpose() * L;
    out.S[t] = 0.5 * (S + S.transpose());

    Matrix Gamma = L.transpose() * Lambda * L;
    out.Gamma[t] = 0.5 * (Gamma + Gamma.transpose());
    out.L[t] = std::move(L);
    out.Lambda[t] = std::move(Lambda);
  }
  return out;
}

const Matrix& control_gain(const GainSchedule& sched, int k) {
  if (k < 0 || k > sched.horizon)
    throw std::out_of_range("control_gain: k=" + std::to_string(k) + " outside 0.." +
                            std::to_string(sched.horizon));
  return sched.L[static_cast<std::size_t>(k)];
}

}  // namespace harqnc
