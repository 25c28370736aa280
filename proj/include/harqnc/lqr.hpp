#pragma once

#include "harqnc/model.hpp"

#include <vector>

namespace harqnc {

/// Backward Riccati pass over the horizon.
///
///   S[t]      t = 0..N+1, S[N+1] = Q[N+1]
///   Lambda[t] = B' S[t+1] B + R                 t = 0..N
///   L[t]      = Lambda[t]^{-1} B' S[t+1] A      t = 0..N
///   Gamma[t]  = L[t]' Lambda[t] L[t]            t = 0..N, Gamma[N+1] = 0
///
/// Gamma weights the decoder estimation error in the stage cost; the zero
/// entry at N+1 closes the encoder's threshold statistic at the last step.
struct GainSchedule {
  int horizon = 0;
  std::vector<Matrix> S;
  std::vector<Matrix> L;
  std::vector<Matrix> Gamma;
  std::vector<Matrix> Lambda;
};

GainSchedule riccati_backward(const SystemModel& sys, const CostSpec& cost, int horizon);

/// L_k for 0 <= k <= N; throws std::out_of_range otherwise.
const Matrix& control_gain(const GainSchedule& sched, int k);

}  // namespace harqnc
