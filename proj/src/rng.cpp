#include "harqnc/rng.hpp"

#include <cmath>

namespace harqnc {

Rng make_stream(std::uint64_t seed, std::uint64_t run_index, Substream which) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(run_index),
                    static_cast<std::uint32_t>(run_index >> 32), static_cast<std::uint32_t>(which)};
  return Rng(seq);
}

RunStreams::RunStreams(std::uint64_t seed, std::uint64_t run_index)
    : process(make_stream(seed, run_index, Substream::ProcessNoise)),
      measurement(make_stream(seed, run_index, Substream::MeasurementNoise)),
      erasure(make_stream(seed, run_index, Substream::Erasure)),
      fading(make_stream(seed, run_index, Substream::Fading)),
      policy(make_stream(seed, run_index, Substream::Policy)) {}

double uniform01(Rng& rng) {
  // 53 random mantissa bits.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Matrix covariance_factor(const Matrix& cov) {
  const Matrix sym = 0.5 * (cov + cov.transpose());
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

void sample_gaussian(Rng& rng, const Matrix& factor, Vector& out) {
  // Box-Muller on our own uniforms so draws do not depend on the standard
  // library's normal_distribution implementation.
  const auto dim = factor.cols();
  Vector z(dim);
  for (Eigen::Index i = 0; i < dim; i += 2) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    const double r = std::sqrt(-2.0 * std::log(u1));
    z(i) = r * std::cos(2.0 * M_PI * u2);
    if (i + 1 < dim) z(i + 1) = r * std::sin(2.0 * M_PI * u2);
  }
  out.noalias() = factor * z;
}

}  // namespace harqnc
