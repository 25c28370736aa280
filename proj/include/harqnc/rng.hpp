#pragma once

#include "harqnc/types.hpp"

#include <cstdint>
#include <random>

namespace harqnc {

using Rng = std::mt19937_64;

/// Independent draws per purpose so that changing the switching policy never
/// shifts the noise or erasure sequences (common random numbers).
enum class Substream : std::uint32_t {
  ProcessNoise = 1,
  MeasurementNoise = 2,
  Erasure = 3,
  Fading = 4,
  Policy = 5,
};

Rng make_stream(std::uint64_t seed, std::uint64_t run_index, Substream which);

struct RunStreams {
  RunStreams(std::uint64_t seed, std::uint64_t run_index);

  Rng process;
  Rng measurement;
  Rng erasure;
  Rng fading;
  Rng policy;
};

/// Uniform draw on [0, 1).
double uniform01(Rng& rng);

/// F with F F' = cov. Cholesky when possible, symmetric square root for PSD input.
Matrix covariance_factor(const Matrix& cov);

/// out = F z with z standard normal.
void sample_gaussian(Rng& rng, const Matrix& factor, Vector& out);

}  // namespace harqnc
