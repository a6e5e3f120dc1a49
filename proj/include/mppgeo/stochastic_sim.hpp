#ifndef MPPGEO_STOCHASTIC_SIM_HPP
#define MPPGEO_STOCHASTIC_SIM_HPP

#include "mppgeo/mpp_engine.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace mppgeo {

/// Philox4x32-10 counter-based generator.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;
PhiloxCounter philox4x32(PhiloxCounter counter, PhiloxKey key);

/// Standard normals for one (seed, path, step) cell.
///
/// Block b of the cell uses key (seed low word, seed high word) and counter
/// (b, step, path low word, path high word). Each block yields two 64-bit
/// words u = w0 | w1 << 32 and v = w2 | w3 << 32, mapped to uniforms
/// U = ((u >> 11) + 0.5) · 2^-53 and V likewise, then by Box–Muller to
/// √(−2 ln U) cos 2πV and √(−2 ln U) sin 2πV, in that order.
std::vector<double> philox_normals(std::uint64_t seed, std::uint64_t path, std::uint64_t step, int count);

struct SimConfig {
  int paths = 1000;
  int steps = 1000;
  std::uint64_t seed = 0;
  bool record_endpoints_only = true;
  /// Multiplies Σ; 0 switches the noise off.
  double noise_scale = 1.0;

  void validate() const;
};

struct SampleSet {
  std::vector<double> times;
  /// Endpoints of the paths that stayed in the chart, in path-index order.
  std::vector<Vec> endpoints;
  /// Indices of those paths.
  std::vector<int> path_index;
  /// Full paths when requested, aligned with endpoints.
  std::vector<std::vector<Vec>> paths;
  /// Paths discarded because they left the chart.
  int discarded = 0;

  Vec mean() const;
  Mat covariance() const;
};

/// Stratonovich development dx = F_E Σ_t^{1/2} ∘ dB + u_t(x) dt with the
/// frame transported along x, stepped by Euler–Heun from (o, frame0).
SampleSet sample_development(const MPPProblem& problem, const SimConfig& config);

}  // namespace mppgeo

#endif  // MPPGEO_STOCHASTIC_SIM_HPP
