#ifndef MPPGEO_BVP_SHOOTING_HPP
#define MPPGEO_BVP_SHOOTING_HPP

#include "mppgeo/types.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace mppgeo {

struct ShootingProblem {
  int unknown_dim = 0;
  std::function<Vec(const Vec&)> residual;
  /// Per-component residual scales; empty means all ones.
  Vec scale;
};

struct ShootingConfig {
  double tol = 1e-8;
  int max_iter = 100;
  /// Relative forward-difference step, rounded down to a power of two.
  double fd_step = 1e-6;
  double backtrack = 0.5;
  double min_step = 1e-6;
  /// Multi-start perturbation scales, relative to max(‖guess‖, 1).
  std::vector<double> restarts{0.1, 0.5, 1.0};
  std::uint64_t seed = 20240601;
  double max_condition = 1e12;
  /// Throw NonConvergence instead of returning an unconverged result.
  bool throw_on_failure = true;
};

struct ShootingResult {
  Vec solution;
  Vec residual;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Condition number of the last Jacobian used (0 when none was formed).
  double condition = 0.0;
  /// Scaled residual norm after every accepted Newton step of the winning start.
  std::vector<double> history;
  int starts_used = 1;
};

/// Forward-difference Jacobian with per-column step fd_step·max(1, |u_i|)
/// rounded to a power of two. Columns may be evaluated concurrently.
Mat jacobian(const ShootingProblem& problem, const Vec& point, const ShootingConfig& config = {},
             const Vec* base_residual = nullptr);

/// Damped Newton shooting with Armijo backtracking and multi-start.
ShootingResult solve(const ShootingProblem& problem, const Vec& guess, const ShootingConfig& config = {});

}  // namespace mppgeo

#endif  // MPPGEO_BVP_SHOOTING_HPP
