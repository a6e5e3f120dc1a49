#ifndef MPPGEO_MPP_ENGINE_HPP
#define MPPGEO_MPP_ENGINE_HPP

#include "mppgeo/bvp_shooting.hpp"
#include "mppgeo/geom_core.hpp"

#include <limits>
#include <vector>

namespace mppgeo {

/// Position, parallel frame, frame components λ_r = λ(f_r) of the covector,
/// and the bivector χ^{αβ} packed as its strict upper triangle.
struct MPPState {
  Vec x;
  Mat frame;
  Vec lam;
  Vec chi;

  /// Flat layout [x, frame (column-major), lam, chi].
  Vec pack() const;
  static MPPState unpack(const Vec& y, int dim, int rank);
};

struct MPPProblem {
  ManifoldModel model;
  DriftModel drift;
  CovarianceSchedule sigma;
  double horizon = 1.0;
  int steps = 1000;
  TransportOptions transport;

  /// The start point is model.origin, where frame0 lives.
  const Vec& start() const { return model.origin; }
  void validate() const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<MPPState> states;
  /// Chart velocities ẋ at every grid time.
  std::vector<Vec> velocities;
  /// Running Onsager–Machlup energy ½∫ λ_Eᵀ Σ λ_E dt (trapezoid).
  std::vector<double> energy;
  /// H = ½ λ_Eᵀ Σ λ_E + λ(u) at every grid time.
  std::vector<double> hamiltonian;
  /// Largest deviation of the transported E-block Gram matrix from
  /// metric_e (zero when the model carries no chart metric).
  double max_constraint_violation = 0.0;

  const MPPState& final_state() const { return states.back(); }
  double total_energy() const { return energy.empty() ? 0.0 : energy.back(); }
  CurvePath path() const;
};

/// Time derivative of the state: ẋ = u + F_E Σ λ_E, ḟ = −Γ(ẋ) f,
/// λ̇_r = −λ(∇_{f_r} u) − λ(T(ẋ, f_r)) + Σ_{αβ} χ^{αβ} g(R(ẋ, f_r) f_α, f_β),
/// χ̇^{αβ} = ½((Σλ)_α λ_β − (Σλ)_β λ_α).
MPPState mpp_rhs(const MPPProblem& problem, double t, const MPPState& state);

/// Flat-vector version used by the integrators.
Vec mpp_rhs_packed(const MPPProblem& problem, double t, const Vec& y);

/// Initial state at the origin with the metric_e-orthonormal frame0.
MPPState initial_state(const MPPProblem& problem, const Vec& lam0, const Vec& chi0);

/// RK4 trajectory from (o, frame0, lam0, chi0); chi0 is packed.
Trajectory integrate_forward(const MPPProblem& problem, const Vec& lam0, const Vec& chi0);

/// Final state only; no per-step storage.
MPPState integrate_endpoint(const MPPProblem& problem, const Vec& lam0, const Vec& chi0);

double hamiltonian(const MPPProblem& problem, double t, const MPPState& state);

/// ½∫ ⟨ω̇, ω̇⟩ dt with ω̇ = Σ^{-1/2} //^{-1}(γ̇ − u), trapezoid on the path grid.
double om_energy(const ManifoldModel& model, const CovarianceSchedule& sigma, const DriftModel& drift,
                 const CurvePath& path, const TransportOptions& opts = {});

struct SingularityCertificate {
  double min_singular_value = std::numeric_limits<double>::infinity();
  /// Frobenius norm of the weighted map λ_0 ↦ (λ_t)_t on full covectors.
  double scale = 0.0;
  bool is_singular = false;
};

/// Annihilator propagation D/dt λ + λ∇u + λT(γ̇, ·) = 0 from a basis of
/// Ann(E_o); singular iff some combination keeps λ_t|_E = 0 on the grid.
SingularityCertificate singularity_certificate(const ManifoldModel& model, const DriftModel& drift,
                                               const CurvePath& path, const TransportOptions& opts = {});

/// Relative horizontality tolerance for om_energy and singularity_certificate.
inline constexpr double kHorizontalTol = 1e-6;
/// Relative singular-value threshold.
inline constexpr double kSingularTol = 1e-8;

/// Constant-coefficient data of a locally homogeneous space, all in the
/// orthonormal frame at o: torsion, curvature, drift a_t = u_t(o) and Σ_t.
struct HomogeneousData {
  int sr_rank = 0;
  Tensor3 torsion;
  Tensor4 curvature;
  std::function<Vec(double)> drift;
  CovarianceSchedule sigma;
};

struct HomogeneousDerivative {
  Vec alpha_dot;
  Vec chi_dot;
  /// Velocity z_t = Σ ♯α + a_t in T_oM; γ̇ = //_t z_t.
  Vec z;
};

HomogeneousDerivative homogeneous_reduction_rhs(const HomogeneousData& data, double t, const Vec& alpha,
                                                const Vec& chi);

struct MPPBoundaryResult {
  Vec lam0;
  Vec chi0;
  ShootingResult shooting;
  Trajectory trajectory;
};

/// Residual (x_T − target, χ_T) over unknowns (λ_0, χ_0).
ShootingProblem mpp_shooting_problem(const MPPProblem& problem, const Vec& target);

/// Flat-space guess: λ_E = Σ_0^{-1} F_E^+ (target − o) / T, χ_0 = 0.
Vec mpp_default_guess(const MPPProblem& problem, const Vec& target);

MPPBoundaryResult solve_mpp_bvp(const MPPProblem& problem, const Vec& target, const ShootingConfig& config = {},
                                const Vec* guess = nullptr);

}  // namespace mppgeo

#endif  // MPPGEO_MPP_ENGINE_HPP
