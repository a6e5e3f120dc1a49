#ifndef MPPGEO_LIE_MPP_HPP
#define MPPGEO_LIE_MPP_HPP

#include "mppgeo/bvp_shooting.hpp"
#include "mppgeo/geom_core.hpp"
#include "mppgeo/mpp_engine.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mppgeo {

/// Right: γ̇ = z·γ and α̇ = −(ad z)*α. Left: γ̇ = γ·z and α̇ = (ad z)*α.
enum class LieConvention { Right, Left };

/// Matrix Lie group given by structure constants c^k_{ij} of a basis
/// A_1..A_d, [A_i, A_j] = Σ_k c^k_{ij} A_k, and a matrix representation.
/// A_1..A_J span 𝔢 and are orthonormal for `inner`.
struct LieGroupModel {
  std::string name;
  int dim = 0;
  int sr_rank = 0;
  /// structure(k, i, j) = c^k_{ij}.
  Tensor3 structure;
  std::vector<Mat> rep;
  /// Inner product on 𝔤 in the basis A_i.
  Mat inner;
  /// Drift curve a_t ∈ 𝔤; empty means zero.
  std::function<Vec(double)> drift;
  CovarianceSchedule sigma;
  LieConvention convention = LieConvention::Right;
  /// exp(rep(ξ)); the matrix exponential is used when empty.
  std::function<Mat(const Vec&)> exp;
  /// Basis coordinates of log(g); used for shooting residuals when set.
  std::function<Vec(const Mat&)> log;
  /// Group of orthogonal matrices: enables polar re-projection.
  bool orthogonal = false;

  Mat algebra_matrix(const Vec& z) const;
  Vec bracket(const Vec& x, const Vec& y) const;
  /// Matrix of ad(z): (k, j) ↦ Σ_i z^i c^k_{ij}.
  Mat ad(const Vec& z) const;
  Vec drift_at(double t) const;
  Mat exp_map(const Vec& xi) const;
  /// Basis coordinates of log(g), or of the projection of g − I when no
  /// log is supplied (a local chart around the identity).
  Vec group_log(const Mat& g) const;
  Mat identity() const;
  /// Antisymmetry, Jacobi identity, representation brackets, inner product
  /// and covariance rank. Throws InvalidModel.
  void validate() const;
};

struct LieMPPState {
  Mat gamma;
  Vec alpha;
};

struct LieDerivative {
  Mat gamma_dot;
  Vec alpha_dot;
  Vec z;
};

/// z_t = Σ_t α_E + a_t, α̇ = ∓(ad z_t)*α, γ̇ = z·γ or γ·z by convention.
LieDerivative lie_mpp_rhs(const LieGroupModel& model, double t, const LieMPPState& state);

struct LieTrajectory {
  std::vector<double> times;
  std::vector<LieMPPState> states;
  std::vector<Vec> z;
  /// Running energy ½∫ α_Eᵀ Σ α_E dt (trapezoid).
  std::vector<double> energy;
  /// ⟨Σ α_E, α_E⟩ at every grid time.
  std::vector<double> quadratic;
  /// Largest ‖γᵀγ − I‖ seen before any re-projection (orthogonal groups).
  double max_orthogonality_defect = 0.0;

  const LieMPPState& final_state() const { return states.back(); }
  double total_energy() const { return energy.empty() ? 0.0 : energy.back(); }
};

/// Field for rkmk4_step: returns (z, α̇) at (t, γ, α).
using LieField = std::function<std::pair<Vec, Vec>(double, const Mat&, const Vec&)>;

/// One Runge–Kutta–Munthe-Kaas step of order four for γ̇ = z·γ (right) or
/// γ̇ = γ·z (left) coupled to α̇; the γ update is an exponential of a Lie
/// algebra element, so it stays on the group.
void rkmk4_step(const LieGroupModel& model, const LieField& field, double t, double h, Mat& gamma, Vec& alpha);

/// Nearest orthogonal matrix (polar factor).
Mat polar_projection(const Mat& g);

inline constexpr int kReprojectEvery = 100;

/// Forward solution from γ_0 = 1 (or gamma0) and α_0.
LieTrajectory integrate_group(const LieGroupModel& model, const Vec& alpha0, double horizon, int steps,
                              const Mat* gamma0 = nullptr);

/// Annihilator test α̇ = ∓(ad z_t)*α from a basis of Ann(𝔢), with the same
/// weighted smallest-singular-value construction as the general engine.
SingularityCertificate lie_singular_check(const LieGroupModel& model, const std::function<Vec(double)>& z,
                                          double horizon, int steps);
/// Same with z sampled on a trajectory grid (linear interpolation).
SingularityCertificate lie_singular_check(const LieGroupModel& model, const LieTrajectory& trajectory);

/// Splitting 𝔤 = 𝔢 ⊕ 𝔨 with 𝔨 = span(A_{J+1}..A_d): 𝔨 a subalgebra,
/// 𝔢 ⊥ 𝔨, ad(𝔨)-invariant inner product, [𝔨, 𝔢] ⊆ 𝔢, [𝔢, 𝔢] ⊆ 𝔨.
/// Throws SplittingInvalid.
void validate_splitting(const LieGroupModel& model, double tol = 1e-12);

struct SubgroupState {
  Mat gamma;
  /// w = ♯α = w_𝔢 + w_𝔨 in the basis A_i.
  Vec w;
};

struct SubgroupDerivative {
  Mat gamma_dot;
  Vec w_dot;
};

/// γ̇ = γ·(Σ w_𝔢 + a), ẇ_𝔢 = ad(Σ w_𝔢 + a_𝔢)^† w_𝔨 + ad(a_𝔨)^† w_𝔢,
/// ẇ_𝔨 = ad(Σ w_𝔢 + a_𝔢)^† w_𝔢 + ad(a_𝔨)^† w_𝔨, with ^† the adjoint for
/// the inner product.
SubgroupDerivative subgroup_invariant_rhs(const LieGroupModel& model, double t, const SubgroupState& state);

struct LieBoundaryResult {
  Vec alpha0;
  ShootingResult shooting;
  LieTrajectory trajectory;
};

/// Flat guess α_E = Σ_0^{-1}(log(target)/T − a_0)_E, other components 0.
Vec lie_default_guess(const LieGroupModel& model, const Mat& target, double horizon);

/// Shooting over α_0 ∈ ℝ^d with residual group_log(target⁻¹ γ_T).
LieBoundaryResult lie_shoot(const LieGroupModel& model, const Mat& target, double horizon, int steps,
                            const ShootingConfig& config = {}, const Vec* guess = nullptr);

/// so(3) basis A_i = hat(e_i), c^k_{ij} = ε_{ijk}, identity inner product.
Mat hat3(const Vec& v);
Vec vee3(const Mat& m);
/// Rodrigues formula.
Mat so3_exp(const Vec& v);
/// Rotation vector of a rotation matrix (angle in [0, π]).
Vec so3_log(const Mat& r);

LieGroupModel so3_model(const Mat& sigma, const Vec& drift = Vec(), LieConvention convention = LieConvention::Right);

/// Heisenberg algebra [A_1, A_2] = A_3 with 𝔢 = span(A_1, A_2), realized
/// as strictly upper triangular 3×3 matrices.
LieGroupModel heisenberg_group_model(const Mat& sigma, const Vec& drift = Vec(),
                                     LieConvention convention = LieConvention::Right);

}  // namespace mppgeo

#endif  // MPPGEO_LIE_MPP_HPP
