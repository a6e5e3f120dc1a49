#ifndef MPPGEO_HOMOGENEOUS_MPP_HPP
#define MPPGEO_HOMOGENEOUS_MPP_HPP

#include "mppgeo/bvp_shooting.hpp"
#include "mppgeo/lie_mpp.hpp"

#include <functional>
#include <vector>

namespace mppgeo {

/// Homogeneous space N = G/K. The group uses the left convention; its first
/// sr_rank basis elements span 𝔭 = 𝔨^⊥ and the remaining ones span 𝔨.
struct HomogeneousModel {
  LieGroupModel group;
  /// γ ↦ ambient coordinates of π(γ).
  std::function<Vec(const Mat&)> project;
  /// (γ, X) ↦ dπ(γ·X) in ambient coordinates, X in basis coordinates.
  std::function<Vec(const Mat&, const Vec&)> push;
  /// Ambient point of N ↦ base chart coordinates, and its domain.
  std::function<Vec(const Vec&)> chart;
  std::function<bool(const Vec&)> chart_domain;
  /// Base drift ǔ_t(p) as an ambient tangent vector; empty means zero.
  std::function<Vec(double, const Vec&)> base_drift;
  /// Include −(Dū_γ)*α, the covariant derivative of the lifted drift, in
  /// the momentum equation. Vanishes when ū is constant along the fiber
  /// directions used, e.g. for zero drift.
  bool drift_derivative = true;

  /// Group validity, 𝔭 ⊥ 𝔨 and ad(𝔨)-invariance of the inner product.
  void validate() const;
};

/// Lifted drift ū_t(γ) ∈ 𝔭: the 𝔭-coordinates X with dπ(γ·X) = ǔ_t(π(γ)),
/// found by least squares. Throws LiftDegenerate when dπ_γ on γ·𝔭 is
/// singular.
using LiftedDrift = std::function<Vec(double, const Mat&)>;
LiftedDrift lift_drift_field(const HomogeneousModel& model);

/// ‖dπ(γ·ū_t(γ)) − ǔ_t(π(γ))‖.
double pi_relatedness_residual(const HomogeneousModel& model, double t, const Mat& gamma);

/// γ̇ = γ·z, z = Σ α_𝔭 + ū_t(γ), α̇ = (ad z)*α − (Dū_γ)*α.
LieDerivative hom_mpp_rhs(const HomogeneousModel& model, double t, const LieMPPState& state);

struct HomogeneousTrajectory {
  LieTrajectory lifted;
  /// π(γ_t) in ambient and in base chart coordinates.
  std::vector<Vec> base_ambient;
  std::vector<Vec> base_chart;
};

/// Forward solution from γ_0 (default 1_G) with α_0 = (alpha0_p, 0).
HomogeneousTrajectory hom_integrate(const HomogeneousModel& model, const Vec& alpha0_p, double horizon, int steps,
                                    const Mat* gamma0 = nullptr);

struct HomogeneousBoundaryResult {
  Vec alpha0_p;
  ShootingResult shooting;
  HomogeneousTrajectory trajectory;
};

/// Shooting over α_0 ∈ 𝔭 with residual chart(π(γ_T)) − target.
HomogeneousBoundaryResult sphere_shoot(const HomogeneousModel& model, const Vec& target_chart, double horizon,
                                       int steps, const ShootingConfig& config = {}, const Vec* guess = nullptr);

/// SO(3) → S², π(g) = g e_1, basis (A_2, A_3 | A_1) so that 𝔭 = span(A_2, A_3)
/// and 𝔨 = span(A_1), the stabilizer of e_1. Base chart: the stereographic
/// chart of the sphere preset. `field` is an ambient vector field that is
/// projected onto the tangent planes.
HomogeneousModel sphere_homogeneous_model(const Mat& sigma,
                                          std::function<Eigen::Vector3d(double, const Eigen::Vector3d&)> field = {});

/// Ambient drift used for the sphere-with-drift preset: rotation about a
/// tilted axis plus a pull towards the north pole.
Eigen::Vector3d sphere_preset_field(const Eigen::Vector3d& p);

}  // namespace mppgeo

#endif  // MPPGEO_HOMOGENEOUS_MPP_HPP
