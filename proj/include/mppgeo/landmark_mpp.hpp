#ifndef MPPGEO_LANDMARK_MPP_HPP
#define MPPGEO_LANDMARK_MPP_HPP

#include "mppgeo/bvp_shooting.hpp"
#include "mppgeo/geom_core.hpp"
#include "mppgeo/mpp_engine.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mppgeo {

enum class FieldKind { Gaussian, Constant, Linear, Custom };

/// Noise vector field σ_α on ℝ^d with its Jacobian grad(x)(i, k) = ∂_k σ^i.
struct NoiseField {
  FieldKind kind = FieldKind::Custom;
  std::function<Vec(const Vec&)> eval;
  std::function<Mat(const Vec&)> grad;
  /// Gaussian descriptor: center p, width τ, direction index m.
  Vec center;
  double width = 0.0;
  int direction = -1;
};

/// σ(x) = exp(−‖x − p‖² / (2τ²)) e_m.
NoiseField gaussian_field(const Vec& center, double width, int direction);
/// σ(x) = v.
NoiseField constant_field(const Vec& v);
/// σ(x) = A x + b.
NoiseField linear_field(const Mat& a, const Vec& b);

/// Largest relative deviation of grad from central differences of eval.
double field_gradient_mismatch(const NoiseField& field, const std::vector<Vec>& samples);

struct LandmarkSystem {
  /// Initial configuration o, one landmark per row (n × d).
  Mat initial;
  std::vector<NoiseField> fields;
  DriftModel drift;
  double horizon = 1.0;
  int steps = 1000;

  int n() const { return static_cast<int>(initial.rows()); }
  int d() const { return static_cast<int>(initial.cols()); }
  int rank() const { return static_cast<int>(fields.size()); }
  /// Shapes, drift presence, and that no field vanishes at every landmark.
  void validate() const;
};

struct LandmarkState {
  Mat x;
  Mat lam;
  /// c_α = Σ_r λ_r(σ_α(x_r)).
  Vec c;
};

/// (ẋ, λ̇) with c evaluated at the state; the returned c is that value.
LandmarkState landmark_rhs(const LandmarkSystem& system, double t, const LandmarkState& state);

/// ½ Σ_α c_α² + Σ_r λ_r(a(x_r)).
double landmark_hamiltonian(const LandmarkSystem& system, double t, const LandmarkState& state);

struct LandmarkTrajectory {
  std::vector<double> times;
  std::vector<LandmarkState> states;
  /// Running energy ½∫ Σ_α c_α² dt (trapezoid).
  std::vector<double> energy;
  std::vector<double> hamiltonian;

  const LandmarkState& final_state() const { return states.back(); }
  double total_energy() const { return energy.empty() ? 0.0 : energy.back(); }
};

LandmarkTrajectory landmark_integrate(const LandmarkSystem& system, const Mat& lam0);
/// Final positions only.
Mat landmark_endpoint(const LandmarkSystem& system, const Mat& lam0);

struct LandmarkBoundaryResult {
  Mat lam0;
  ShootingResult shooting;
  LandmarkTrajectory trajectory;
};

/// Flat heuristic: (targets − drift endpoints)/T per landmark, divided by
/// Σ_α ‖σ_α(o_r)‖² (its reciprocal clipped to [1e-3, 1e3]).
Mat landmark_default_guess(const LandmarkSystem& system, const Mat& targets);

/// Shooting over λ_0 ∈ ℝ^{n·d}. Throws RankDeficient when the shooting
/// Jacobian is too ill-conditioned, NonConvergence otherwise on failure.
LandmarkBoundaryResult landmark_shoot(const LandmarkSystem& system, const Mat& targets, const Mat* lam0_guess = nullptr,
                                      const ShootingConfig& config = {});

/// Propagates the linear λ equation (c frozen along the trajectory) from a
/// basis of ℝ^{n·d} and tests the map λ_0 ↦ (Σ_r λ_r(σ_j(γ_r)))_{j,t} on the
/// step grid. scale is its Frobenius norm.
SingularityCertificate landmark_singular_check(const LandmarkSystem& system, const LandmarkTrajectory& trajectory);

/// Gaussian fields on a per_axis × per_axis grid (2-d scenes) over the
/// bounding box of `scene` inflated by `inflate` on each side, d fields
/// per node.
std::vector<NoiseField> grid_fields(const Mat& scene, int per_axis, double width = 0.5, double inflate = 0.25);

/// n points on a circle (or ellipse with radii rx, ry) around center, the
/// first at angle `phase`.
Mat circle_scene(int n, const Vec& center, double rx, double ry, double phase = 0.0);

/// Packed layout [x row-major, λ row-major].
Vec pack_landmarks(const Mat& x, const Mat& lam);

}  // namespace mppgeo

#endif  // MPPGEO_LANDMARK_MPP_HPP
