#ifndef MPPGEO_MANIFOLDS_HPP
#define MPPGEO_MANIFOLDS_HPP

#include "mppgeo/geom_core.hpp"

#include <Eigen/Dense>

namespace mppgeo {

/// Euclidean ℝ^d with the trivial connection and identity frame.
ManifoldModel flat_model(int dim, const Vec& origin = Vec());

/// Unit sphere S² in the stereographic chart projected from the south pole
/// (north pole ↦ 0), Levi-Civita connection of the round metric. frame0 is
/// the g-orthonormal coordinate frame at origin.
ManifoldModel sphere_model(const Vec& origin = Eigen::Vector2d::Zero());

/// Ambient point of S² ⊂ ℝ³ for chart coordinates x.
Eigen::Vector3d sphere_from_chart(const Vec& x);
/// Chart coordinates of an ambient unit vector (undefined at the south pole).
Vec chart_from_sphere(const Eigen::Vector3d& p);
/// Differential of sphere_from_chart (3×2).
Eigen::Matrix<double, 3, 2> sphere_chart_differential(const Vec& x);
/// Round metric 4 / (1 + |x|²)² I in the chart.
Mat sphere_metric(const Vec& x);

/// Rank-2 toy 3-manifold: ℝ³ with the Heisenberg left-invariant frame
/// X1 = ∂x − (y/2)∂z, X2 = ∂y + (x/2)∂z, X3 = ∂z, the flat connection making
/// this frame parallel (torsion T(X1, X2) = −X3) and E = span(X1, X2).
/// E is bracket-generating.
ManifoldModel heisenberg_model(const Vec& origin = Eigen::Vector3d::Zero());

/// Heisenberg left-invariant frame matrix at x (columns X1, X2, X3).
Mat heisenberg_frame(const Vec& x);

/// Flat connection making the columns of frame(x) parallel:
/// Γ_i = −(∂_i F) F^{-1} by central differences (relative step 1e-5), R = 0.
/// E is spanned by the first sr_rank columns, orthonormal at the origin.
ManifoldModel parallel_frame_model(int dim, int sr_rank, std::function<Mat(const Vec&)> frame, const Vec& origin,
                                   std::function<bool(const Vec&)> domain = {});

/// SO(3) in exponential coordinates x ↦ exp(hat(x)) with the right-invariant
/// frame A_i·γ (frame matrix J_l(x)^{-1}) and its flat connection;
/// the domain is |x| < 3.
ManifoldModel so3_chart_model();

/// Left Jacobian J_l(x) of the rotation-vector chart: γ̇γ⁻¹ = hat(J_l(x) ẋ).
Mat so3_left_jacobian(const Vec& x);

/// Generic fallback: Levi-Civita connection of a chart metric, with Γ from
/// central differences of the metric (relative step 1e-5) and R from central
/// differences of Γ.
ManifoldModel metric_model(int dim, std::function<Mat(const Vec&)> metric, const Vec& origin,
                           std::function<bool(const Vec&)> domain = {});

/// R^l_{ijk} = ∂_iΓ^l_{jk} − ∂_jΓ^l_{ik} + Γ^l_{im}Γ^m_{jk} − Γ^l_{jm}Γ^m_{ik}
/// by central differences of Γ (relative step `step`).
std::function<Tensor4(const Vec&)> curvature_from_christoffel(std::function<Tensor3(const Vec&)> christoffel,
                                                              int dim, double step = 1e-5);

/// Adds μ^k_{ij} (∇̃_{∂_i} ∂_j = ∇_{∂_i} ∂_j + μ^k_{ij} ∂_k) to the connection;
/// torsion and curvature are recomputed (curvature by finite differences).
ManifoldModel perturb_connection(const ManifoldModel& model, std::function<Tensor3(const Vec&)> mu);

}  // namespace mppgeo

#endif  // MPPGEO_MANIFOLDS_HPP
