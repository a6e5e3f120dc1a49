#ifndef MPPGEO_GEOM_CORE_HPP
#define MPPGEO_GEOM_CORE_HPP

#include "mppgeo/errors.hpp"
#include "mppgeo/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mppgeo {

/// Chart-level description of a manifold with connection and a
/// sub-Riemannian structure (E, g) given by the first J columns of frame0.
///
/// Index conventions: christoffel(x)(k, i, j) = Γ^k_{ij} with
/// ∇_{∂_i} ∂_j = Γ^k_{ij} ∂_k; torsion(x)(k, i, j) = T^k_{ij} =
/// Γ^k_{ij} − Γ^k_{ji}; curvature(x)(l, i, j, k) = R^l_{ijk} with
/// R(∂_i, ∂_j) ∂_k = R^l_{ijk} ∂_l.
struct ManifoldModel {
  std::string name;
  int dim = 0;
  int sr_rank = 0;
  std::function<Tensor3(const Vec&)> christoffel;
  std::function<Tensor3(const Vec&)> torsion;
  std::function<Tensor4(const Vec&)> curvature;
  /// Base point o in chart coordinates.
  Vec origin;
  /// Columns are f_{1,0}, …, f_{d,0}; the first sr_rank columns span E_o.
  Mat frame0;
  /// Inner product on 𝔢 in frame0 coordinates; identity means the first
  /// sr_rank columns of frame0 are orthonormal.
  Mat metric_e;
  std::function<bool(const Vec&)> chart_domain;
  /// Optional full chart metric for Levi-Civita presets; enables periodic
  /// re-orthonormalization of transported frames.
  std::function<Mat(const Vec&)> metric;

  bool in_domain(const Vec& x) const { return x.allFinite() && (!chart_domain || chart_domain(x)); }

  /// frame0 with its E-block replaced by a metric_e-orthonormal basis.
  Mat orthonormal_frame0() const;

  /// Checks dimensions, frame independence and the antisymmetries of T and R
  /// at the supplied sample points. Throws InvalidModel.
  void validate(const std::vector<Vec>& samples = {}) const;
};

/// Sampled curve in chart coordinates on an increasing time grid.
struct CurvePath {
  std::vector<double> times;
  std::vector<Vec> points;
  /// Stored velocities; when absent, fourth-order finite differences are used.
  std::optional<std::vector<Vec>> velocities;

  int size() const { return static_cast<int>(points.size()); }
  Vec velocity(int i) const;
  void validate(const ManifoldModel& model) const;
};

/// Anti-development ω_t as chart components of vectors in T_oM; ω_0 = 0.
struct AntiDevelopmentPath {
  std::vector<double> times;
  std::vector<Vec> values;

  int size() const { return static_cast<int>(values.size()); }
};

struct DriftModel {
  std::function<Vec(double, const Vec&)> value;
  /// jacobian(t, x)(k, i) = ∂_i u^k.
  std::function<Mat(double, const Vec&)> jacobian;
  /// Hint: the drift vanishes identically.
  bool is_zero = false;

  static DriftModel zero(int dim);
  static DriftModel constant(const Vec& u);
  /// Linear field u(x) = A x + b.
  static DriftModel affine(const Mat& a, const Vec& b);
  /// Jacobian by central finite differences of value (relative step 1e-6).
  static DriftModel from_value(std::function<Vec(double, const Vec&)> value);
};

/// Maximum relative deviation between the supplied jacobian and central
/// finite differences of value over the sample points.
double drift_jacobian_mismatch(const DriftModel& drift, double t, const std::vector<Vec>& samples);

/// Σ_t acting on 𝔢 coordinates: constant or piecewise-linear in time.
class CovarianceSchedule {
public:
  CovarianceSchedule() = default;
  static CovarianceSchedule constant(const Mat& sigma);
  static CovarianceSchedule piecewise_linear(std::vector<double> times, std::vector<Mat> samples);

  int rank() const { return samples_.empty() ? 0 : static_cast<int>(samples_.front().rows()); }
  bool is_constant() const { return samples_.size() == 1; }
  Mat at(double t) const;
  Mat sqrt_at(double t) const;
  Mat inv_sqrt_at(double t) const;
  Mat inverse_at(double t) const;

  /// Multiplies every sample by s (s > 0).
  CovarianceSchedule scaled(double s) const;

  /// Symmetry, positivity and conditioning of every sample. Throws InvalidModel.
  void validate() const;

  const std::vector<double>& times() const { return times_; }
  const std::vector<Mat>& samples() const { return samples_; }

private:
  std::vector<double> times_;
  std::vector<Mat> samples_;
};

struct TransportOptions {
  /// Re-orthonormalize the E-block against the chart metric every this many
  /// steps (0 disables; only active when the model supplies a metric).
  int reorthonormalize_every = 100;
};

struct FrameTransport {
  std::vector<Mat> frames;
  /// Inverse frames (coframe rows f^{r·}).
  std::vector<Mat> coframes;
};

/// Parallel transport of v0 from the first to the last point of the path.
Vec parallel_transport(const ManifoldModel& model, const CurvePath& path, const Vec& v0,
                       const TransportOptions& opts = {});

/// Transport of every column of frame0 along the path, one frame per grid time.
FrameTransport transport_frame(const ManifoldModel& model, const CurvePath& path, const Mat& frame0,
                               const TransportOptions& opts = {});

/// Affine development γ̇ = //_t ω̇_t + u_t(γ_t), γ_0 = o.
CurvePath develop(const ManifoldModel& model, const AntiDevelopmentPath& omega, const DriftModel& drift,
                  const TransportOptions& opts = {});

/// ω_t = ∫_0^t //_s^{-1}(γ̇_s − u_s(γ_s)) ds on the path grid.
AntiDevelopmentPath antidevelop(const ManifoldModel& model, const CurvePath& path, const DriftModel& drift,
                                const TransportOptions& opts = {});

/// Frame ODE right-hand side ḟ = −Γ(x)[ẋ] f.
Mat frame_derivative(const Tensor3& christoffel, const Vec& xdot, const Mat& frame);

/// |det F| / Π ‖columns‖, in [0, 1]; zero for a singular frame.
double frame_quality(const Mat& frame);

/// Löwdin correction of the first `rank` columns so that their g-Gram
/// matrix equals target_gram.
void restore_gram(Mat& frame, int rank, const Mat& g, const Mat& target_gram);

/// Symmetric square root and inverse square root of an SPD matrix.
Mat spd_sqrt(const Mat& a);
Mat spd_inv_sqrt(const Mat& a);

/// Uniform time grid t_i = i T / N, i = 0..N.
std::vector<double> uniform_grid(double horizon, int steps);

/// Hermite interpolant of a sampled path.
class PathInterpolant {
public:
  explicit PathInterpolant(const CurvePath& path);

  int intervals() const { return static_cast<int>(points_.size()) - 1; }
  double step(int i) const { return times_[i + 1] - times_[i]; }
  double time(int i) const { return times_[i]; }
  void eval(int i, double theta, Vec& x, Vec& v) const;
  const Vec& point(int i) const { return points_[i]; }
  const Vec& velocity(int i) const { return velocities_[i]; }

private:
  std::vector<double> times_;
  std::vector<Vec> points_;
  std::vector<Vec> velocities_;
};

/// Fourth-order finite-difference velocities on a uniform grid (lower order
/// for fewer than five samples).
std::vector<Vec> finite_difference_velocities(const std::vector<double>& times, const std::vector<Vec>& points);

}  // namespace mppgeo

#endif  // MPPGEO_GEOM_CORE_HPP
