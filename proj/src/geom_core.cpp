#include "mppgeo/geom_core.hpp"

#include "mppgeo/rk4.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mppgeo {

namespace {

constexpr double kFrameCollapse = 1e-10;

Vec flatten(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }

Mat unflatten(const Vec& v, int rows, int cols) { return Eigen::Map<const Mat>(v.data(), rows, cols); }

void check_domain(const ManifoldModel& model, const Vec& x, double t) {
  if (!x.allFinite()) throw NonFiniteState("non-finite chart point at t=" + std::to_string(t));
  if (!model.in_domain(x)) throw PathLeavesChart("point leaves chart domain at t=" + std::to_string(t));
}

bool uniform(const std::vector<double>& times) {
  if (times.size() < 3) return true;
  const double h = times[1] - times[0];
  for (std::size_t i = 1; i + 1 < times.size(); ++i)
    if (std::abs((times[i + 1] - times[i]) - h) > 1e-9 * std::max(1.0, std::abs(h))) return false;
  return true;
}

void check_times(const std::vector<double>& times) {
  for (std::size_t i = 0; i + 1 < times.size(); ++i)
    if (!(times[i + 1] > times[i])) throw std::invalid_argument("time grid must be strictly increasing");
}

// Shared RK4 driver for a frame carried along an interpolated path. The
// state is [F (column-major), extra]; `extra_rhs` supplies extra' given
// (t, x, xdot, F).
template <typename ExtraRhs>
std::vector<Vec> carry_frame(const ManifoldModel& model, const PathInterpolant& interp, const Mat& frame0,
                             int extra_dim, const ExtraRhs& extra_rhs, const TransportOptions& opts,
                             bool collapse_is_step_error) {
  const int d = model.dim;
  const int n = interp.intervals();
  std::vector<Vec> states;
  states.reserve(n + 1);
  Vec y(d * d + extra_dim);
  y.head(d * d) = flatten(frame0);
  y.tail(extra_dim).setZero();
  states.push_back(y);

  const bool reorth = opts.reorthonormalize_every > 0 && static_cast<bool>(model.metric);
  Mat gram0;
  if (reorth) {
    const Mat fe = frame0.leftCols(model.sr_rank);
    gram0 = fe.transpose() * model.metric(interp.point(0)) * fe;
  }

  Vec x(d), v(d);
  for (int i = 0; i < n; ++i) {
    const double h = interp.step(i);
    const double t0 = interp.time(i);
    auto rhs = [&](double t, const Vec& s) -> Vec {
      interp.eval(i, (t - t0) / h, x, v);
      const Mat f = unflatten(s.head(d * d), d, d);
      Vec out(s.size());
      out.head(d * d) = flatten(frame_derivative(model.christoffel(x), v, f));
      if (extra_dim > 0) out.tail(extra_dim) = extra_rhs(t, x, v, f);
      return out;
    };
    y = rk4_step(rhs, t0, y, h);
    if (!y.allFinite()) throw NonFiniteState("non-finite frame during transport at t=" + std::to_string(t0 + h));
    Mat f = unflatten(y.head(d * d), d, d);
    if (frame_quality(f) < kFrameCollapse) {
      const std::string msg = "frame collapsed at t=" + std::to_string(t0 + h);
      if (collapse_is_step_error) throw StepTooCoarse(msg);
      throw FrameDegenerate(msg);
    }
    if (reorth && (i + 1) % opts.reorthonormalize_every == 0) {
      restore_gram(f, model.sr_rank, model.metric(interp.point(i + 1)), gram0);
      y.head(d * d) = flatten(f);
    }
    states.push_back(y);
  }
  return states;
}

}  // namespace

Mat ManifoldModel::orthonormal_frame0() const {
  Mat f = frame0;
  if (sr_rank == 0 || metric_e.size() == 0) return f;
  if ((metric_e - Mat::Identity(sr_rank, sr_rank)).norm() == 0.0) return f;
  // Columns c' = F_E G^{-1/2} are orthonormal for ⟨a, b⟩ = aᵀ G b.
  f.leftCols(sr_rank) = frame0.leftCols(sr_rank) * spd_inv_sqrt(metric_e);
  return f;
}

void ManifoldModel::validate(const std::vector<Vec>& samples) const {
  if (dim < 1) throw InvalidModel("dimension must be positive");
  if (sr_rank < 0 || sr_rank > dim) throw InvalidModel("sub-Riemannian rank must lie in [0, dim]");
  if (origin.size() != dim) throw InvalidModel("origin has wrong dimension");
  if (frame0.rows() != dim || frame0.cols() != dim) throw InvalidModel("frame0 must be dim×dim");
  if (metric_e.rows() != sr_rank || metric_e.cols() != sr_rank) throw InvalidModel("metric_e must be J×J");
  if (!christoffel || !torsion || !curvature) throw InvalidModel("connection data missing");
  if (frame_quality(frame0) < kFrameCollapse) throw InvalidModel("frame0 columns are linearly dependent");
  if (sr_rank > 0) {
    if ((metric_e - metric_e.transpose()).norm() > 1e-12) throw InvalidModel("metric_e not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(metric_e);
    if (es.eigenvalues().minCoeff() <= 0.0) throw InvalidModel("metric_e not positive definite");
  }
  if (!in_domain(origin)) throw InvalidModel("origin outside chart domain");

  std::vector<Vec> pts = samples;
  pts.push_back(origin);
  for (const Vec& x : pts) {
    const Tensor3 t = torsion(x);
    const Tensor4 r = curvature(x);
    double tscale = 1.0, rscale = 1.0;
    for (int k = 0; k < dim; ++k)
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) tscale = std::max(tscale, std::abs(t(k, i, j)));
    for (int l = 0; l < dim; ++l)
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
          for (int k = 0; k < dim; ++k) rscale = std::max(rscale, std::abs(r(l, i, j, k)));
    for (int k = 0; k < dim; ++k)
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
          if (std::abs(t(k, i, j) + t(k, j, i)) > 1e-9 * tscale)
            throw InvalidModel("torsion is not antisymmetric");
          for (int l = 0; l < dim; ++l)
            if (std::abs(r(l, i, j, k) + r(l, j, i, k)) > 1e-9 * rscale)
              throw InvalidModel("curvature is not antisymmetric in its first two lower indices");
        }
  }
}

Vec CurvePath::velocity(int i) const {
  if (velocities) return (*velocities)[i];
  return finite_difference_velocities(times, points)[i];
}

void CurvePath::validate(const ManifoldModel& model) const {
  if (times.size() != points.size() || points.empty())
    throw std::invalid_argument("path times and points must be non-empty and of equal length");
  if (velocities && velocities->size() != points.size())
    throw std::invalid_argument("stored velocities must match the point count");
  check_times(times);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != model.dim) throw std::invalid_argument("path point has wrong dimension");
    check_domain(model, points[i], times[i]);
  }
}

DriftModel DriftModel::zero(int dim) {
  DriftModel m;
  m.value = [dim](double, const Vec&) { return Vec::Zero(dim); };
  m.jacobian = [dim](double, const Vec&) { return Mat::Zero(dim, dim); };
  m.is_zero = true;
  return m;
}

DriftModel DriftModel::constant(const Vec& u) {
  DriftModel m;
  m.value = [u](double, const Vec&) { return u; };
  const auto dim = u.size();
  m.jacobian = [dim](double, const Vec&) { return Mat::Zero(dim, dim); };
  m.is_zero = u.isZero(0.0);
  return m;
}

DriftModel DriftModel::affine(const Mat& a, const Vec& b) {
  DriftModel m;
  m.value = [a, b](double, const Vec& x) -> Vec { return a * x + b; };
  m.jacobian = [a](double, const Vec&) { return a; };
  return m;
}

DriftModel DriftModel::from_value(std::function<Vec(double, const Vec&)> value) {
  DriftModel m;
  m.value = value;
  m.jacobian = [value](double t, const Vec& x) {
    const auto d = x.size();
    Mat jac(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
      Vec xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      jac.col(i) = (value(t, xp) - value(t, xm)) / (2.0 * h);
    }
    return jac;
  };
  return m;
}

double drift_jacobian_mismatch(const DriftModel& drift, double t, const std::vector<Vec>& samples) {
  const DriftModel fd = DriftModel::from_value(drift.value);
  double worst = 0.0;
  for (const Vec& x : samples) {
    const Mat a = drift.jacobian(t, x);
    const Mat b = fd.jacobian(t, x);
    worst = std::max(worst, (a - b).norm() / std::max(1.0, b.norm()));
  }
  return worst;
}

CovarianceSchedule CovarianceSchedule::constant(const Mat& sigma) {
  CovarianceSchedule s;
  s.times_ = {0.0};
  s.samples_ = {sigma};
  return s;
}

CovarianceSchedule CovarianceSchedule::piecewise_linear(std::vector<double> times, std::vector<Mat> samples) {
  if (times.empty() || times.size() != samples.size())
    throw InvalidModel("covariance schedule needs matching non-empty times and samples");
  check_times(times);
  CovarianceSchedule s;
  s.times_ = std::move(times);
  s.samples_ = std::move(samples);
  return s;
}

Mat CovarianceSchedule::at(double t) const {
  if (samples_.size() == 1 || t <= times_.front()) return samples_.front();
  if (t >= times_.back()) return samples_.back();
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - times_.begin()) - 1;
  const double w = (t - times_[i]) / (times_[i + 1] - times_[i]);
  return (1.0 - w) * samples_[i] + w * samples_[i + 1];
}

Mat CovarianceSchedule::sqrt_at(double t) const { return spd_sqrt(at(t)); }
Mat CovarianceSchedule::inv_sqrt_at(double t) const { return spd_inv_sqrt(at(t)); }
Mat CovarianceSchedule::inverse_at(double t) const { return at(t).inverse(); }

CovarianceSchedule CovarianceSchedule::scaled(double s) const {
  CovarianceSchedule out = *this;
  for (Mat& m : out.samples_) m *= s;
  return out;
}

void CovarianceSchedule::validate() const {
  if (samples_.empty()) throw InvalidModel("empty covariance schedule");
  const auto j = samples_.front().rows();
  for (const Mat& m : samples_) {
    if (m.rows() != j || m.cols() != j) throw InvalidModel("covariance samples must be square of equal size");
    if ((m - m.transpose()).norm() >= 1e-12) throw InvalidModel("covariance sample not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0)) throw InvalidModel("covariance sample not positive definite");
    if (hi / lo >= 1e12) throw InvalidModel("covariance sample ill-conditioned");
  }
}

Mat frame_derivative(const Tensor3& christoffel, const Vec& xdot, const Mat& frame) {
  return -christoffel.contract_first(xdot) * frame;
}

double frame_quality(const Mat& frame) {
  double denom = 1.0;
  for (Eigen::Index c = 0; c < frame.cols(); ++c) denom *= frame.col(c).norm();
  if (denom == 0.0) return 0.0;
  return std::abs(frame.determinant()) / denom;
}

Mat spd_sqrt(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  return es.operatorSqrt();
}

Mat spd_inv_sqrt(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  return es.operatorInverseSqrt();
}

void restore_gram(Mat& frame, int rank, const Mat& g, const Mat& target_gram) {
  if (rank == 0) return;
  const Mat fe = frame.leftCols(rank);
  const Mat gram = fe.transpose() * g * fe;
  frame.leftCols(rank) = fe * spd_inv_sqrt(gram) * spd_sqrt(target_gram);
}

std::vector<double> uniform_grid(double horizon, int steps) {
  if (steps < 1) throw std::invalid_argument("step count must be at least 1");
  std::vector<double> t(steps + 1);
  for (int i = 0; i <= steps; ++i) t[i] = horizon * static_cast<double>(i) / steps;
  return t;
}

std::vector<Vec> finite_difference_velocities(const std::vector<double>& times, const std::vector<Vec>& points) {
  const int n = static_cast<int>(points.size());
  std::vector<Vec> v(n);
  if (n == 0) return v;
  if (n == 1) {
    v[0] = Vec::Zero(points[0].size());
    return v;
  }
  if (n < 5 || !uniform(times)) {
    // Second-order three-point formulas on a general grid.
    for (int i = 0; i < n; ++i) {
      if (n == 2) {
        v[i] = (points[1] - points[0]) / (times[1] - times[0]);
        continue;
      }
      int a = std::clamp(i - 1, 0, n - 3);
      const double t0 = times[a], t1 = times[a + 1], t2 = times[a + 2], t = times[i];
      const double l0 = ((t - t1) + (t - t2)) / ((t0 - t1) * (t0 - t2));
      const double l1 = ((t - t0) + (t - t2)) / ((t1 - t0) * (t1 - t2));
      const double l2 = ((t - t0) + (t - t1)) / ((t2 - t0) * (t2 - t1));
      v[i] = l0 * points[a] + l1 * points[a + 1] + l2 * points[a + 2];
    }
    return v;
  }
  const double h = (times.back() - times.front()) / (n - 1);
  const auto& p = points;
  v[0] = (-25.0 * p[0] + 48.0 * p[1] - 36.0 * p[2] + 16.0 * p[3] - 3.0 * p[4]) / (12.0 * h);
  v[1] = (-3.0 * p[0] - 10.0 * p[1] + 18.0 * p[2] - 6.0 * p[3] + p[4]) / (12.0 * h);
  for (int i = 2; i < n - 2; ++i) v[i] = (p[i - 2] - 8.0 * p[i - 1] + 8.0 * p[i + 1] - p[i + 2]) / (12.0 * h);
  v[n - 2] = (3.0 * p[n - 1] + 10.0 * p[n - 2] - 18.0 * p[n - 3] + 6.0 * p[n - 4] - p[n - 5]) / (12.0 * h);
  v[n - 1] = (25.0 * p[n - 1] - 48.0 * p[n - 2] + 36.0 * p[n - 3] - 16.0 * p[n - 4] + 3.0 * p[n - 5]) / (12.0 * h);
  return v;
}

PathInterpolant::PathInterpolant(const CurvePath& path)
    : times_(path.times),
      points_(path.points),
      velocities_(path.velocities ? *path.velocities : finite_difference_velocities(path.times, path.points)) {}

void PathInterpolant::eval(int i, double theta, Vec& x, Vec& v) const {
  const double h = step(i);
  const double s = theta, s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  const double d00 = 6 * s2 - 6 * s, d10 = 3 * s2 - 4 * s + 1;
  const double d01 = -6 * s2 + 6 * s, d11 = 3 * s2 - 2 * s;
  const Vec& p0 = points_[i];
  const Vec& p1 = points_[i + 1];
  const Vec& v0 = velocities_[i];
  const Vec& v1 = velocities_[i + 1];
  x = h00 * p0 + h10 * h * v0 + h01 * p1 + h11 * h * v1;
  v = (d00 * p0 + d01 * p1) / h + d10 * v0 + d11 * v1;
}

FrameTransport transport_frame(const ManifoldModel& model, const CurvePath& path, const Mat& frame0,
                               const TransportOptions& opts) {
  path.validate(model);
  if (frame0.rows() != model.dim || frame0.cols() != model.dim)
    throw std::invalid_argument("frame0 must be dim×dim");
  const PathInterpolant interp(path);
  const int d = model.dim;
  auto none = [](double, const Vec&, const Vec&, const Mat&) { return Vec(); };
  const auto states = carry_frame(model, interp, frame0, 0, none, opts, false);
  FrameTransport out;
  out.frames.reserve(states.size());
  out.coframes.reserve(states.size());
  for (const Vec& s : states) {
    Mat f = unflatten(s.head(d * d), d, d);
    out.coframes.push_back(f.inverse());
    out.frames.push_back(std::move(f));
  }
  return out;
}

Vec parallel_transport(const ManifoldModel& model, const CurvePath& path, const Vec& v0, const TransportOptions& opts) {
  if (v0.size() != model.dim) throw std::invalid_argument("v0 has wrong dimension");
  path.validate(model);
  if (path.size() == 1) return v0;
  const Mat f0 = model.orthonormal_frame0();
  const PathInterpolant interp(path);
  const int d = model.dim;
  auto none = [](double, const Vec&, const Vec&, const Mat&) { return Vec(); };
  const auto states = carry_frame(model, interp, f0, 0, none, opts, true);
  const Mat ft = unflatten(states.back().head(d * d), d, d);
  return ft * f0.partialPivLu().solve(v0);
}

CurvePath develop(const ManifoldModel& model, const AntiDevelopmentPath& omega, const DriftModel& drift,
                  const TransportOptions& opts) {
  const int d = model.dim;
  if (omega.values.empty() || omega.times.size() != omega.values.size())
    throw std::invalid_argument("anti-development needs matching times and values");
  if (omega.values.front().norm() != 0.0) throw std::invalid_argument("anti-development must start at 0");
  check_times(omega.times);

  CurvePath wpath{omega.times, omega.values, std::nullopt};
  const PathInterpolant winterp(wpath);
  const Mat f0 = model.orthonormal_frame0();
  const Mat f0inv = f0.inverse();

  CurvePath out;
  out.times = omega.times;
  out.points.reserve(omega.values.size());
  std::vector<Vec> vels;
  vels.reserve(omega.values.size());

  Vec y(d + d * d);
  y.head(d) = model.origin;
  y.tail(d * d) = flatten(f0);
  check_domain(model, model.origin, omega.times.front());

  const bool reorth = opts.reorthonormalize_every > 0 && static_cast<bool>(model.metric);
  Mat gram0;
  if (reorth) gram0 = f0.leftCols(model.sr_rank).transpose() * model.metric(model.origin) * f0.leftCols(model.sr_rank);

  Vec w(d), wdot(d);
  auto velocity = [&](double t, const Vec& x, const Mat& f, const Vec& wd) -> Vec {
    Vec v = f * (f0inv * wd);
    if (!drift.is_zero) v += drift.value(t, x);
    return v;
  };

  out.points.push_back(model.origin);
  vels.push_back(velocity(omega.times.front(), model.origin, f0, winterp.velocity(0)));

  for (int i = 0; i < winterp.intervals(); ++i) {
    const double h = winterp.step(i);
    const double t0 = winterp.time(i);
    auto rhs = [&](double t, const Vec& s) -> Vec {
      winterp.eval(i, (t - t0) / h, w, wdot);
      const Vec x = s.head(d);
      const Mat f = unflatten(s.tail(d * d), d, d);
      const Vec v = velocity(t, x, f, wdot);
      Vec out_s(s.size());
      out_s.head(d) = v;
      out_s.tail(d * d) = flatten(frame_derivative(model.christoffel(x), v, f));
      return out_s;
    };
    y = rk4_step(rhs, t0, y, h);
    const Vec x = y.head(d);
    check_domain(model, x, t0 + h);
    if (!y.allFinite()) throw NonFiniteState("non-finite frame during development");
    Mat f = unflatten(y.tail(d * d), d, d);
    if (frame_quality(f) < kFrameCollapse) throw FrameDegenerate("frame collapsed during development");
    if (reorth && (i + 1) % opts.reorthonormalize_every == 0) {
      restore_gram(f, model.sr_rank, model.metric(x), gram0);
      y.tail(d * d) = flatten(f);
    }
    out.points.push_back(x);
    vels.push_back(velocity(t0 + h, x, f, winterp.velocity(i + 1)));
  }
  out.velocities = std::move(vels);
  return out;
}

AntiDevelopmentPath antidevelop(const ManifoldModel& model, const CurvePath& path, const DriftModel& drift,
                                const TransportOptions& opts) {
  path.validate(model);
  if ((path.points.front() - model.origin).norm() > 1e-12 * std::max(1.0, model.origin.norm()))
    throw std::invalid_argument("path must start at the model origin");
  const int d = model.dim;
  const Mat f0 = model.orthonormal_frame0();
  AntiDevelopmentPath out;
  out.times = path.times;
  if (path.size() == 1) {
    out.values = {Vec::Zero(d)};
    return out;
  }
  const PathInterpolant interp(path);
  auto omega_rhs = [&](double t, const Vec& x, const Vec& v, const Mat& f) -> Vec {
    Vec rel = v;
    if (!drift.is_zero) rel -= drift.value(t, x);
    return f0 * f.partialPivLu().solve(rel);
  };
  const auto states = carry_frame(model, interp, f0, d, omega_rhs, opts, false);
  out.values.reserve(states.size());
  for (const Vec& s : states) out.values.push_back(s.tail(d));
  return out;
}

}  // namespace mppgeo
