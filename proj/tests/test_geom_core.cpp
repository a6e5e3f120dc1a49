#include "doctest.h"
#include "oracles.hpp"

#include "mppgeo/geom_core.hpp"
#include "mppgeo/manifolds.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace mppgeo;

namespace {

CurvePath latitude_loop(double theta, int steps) {
  const double r = std::tan(theta / 2.0);
  auto x = [r](double t) {
    Vec p(2);
    p << r * std::cos(2 * std::numbers::pi * t), r * std::sin(2 * std::numbers::pi * t);
    return p;
  };
  auto v = [r](double t) {
    const double w = 2 * std::numbers::pi;
    Vec p(2);
    p << -w * r * std::sin(w * t), w * r * std::cos(w * t);
    return p;
  };
  return oracle::sample_path(x, v, 1.0, steps);
}

CurvePath straight_line(const Vec& a, const Vec& b, int steps) {
  return oracle::sample_path([&](double t) -> Vec { return a + t * (b - a); }, [&](double) -> Vec { return b - a; },
                             1.0, steps);
}

double round_trip_error(int steps) {
  const ManifoldModel s2 = sphere_model();
  CurvePath path = oracle::wiggly_sphere_path(steps);
  // Finite-difference velocities make the discretization error visible.
  path.velocities.reset();
  const DriftModel zero = DriftModel::zero(2);
  const CurvePath back = develop(s2, antidevelop(s2, path, zero), zero);
  double err = 0.0;
  for (int i = 0; i < path.size(); ++i) err = std::max(err, (back.points[i] - path.points[i]).norm());
  return err;
}

}  // namespace

TEST_CASE("flat transport is the identity") {
  const ManifoldModel flat = flat_model(2);
  Vec a(2), b(2), v0(2);
  a << 0.0, 0.0;
  b << 1.0, -2.0;
  v0 << 1.0, 0.0;
  CHECK((parallel_transport(flat, straight_line(a, b, 50), v0) - v0).norm() == 0.0);
  const FrameTransport ft = transport_frame(flat, straight_line(a, b, 50), Mat::Identity(2, 2));
  for (const Mat& f : ft.frames) CHECK((f - Mat::Identity(2, 2)).norm() == 0.0);
}

TEST_CASE("zero-length path leaves the vector unchanged") {
  const ManifoldModel s2 = sphere_model();
  CurvePath p;
  p.times = {0.0};
  p.points = {Vec::Zero(2)};
  Vec v0(2);
  v0 << 0.3, -0.7;
  CHECK(parallel_transport(s2, p, v0) == v0);
}

TEST_CASE("latitude holonomy on S2 rotates by 2π(1 − cos θ)") {
  const double theta = std::numbers::pi / 3.0;
  const ManifoldModel s2 = sphere_model(latitude_loop(theta, 10).points[0]);
  Vec v0(2);
  v0 << 1.0, 0.0;
  const Vec vt = parallel_transport(s2, latitude_loop(theta, 1000), v0);
  const double angle = 2 * std::numbers::pi * (1.0 - std::cos(theta));
  Vec expected(2);
  expected << std::cos(angle), std::sin(angle);
  CHECK((vt - expected).norm() < 1e-8);
  // Finer-step cross-check.
  const Vec fine = parallel_transport(s2, latitude_loop(theta, 10000), v0);
  CHECK((fine - vt).norm() < 1e-9);
}

TEST_CASE("transported frame on the latitude loop equals frame0 composed with the holonomy") {
  const double theta = std::numbers::pi / 3.0;
  const CurvePath loop = latitude_loop(theta, 1000);
  const ManifoldModel s2 = sphere_model(loop.points[0]);
  const FrameTransport ft = transport_frame(s2, loop, s2.frame0);
  // Rotation by π in an orthonormal frame negates both columns.
  CHECK((ft.frames.back() + s2.frame0).norm() < 1e-8);
  CHECK((ft.frames.back() * ft.coframes.back() - Mat::Identity(2, 2)).norm() < 1e-12);
}

TEST_CASE("Levi-Civita transport preserves the Gram matrix") {
  const ManifoldModel s2 = sphere_model();
  const CurvePath path = oracle::wiggly_sphere_path(1000);
  TransportOptions no_fix;
  no_fix.reorthonormalize_every = 0;
  const FrameTransport ft = transport_frame(s2, path, s2.frame0, no_fix);
  double worst = 0.0;
  for (int i = 0; i < path.size(); ++i) {
    const Mat gram = ft.frames[i].transpose() * sphere_metric(path.points[i]) * ft.frames[i];
    worst = std::max(worst, (gram - Mat::Identity(2, 2)).norm());
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("metric defect under transport decays at fourth order") {
  const ManifoldModel s2 = sphere_model();
  TransportOptions no_fix;
  no_fix.reorthonormalize_every = 0;
  std::vector<double> errs;
  for (int n : {25, 50, 100}) {
    const CurvePath path = oracle::wiggly_sphere_path(n);
    const FrameTransport ft = transport_frame(s2, path, s2.frame0, no_fix);
    const Mat gram = ft.frames.back().transpose() * sphere_metric(path.points.back()) * ft.frames.back();
    errs.push_back((gram - Mat::Identity(2, 2)).norm());
  }
  for (std::size_t i = 1; i < errs.size(); ++i) CHECK(errs[i - 1] / errs[i] > 12.0);
}

TEST_CASE("transport is linear and reversible") {
  const ManifoldModel s2 = sphere_model();
  const CurvePath path = oracle::wiggly_sphere_path(1000);
  Vec v(2), w(2);
  v << 0.4, -0.1;
  w << -0.3, 0.9;
  const double a = 1.7, b = -0.6;
  const Vec lhs = parallel_transport(s2, path, a * v + b * w);
  const Vec rhs = a * parallel_transport(s2, path, v) + b * parallel_transport(s2, path, w);
  CHECK((lhs - rhs).norm() < 1e-10);

  CurvePath rev;
  const int n = path.size();
  for (int i = 0; i < n; ++i) {
    rev.times.push_back(path.times[i]);
    rev.points.push_back(path.points[n - 1 - i]);
  }
  std::vector<Vec> rv;
  for (int i = 0; i < n; ++i) rv.push_back(-(*path.velocities)[n - 1 - i]);
  rev.velocities = rv;
  const ManifoldModel s2_end = sphere_model(path.points.back());
  const Vec there = parallel_transport(s2, path, v);
  const Vec back = parallel_transport(s2_end, rev, there);
  CHECK((back - v).norm() < 1e-8);
}

TEST_CASE("develop reproduces straight lines and drift flows in flat space") {
  const ManifoldModel flat = flat_model(2);
  AntiDevelopmentPath om;
  om.times = uniform_grid(1.0, 20);
  Vec dir(2);
  dir << 1.0, 2.0;
  for (double t : om.times) om.values.push_back(t * dir);
  const CurvePath line = develop(flat, om, DriftModel::zero(2));
  for (int i = 0; i < line.size(); ++i) CHECK((line.points[i] - line.times[i] * dir).norm() < 1e-14);

  Vec u(2);
  u << -0.5, 0.25;
  for (auto& w : om.values) w.setZero();
  const CurvePath flow = develop(flat, om, DriftModel::constant(u));
  for (int i = 0; i < flow.size(); ++i) CHECK((flow.points[i] - flow.times[i] * u).norm() < 1e-14);
}

TEST_CASE("develop on S2 gives the great circle") {
  const ManifoldModel s2 = sphere_model();
  const double phi = 0.7;
  AntiDevelopmentPath om;
  om.times = uniform_grid(1.0, 1000);
  // Unit g-norm direction at the origin, where g = 4 I.
  Vec dir(2);
  dir << 0.5 * std::cos(phi), 0.5 * std::sin(phi);
  for (double t : om.times) om.values.push_back(t * dir);
  const CurvePath gc = develop(s2, om, DriftModel::zero(2));
  double err = 0.0;
  for (int i = 0; i < gc.size(); ++i)
    err = std::max(err, (gc.points[i] - oracle::great_circle_chart(phi, gc.times[i])).norm());
  CHECK(err < 1e-6);
}

TEST_CASE("antidevelop of flat lines and drift flows") {
  const ManifoldModel flat = flat_model(2);
  Vec a = Vec::Zero(2), b(2);
  b << 3.0, -1.0;
  const AntiDevelopmentPath om = antidevelop(flat, straight_line(a, b, 40), DriftModel::zero(2));
  for (int i = 0; i < om.size(); ++i) CHECK((om.values[i] - om.times[i] * b).norm() < 1e-13);

  Vec u(2);
  u << 0.2, 0.1;
  const AntiDevelopmentPath drift_only = antidevelop(flat, straight_line(a, u, 40), DriftModel::constant(u));
  for (const Vec& w : drift_only.values) CHECK(w.norm() < 1e-14);
}

TEST_CASE("develop after antidevelop round trip on S2") {
  std::vector<double> errs;
  for (int n : {250, 500, 1000, 2000}) errs.push_back(round_trip_error(n));
  CHECK(errs[2] < 1e-6);
  // The round trip sits at rounding level; fourth order is checked on the
  // anti-development itself against a fine reference.
  const ManifoldModel s2 = sphere_model();
  auto omega_end = [&](int n) {
    // A faster path keeps the error above rounding at N = 2000.
    CurvePath path = oracle::sample_path(
        [](double t) -> Vec { return Vec::Constant(2, 0.3) * std::sin(9.0 * t) + Vec::Unit(2, 1) * 0.4 * t; },
        [](double) -> Vec { return Vec::Zero(2); }, 1.0, n);
    path.velocities.reset();
    return antidevelop(s2, path, DriftModel::zero(2)).values.back();
  };
  const Vec ref = omega_end(32000);
  std::vector<double> om_errs;
  for (int n : {250, 500, 1000, 2000}) om_errs.push_back((omega_end(n) - ref).norm());
  for (std::size_t i = 1; i < om_errs.size(); ++i) {
    INFO("errors " << om_errs[i - 1] << " " << om_errs[i]);
    CHECK(om_errs[i - 1] / om_errs[i] > 12.0);
  }
}

TEST_CASE("path leaving the chart is rejected") {
  const ManifoldModel s2 = sphere_model();
  Vec a = Vec::Zero(2), b(2);
  b << 5000.0, 0.0;
  Vec v0(2);
  v0 << 1.0, 0.0;
  CHECK_THROWS_AS(parallel_transport(s2, straight_line(a, b, 10), v0), PathLeavesChart);
}

TEST_CASE("preset models validate and the sphere curvature matches finite differences") {
  sphere_model().validate({Vec::Constant(2, 0.3)});
  heisenberg_model().validate({Vec::Constant(3, 0.3)});
  flat_model(3).validate();
  const ManifoldModel s2 = sphere_model();
  const auto fd = curvature_from_christoffel(s2.christoffel, 2, 1e-4);
  Vec x(2);
  x << 0.3, -0.45;
  const Tensor4 ra = s2.curvature(x), rf = fd(x);
  for (int l = 0; l < 2; ++l)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) CHECK(std::abs(ra(l, i, j, k) - rf(l, i, j, k)) < 1e-7);
}

TEST_CASE("metric fallback reproduces the sphere Christoffel symbols") {
  const ManifoldModel s2 = sphere_model();
  const ManifoldModel fb = metric_model(2, sphere_metric, Vec::Zero(2));
  Vec x(2);
  x << -0.2, 0.55;
  const Tensor3 ga = s2.christoffel(x), gf = fb.christoffel(x);
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) CHECK(std::abs(ga(k, i, j) - gf(k, i, j)) < 1e-8);
  CHECK((fb.frame0 - s2.frame0).norm() < 1e-14);
}

TEST_CASE("Heisenberg frame is parallel for the toy connection") {
  const ManifoldModel h = heisenberg_model();
  auto x = [](double t) -> Vec {
    Vec p(3);
    p << std::sin(t), 1.0 - std::cos(2 * t), 0.3 * t;
    return p;
  };
  auto v = [](double t) -> Vec {
    Vec p(3);
    p << std::cos(t), 2 * std::sin(2 * t), 0.3;
    return p;
  };
  const CurvePath path = oracle::sample_path(x, v, 1.0, 400);
  const FrameTransport ft = transport_frame(h, path, h.frame0);
  CHECK((ft.frames.back() - heisenberg_frame(path.points.back())).norm() < 1e-10);
}

TEST_CASE("drift jacobian checks and covariance validation") {
  Mat a(2, 2);
  a << 0.0, -1.0, 1.0, 0.0;
  const DriftModel rot = DriftModel::affine(a, Vec::Zero(2));
  std::vector<Vec> samples{Vec::Constant(2, 0.5), Vec::Constant(2, -1.5)};
  CHECK(drift_jacobian_mismatch(rot, 0.0, samples) < 1e-5);
  DriftModel wrong = rot;
  wrong.jacobian = [](double, const Vec&) { return Mat::Identity(2, 2); };
  CHECK(drift_jacobian_mismatch(wrong, 0.0, samples) > 1e-2);

  Mat bad(2, 2);
  bad << 1.0, 0.5, 0.0, 1.0;
  CHECK_THROWS_AS(CovarianceSchedule::constant(bad).validate(), InvalidModel);
  CHECK_THROWS_AS(CovarianceSchedule::constant(Mat::Identity(2, 2) * -1.0).validate(), InvalidModel);
  const CovarianceSchedule pl = CovarianceSchedule::piecewise_linear({0.0, 1.0}, {Mat::Identity(2, 2), 3.0 * Mat::Identity(2, 2)});
  CHECK((pl.at(0.5) - 2.0 * Mat::Identity(2, 2)).norm() < 1e-15);
}
