#include "doctest.h"
#include "test_util.hpp"

#include "mppgeo/manifolds.hpp"
#include "mppgeo/stochastic_sim.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

using namespace mppgeo;
using testutil::diag;
using testutil::vec;

namespace {

MPPProblem flat_problem(const Mat& sigma, DriftModel drift = DriftModel::zero(2)) {
  MPPProblem p;
  p.model = flat_model(2);
  p.sigma = CovarianceSchedule::constant(sigma);
  p.drift = std::move(drift);
  return p;
}

}  // namespace

TEST_CASE("philox known-answer vectors") {
  CHECK(philox4x32({0u, 0u, 0u, 0u}, {0u, 0u}) == PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("normal stream") {
  const std::vector<double> a = philox_normals(42, 3, 7, 5);
  CHECK(a.size() == 5);
  CHECK(a == philox_normals(42, 3, 7, 5));
  // Prefix-stable: fewer draws are the leading part of more draws.
  const std::vector<double> b = philox_normals(42, 3, 7, 2);
  CHECK(b[0] == a[0]);
  CHECK(b[1] == a[1]);
  CHECK(philox_normals(42, 3, 8, 1)[0] != a[0]);
  CHECK(philox_normals(42, 4, 7, 1)[0] != a[0]);
  CHECK(philox_normals(43, 3, 7, 1)[0] != a[0]);

  double s1 = 0.0, s2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double z = philox_normals(1, 0, i, 1)[0];
    s1 += z;
    s2 += z * z;
  }
  CHECK(std::abs(s1 / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 0.05);
}

TEST_CASE("flat Brownian law") {
  SimConfig cfg;
  cfg.paths = 10000;
  cfg.steps = 20;
  cfg.seed = 20240601;
  SUBCASE("isotropic") {
    const SampleSet s = sample_development(flat_problem(Mat::Identity(2, 2)), cfg);
    CHECK(s.endpoints.size() == 10000);
    CHECK(s.discarded == 0);
    const Vec m = s.mean();
    CHECK(std::abs(m[0]) < 3.0 / 100.0);
    CHECK(std::abs(m[1]) < 3.0 / 100.0);
    const Mat c = s.covariance();
    CHECK(std::abs(c(0, 0) - 1.0) < 0.05);
    CHECK(std::abs(c(1, 1) - 1.0) < 0.05);
    CHECK(std::abs(c(0, 1)) < 0.05);
  }
  SUBCASE("anisotropic") {
    MPPProblem p = flat_problem(diag({1.0, 4.0}));
    p.horizon = 0.5;
    const SampleSet s = sample_development(p, cfg);
    const Mat c = s.covariance();
    CHECK(std::abs(c(0, 0) / 0.5 - 1.0) < 0.05);
    CHECK(std::abs(c(1, 1) / 2.0 - 1.0) < 0.05);
    CHECK(std::abs(c(0, 1)) < 0.05 * 2.0);
  }
}

TEST_CASE("seed determinism") {
  SimConfig cfg;
  cfg.paths = 50;
  cfg.steps = 100;
  cfg.seed = 99;
  cfg.record_endpoints_only = false;
  MPPProblem p;
  p.model = sphere_model();
  p.drift = DriftModel::zero(2);
  p.sigma = CovarianceSchedule::constant(diag({0.5, 1.5}));
  const SampleSet a = sample_development(p, cfg);
  const SampleSet b = sample_development(p, cfg);
  REQUIRE(a.endpoints.size() == b.endpoints.size());
  for (std::size_t i = 0; i < a.endpoints.size(); ++i) {
    CHECK((a.endpoints[i] - b.endpoints[i]).norm() == 0.0);
    CHECK(a.paths[i].size() == 101);
  }
  cfg.seed = 100;
  const SampleSet c = sample_development(p, cfg);
  CHECK((a.endpoints[0] - c.endpoints[0]).norm() > 0.0);
}

TEST_CASE("zero noise follows the drift") {
  SimConfig cfg;
  cfg.paths = 20;
  cfg.steps = 50;
  cfg.noise_scale = 0.0;
  const SampleSet s = sample_development(flat_problem(diag({1.0, 4.0}), DriftModel::constant(vec({0.3, -0.2}))), cfg);
  for (const Vec& e : s.endpoints) CHECK((e - vec({0.3, -0.2})).norm() < 1e-10);

  Mat a(2, 2);
  a << 0.0, -1.0, 1.0, 0.0;
  MPPProblem p = flat_problem(Mat::Identity(2, 2), DriftModel::affine(a, Vec::Zero(2)));
  p.model.origin = vec({1.0, 0.0});
  const SampleSet r = sample_development(p, cfg);
  for (const Vec& e : r.endpoints) CHECK((e - r.endpoints.front()).norm() == 0.0);
}

TEST_CASE("endpoint mean error decays under refinement") {
  // Linear drift: the mean of the scheme is its noiseless iterate.
  Mat a(2, 2);
  a << -1.0, 0.5, -0.5, -1.0;
  MPPProblem p = flat_problem(Mat::Identity(2, 2), DriftModel::affine(a, Vec::Zero(2)));
  p.model.origin = vec({1.0, 0.5});
  const Vec exact = Mat(a.exp()) * vec({1.0, 0.5});
  SimConfig cfg;
  cfg.paths = 1;
  cfg.noise_scale = 0.0;
  double previous = 0.0;
  for (int n : {10, 20, 40, 80}) {
    cfg.steps = n;
    const double err = (sample_development(p, cfg).endpoints.front() - exact).norm();
    if (previous > 0.0) CHECK(previous / err > 2.0);
    previous = err;
  }
}

TEST_CASE("short-time spread on the sphere") {
  MPPProblem p;
  p.model = sphere_model();
  p.drift = DriftModel::zero(2);
  p.sigma = CovarianceSchedule::constant(Mat::Identity(2, 2));
  p.horizon = 0.05;
  SimConfig cfg;
  cfg.paths = 10000;
  cfg.steps = 50;
  cfg.seed = 5;
  const SampleSet s = sample_development(p, cfg);
  const Eigen::Vector3d o = sphere_from_chart(p.model.origin);
  double msd = 0.0;
  for (const Vec& e : s.endpoints) {
    const double dist = std::acos(std::clamp(sphere_from_chart(e).dot(o), -1.0, 1.0));
    msd += dist * dist;
  }
  msd /= static_cast<double>(s.endpoints.size());
  // E d² = 2t − t²/3 + O(t³) for Brownian motion on the unit sphere.
  const double t = p.horizon;
  CHECK(std::abs(msd / (2.0 * t - t * t / 3.0) - 1.0) < 0.03);
}
