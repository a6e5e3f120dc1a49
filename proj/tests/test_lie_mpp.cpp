#include "doctest.h"
#include "test_util.hpp"

#include "mppgeo/lie_mpp.hpp"
#include "mppgeo/manifolds.hpp"
#include "mppgeo/mpp_engine.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

using namespace mppgeo;
using testutil::diag;
using testutil::vec;

namespace {

double levi_civita(int i, int j, int k) { return 0.5 * (i - j) * (j - k) * (k - i); }

// Coordinate form of the momentum equation with c^k_{ij} = ε_{ijk}, written out directly.
Vec appendix_alpha_dot(const Mat& sigma, const Vec& a, const Vec& alpha) {
  Vec out = Vec::Zero(3);
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 3; ++k) {
      double inner = 0.0;
      for (int mu = 0; mu < 3; ++mu)
        for (int nu = 0; nu < 3; ++nu) inner += sigma(mu, nu) * alpha[nu] * levi_civita(mu, j, k);
      for (int i = 0; i < 3; ++i) inner += a[i] * levi_civita(i, j, k);
      out[j] -= alpha[k] * inner;
    }
  return out;
}

// Second-order one-sided difference from three equally spaced samples.
template <typename T>
T forward_difference(const T& y0, const T& y1, const T& y2, double h) {
  return (-3.0 * y0 + 4.0 * y1 - y2) / (2.0 * h);
}

const Mat kSigma = diag({0.3, 2.0, 1.0});
const Vec kDrift = vec({1.0, 0.0, 0.0});

}  // namespace

TEST_CASE("so(3) and Heisenberg models validate") {
  CHECK_NOTHROW(so3_model(Mat::Identity(3, 3)).validate());
  CHECK_NOTHROW(heisenberg_group_model(Mat::Identity(2, 2)).validate());
  LieGroupModel bad = so3_model(Mat::Identity(3, 3));
  bad.structure(2, 0, 1) = 2.0;
  CHECK_THROWS_AS(bad.validate(), InvalidModel);
}

TEST_CASE("bi-invariant momentum is stationary") {
  const LieGroupModel m = so3_model(Mat::Identity(3, 3));
  const LieDerivative d = lie_mpp_rhs(m, 0.0, {Mat::Identity(3, 3), vec({1.0, 0.0, 0.0})});
  CHECK(d.alpha_dot.norm() == 0.0);
  CHECK((d.z - vec({1.0, 0.0, 0.0})).norm() == 0.0);
}

TEST_CASE("zero momentum and drift give a stationary state") {
  const LieGroupModel m = so3_model(kSigma);
  const LieDerivative d = lie_mpp_rhs(m, 0.0, {Mat::Identity(3, 3), Vec::Zero(3)});
  CHECK(d.alpha_dot.norm() == 0.0);
  CHECK(d.gamma_dot.norm() == 0.0);
}

TEST_CASE("right-hand side matches the coordinate formula and a fine flow") {
  for (LieConvention conv : {LieConvention::Right, LieConvention::Left}) {
    const LieGroupModel m = so3_model(kSigma, kDrift, conv);
    const Vec alpha = vec({0.0, 1.0, 0.0});
    const LieDerivative d = lie_mpp_rhs(m, 0.0, {Mat::Identity(3, 3), alpha});
    const double sgn = conv == LieConvention::Right ? 1.0 : -1.0;
    CHECK((d.alpha_dot - sgn * appendix_alpha_dot(kSigma, kDrift, alpha)).norm() < 1e-15);

    const double h = 1e-4;
    const LieTrajectory tr = integrate_group(m, alpha, 2 * h, 200);
    const Vec fa = forward_difference(tr.states[0].alpha, tr.states[100].alpha, tr.states[200].alpha, h);
    const Mat fg = forward_difference(tr.states[0].gamma, tr.states[100].gamma, tr.states[200].gamma, h);
    CHECK((fa - d.alpha_dot).norm() < 1e-6);
    CHECK((fg - d.gamma_dot).norm() < 1e-6);
  }
}

TEST_CASE("one-parameter subgroups for the bi-invariant case") {
  const LieGroupModel m = so3_model(Mat::Identity(3, 3));
  const Vec xi = vec({0.7, -1.1, 0.4});
  const LieTrajectory tr = integrate_group(m, xi, 1.0, 1000);
  const Mat expected = Mat(hat3(xi)).exp();
  CHECK((tr.final_state().gamma - expected).norm() < 1e-9);
  double drift = 0.0;
  for (const LieMPPState& s : tr.states) drift = std::max(drift, std::abs(s.alpha.norm() - xi.norm()));
  CHECK(drift < 1e-10);
}

TEST_CASE("quadratic form is conserved for constant covariance without drift") {
  const LieGroupModel m = so3_model(kSigma);
  const LieTrajectory tr = integrate_group(m, vec({0.5, -0.8, 1.2}), 1.0, 1000);
  const double q0 = tr.quadratic.front();
  double worst = 0.0;
  for (double q : tr.quadratic) worst = std::max(worst, std::abs(q - q0) / q0);
  CHECK(worst < 1e-8);
}

TEST_CASE("drifted SO(3) forward run stays on SO(3) and matches a fine-step reference") {
  const LieGroupModel m = so3_model(kSigma, kDrift, LieConvention::Left);
  const Vec alpha0 = vec({0.4, -0.3, 0.9});
  const LieTrajectory tr = integrate_group(m, alpha0, 1.0, 1000);
  CHECK(tr.max_orthogonality_defect < 1e-8);
  CHECK(tr.final_state().gamma.determinant() > 0.0);
  const LieTrajectory fine = integrate_group(m, alpha0, 1.0, 8000);
  CHECK((tr.final_state().gamma - fine.final_state().gamma).norm() < 1e-9);
  CHECK((tr.final_state().alpha - fine.final_state().alpha).norm() < 1e-9);
}

TEST_CASE("group integrator converges at fourth order") {
  const LieGroupModel m = so3_model(kSigma, kDrift);
  const Vec alpha0 = vec({1.0, 0.5, -0.7});
  const Mat ref = integrate_group(m, alpha0, 1.0, 4000).final_state().gamma;
  double prev = 0.0;
  for (int n : {25, 50, 100}) {
    const double err = (integrate_group(m, alpha0, 1.0, n).final_state().gamma - ref).norm();
    if (prev > 0.0) CHECK(prev / err > 12.0);
    prev = err;
  }
}

TEST_CASE("polar projection and so(3) log") {
  const Vec v = vec({0.3, -2.0, 1.1});
  CHECK((so3_log(so3_exp(v)) - v).norm() < 1e-12);
  const Vec w = vec({0.0, 0.0, M_PI - 1e-9});
  CHECK((so3_log(so3_exp(w)) - w).norm() < 1e-6);
  const Mat r = so3_exp(v) + 1e-6 * Mat::Ones(3, 3);
  const Mat p = polar_projection(r);
  CHECK((p.transpose() * p - Mat::Identity(3, 3)).norm() < 1e-14);
  CHECK((p - so3_exp(v)).norm() < 1e-5);
}

TEST_CASE("singular curves on Lie groups") {
  SUBCASE("full rank is never singular") {
    const SingularityCertificate c =
        lie_singular_check(so3_model(Mat::Identity(3, 3)), [](double) { return vec({1.0, 0.0, 0.0}); }, 1.0, 100);
    CHECK(std::isinf(c.min_singular_value));
    CHECK_FALSE(c.is_singular);
  }
  const LieGroupModel h = heisenberg_group_model(Mat::Identity(2, 2));
  SUBCASE("constant curve in the Heisenberg group is singular") {
    const SingularityCertificate c = lie_singular_check(h, [](double) { return Vec(Vec::Zero(3)); }, 1.0, 100);
    CHECK(c.is_singular);
    CHECK(c.min_singular_value == 0.0);
  }
  SUBCASE("z = A_1 is not singular") {
    const int n = 1000;
    const SingularityCertificate c = lie_singular_check(h, [](double) { return vec({1.0, 0.0, 0.0}); }, 1.0, n);
    CHECK_FALSE(c.is_singular);
    // α_3 = 1 and α̇_2 = −α_3, so the restriction is (0, −t); trapezoid weights.
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double t = static_cast<double>(i) / n;
      sum += (i == 0 || i == n ? 0.5 : 1.0) * t * t / n;
    }
    CHECK(c.min_singular_value == doctest::Approx(std::sqrt(sum)).epsilon(1e-12));
  }
  SUBCASE("velocity leaving e is rejected") {
    CHECK_THROWS_AS(lie_singular_check(h, [](double) { return vec({0.0, 0.0, 1.0}); }, 1.0, 10), NotHorizontal);
  }
}

TEST_CASE("subgroup-invariant system") {
  const LieGroupModel m = so3_model(Mat::Identity(2, 2), Vec(), LieConvention::Left);
  CHECK_NOTHROW(validate_splitting(m));
  CHECK_THROWS_AS(validate_splitting(so3_model(Mat::Identity(1, 1))), SplittingInvalid);

  SUBCASE("no vertical momentum and no drift") {
    const SubgroupDerivative d = subgroup_invariant_rhs(m, 0.0, {Mat::Identity(3, 3), vec({0.3, -0.5, 0.0})});
    CHECK(d.w_dot.head(2).norm() == 0.0);
  }
  SUBCASE("pure vertical drift") {
    const LieGroupModel md = so3_model(Mat::Identity(2, 2), vec({0.0, 0.0, 0.8}), LieConvention::Left);
    const SubgroupDerivative d = subgroup_invariant_rhs(md, 0.0, {Mat::Identity(3, 3), Vec::Zero(3)});
    CHECK(d.w_dot.norm() == 0.0);
    CHECK((d.gamma_dot - 0.8 * hat3(vec({0.0, 0.0, 1.0}))).norm() < 1e-15);
  }
  SUBCASE("generic state agrees with the left-invariant flow") {
    const LieGroupModel md = so3_model(diag({0.6, 1.7}), vec({0.2, -0.4, 0.9}), LieConvention::Left);
    const Vec w = vec({0.5, 0.3, -0.7});
    const Mat g0 = so3_exp(vec({0.2, 0.1, -0.3}));
    const SubgroupDerivative d = subgroup_invariant_rhs(md, 0.0, {g0, w});
    const double h = 1e-4;
    const LieTrajectory tr = integrate_group(md, w, 2 * h, 200, &g0);
    CHECK((forward_difference(tr.states[0].alpha, tr.states[100].alpha, tr.states[200].alpha, h) - d.w_dot).norm() <
          1e-6);
    CHECK((forward_difference(tr.states[0].gamma, tr.states[100].gamma, tr.states[200].gamma, h) - d.gamma_dot)
              .norm() < 1e-6);
  }
}

TEST_CASE("SO(3) chart in the general engine agrees with the group solver") {
  const Vec a = vec({1.0, 0.0, 0.0});
  const LieGroupModel lie = so3_model(kSigma, a);
  MPPProblem p;
  p.model = so3_chart_model();
  p.sigma = CovarianceSchedule::constant(kSigma);
  p.drift = DriftModel::from_value([a](double, const Vec& x) { return Vec(so3_left_jacobian(x).inverse() * a); });
  p.steps = 1000;
  const Vec alpha0 = vec({0.4, -0.3, 0.5});
  const Trajectory tr = integrate_forward(p, alpha0, Vec::Zero(3));
  const LieTrajectory lt = integrate_group(lie, alpha0, 1.0, 1000);
  double worst = 0.0;
  for (std::size_t i = 0; i < tr.states.size(); i += 10)
    worst = std::max(worst, (so3_exp(tr.states[i].x) - lt.states[i].gamma).norm());
  CHECK(worst < 1e-5);
}

TEST_CASE("locally homogeneous reduction reproduces the Lie momentum equation") {
  const Vec a = vec({0.3, -0.2, 0.5});
  for (const Mat& sigma : {Mat(Mat::Identity(3, 3)), kSigma}) {
    const LieGroupModel lie = so3_model(sigma, a);
    HomogeneousData data;
    data.sr_rank = 3;
    data.torsion = lie.structure;
    data.curvature = Tensor4(3);
    data.sigma = CovarianceSchedule::constant(sigma);
    data.drift = [a](double) { return a; };
    const Vec alpha = vec({0.9, -0.4, 0.25});
    const HomogeneousDerivative hd = homogeneous_reduction_rhs(data, 0.0, alpha, Vec::Zero(3));
    const LieDerivative ld = lie_mpp_rhs(lie, 0.0, {Mat::Identity(3, 3), alpha});
    CHECK((hd.alpha_dot - ld.alpha_dot).norm() < 1e-15);
    CHECK((hd.z - ld.z).norm() < 1e-15);
  }
}

TEST_CASE("drifted SO(3) boundary value problem recovers the generating momentum") {
  const LieGroupModel m = so3_model(kSigma, kDrift, LieConvention::Left);
  const Vec alpha_gen = vec({0.6, -0.4, 0.8});
  const Mat target = integrate_group(m, alpha_gen, 1.0, 1000).final_state().gamma;
  const LieBoundaryResult r = lie_shoot(m, target, 1.0, 1000);
  CHECK(r.shooting.converged);
  CHECK(r.shooting.residual_norm < 1e-6);
  CHECK((r.alpha0 - alpha_gen).norm() < 1e-4);
}

TEST_CASE("Heisenberg boundary value problem") {
  const LieGroupModel m = heisenberg_group_model(diag({1.0, 2.0}));
  const Vec alpha_gen = vec({0.5, -0.3, 0.7});
  const Mat target = integrate_group(m, alpha_gen, 1.0, 500).final_state().gamma;
  ShootingConfig cfg;
  cfg.tol = 1e-10;
  const LieBoundaryResult r = lie_shoot(m, target, 1.0, 500, cfg);
  CHECK(r.shooting.residual_norm < 1e-10);
  CHECK((r.trajectory.final_state().gamma - target).norm() < 1e-9);
}
