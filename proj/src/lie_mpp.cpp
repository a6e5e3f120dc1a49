#include "mppgeo/lie_mpp.hpp"

#include "mppgeo/rk4.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <string>

namespace mppgeo {

namespace {

double ad_sign(const LieGroupModel& model) { return model.convention == LieConvention::Right ? -1.0 : 1.0; }

std::string at_time(double t) { return " at t=" + std::to_string(t); }

Vec velocity_field(const LieGroupModel& model, double t, const Vec& alpha) {
  Vec z = model.drift_at(t);
  const int jr = model.sr_rank;
  z.head(jr) += model.sigma.at(t) * alpha.head(jr);
  return z;
}

Mat left_or_right(const LieGroupModel& model, const Mat& factor, const Mat& gamma) {
  return model.convention == LieConvention::Right ? Mat(factor * gamma) : Mat(gamma * factor);
}

double orthogonality_defect(const Mat& g) {
  return (g.transpose() * g - Mat::Identity(g.rows(), g.cols())).norm();
}

// Shared loop; record(i, t, gamma, alpha) on every grid point.
template <typename Record>
void run_group(const LieGroupModel& model, const Vec& alpha0, double horizon, int steps, const Mat* gamma0,
               const Record& record) {
  if (!(horizon > 0.0)) throw InvalidModel("horizon must be positive");
  if (steps < 1) throw InvalidModel("steps must be at least 1");
  if (alpha0.size() != model.dim) throw InvalidModel("alpha0 must have dim entries");
  if (!alpha0.allFinite()) throw NonFiniteState("alpha0 is not finite");
  Mat gamma = gamma0 ? *gamma0 : model.identity();
  Vec alpha = alpha0;
  const double h = horizon / steps;
  const LieField field = [&model](double t, const Mat&, const Vec& a) {
    const Vec z = velocity_field(model, t, a);
    return std::make_pair(z, Vec(ad_sign(model) * model.ad(z).transpose() * a));
  };
  record(0, 0.0, gamma, alpha);
  for (int i = 0; i < steps; ++i) {
    const double t = horizon * static_cast<double>(i) / steps;
    const double t1 = horizon * static_cast<double>(i + 1) / steps;
    rkmk4_step(model, field, t, h, gamma, alpha);
    if (!gamma.allFinite() || !alpha.allFinite()) throw NonFiniteState("group state is not finite" + at_time(t1));
    record(i + 1, t1, gamma, alpha);
    if (model.orthogonal && (i + 1) % kReprojectEvery == 0) gamma = polar_projection(gamma);
  }
}

}  // namespace

Mat LieGroupModel::algebra_matrix(const Vec& z) const {
  Mat m = Mat::Zero(rep.front().rows(), rep.front().cols());
  for (int i = 0; i < dim; ++i)
    if (z[i] != 0.0) m += z[i] * rep[i];
  return m;
}

Vec LieGroupModel::bracket(const Vec& x, const Vec& y) const { return structure.contract(x, y); }

Mat LieGroupModel::ad(const Vec& z) const { return structure.contract_first(z); }

Vec LieGroupModel::drift_at(double t) const { return drift ? drift(t) : Vec::Zero(dim); }

Mat LieGroupModel::exp_map(const Vec& xi) const {
  if (exp) return exp(xi);
  return algebra_matrix(xi).exp();
}

Vec LieGroupModel::group_log(const Mat& g) const {
  if (log) return log(g);
  const Eigen::Index n = g.size();
  Mat basis(n, dim);
  for (int i = 0; i < dim; ++i) basis.col(i) = Eigen::Map<const Vec>(rep[i].data(), n);
  const Mat diff = g - identity();
  return basis.colPivHouseholderQr().solve(Eigen::Map<const Vec>(diff.data(), n));
}

Mat LieGroupModel::identity() const { return Mat::Identity(rep.front().rows(), rep.front().cols()); }

void LieGroupModel::validate() const {
  if (dim < 1 || sr_rank < 0 || sr_rank > dim) throw InvalidModel("Lie model: need 0 <= J <= d, d >= 1");
  if (structure.dim() != dim) throw InvalidModel("Lie model: structure constants have wrong size");
  if (static_cast<int>(rep.size()) != dim) throw InvalidModel("Lie model: need one representation matrix per basis element");
  if (inner.rows() != dim || inner.cols() != dim) throw InvalidModel("Lie model: inner product has wrong size");
  constexpr double tol = 1e-12;
  for (int k = 0; k < dim; ++k)
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        if (std::abs(structure(k, i, j) + structure(k, j, i)) > tol)
          throw InvalidModel("Lie model: structure constants are not antisymmetric");
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      const Vec ei = Vec::Unit(dim, i), ej = Vec::Unit(dim, j);
      for (int k = 0; k < dim; ++k) {
        const Vec ek = Vec::Unit(dim, k);
        const Vec jac = bracket(bracket(ei, ej), ek) + bracket(bracket(ej, ek), ei) + bracket(bracket(ek, ei), ej);
        if (jac.norm() > tol) throw InvalidModel("Lie model: Jacobi identity fails");
      }
      const Mat comm = rep[i] * rep[j] - rep[j] * rep[i];
      if ((comm - algebra_matrix(bracket(ei, ej))).norm() > tol)
        throw InvalidModel("Lie model: representation does not match the structure constants");
    }
  if ((inner - inner.transpose()).norm() > tol || inner.llt().info() != Eigen::Success)
    throw InvalidModel("Lie model: inner product must be symmetric positive definite");
  if ((inner.topLeftCorner(sr_rank, sr_rank) - Mat::Identity(sr_rank, sr_rank)).norm() > tol)
    throw InvalidModel("Lie model: A_1..A_J must be orthonormal");
  if (sigma.rank() != sr_rank) throw InvalidModel("Lie model: covariance rank differs from J");
  sigma.validate();
}

LieDerivative lie_mpp_rhs(const LieGroupModel& model, double t, const LieMPPState& state) {
  if (state.alpha.size() != model.dim) throw InvalidModel("alpha must have dim entries");
  LieDerivative out;
  out.z = velocity_field(model, t, state.alpha);
  out.alpha_dot = ad_sign(model) * model.ad(out.z).transpose() * state.alpha;
  out.gamma_dot = left_or_right(model, model.algebra_matrix(out.z), state.gamma);
  return out;
}

void rkmk4_step(const LieGroupModel& model, const LieField& field, double t, double h, Mat& gamma, Vec& alpha) {
  // Right: γ = exp(θ)γ_0 gives θ̇ = z − ½[θ, z] + …; left flips the middle sign.
  const double half = model.convention == LieConvention::Right ? -0.5 : 0.5;
  auto dexpinv = [&](const Vec& theta, const Vec& z) {
    const Vec b = model.bracket(theta, z);
    return Vec(z + half * b + model.bracket(theta, b) / 12.0);
  };
  auto moved = [&](const Vec& theta) { return left_or_right(model, model.exp_map(theta), gamma); };

  const auto [z1, l1] = field(t, gamma, alpha);
  const Vec k1 = z1;
  const Vec th2 = 0.5 * h * k1;
  const auto [z2, l2] = field(t + 0.5 * h, moved(th2), alpha + 0.5 * h * l1);
  const Vec k2 = dexpinv(th2, z2);
  const Vec th3 = 0.5 * h * k2;
  const auto [z3, l3] = field(t + 0.5 * h, moved(th3), alpha + 0.5 * h * l2);
  const Vec k3 = dexpinv(th3, z3);
  const Vec th4 = h * k3;
  const auto [z4, l4] = field(t + h, moved(th4), alpha + h * l3);
  const Vec k4 = dexpinv(th4, z4);

  gamma = moved((h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  alpha += (h / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
}

Mat polar_projection(const Mat& g) {
  Eigen::JacobiSVD<Mat> svd(g, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

LieTrajectory integrate_group(const LieGroupModel& model, const Vec& alpha0, double horizon, int steps,
                              const Mat* gamma0) {
  model.validate();
  LieTrajectory tr;
  tr.times.reserve(steps + 1);
  tr.states.reserve(steps + 1);
  const int jr = model.sr_rank;
  run_group(model, alpha0, horizon, steps, gamma0, [&](int i, double t, const Mat& g, const Vec& a) {
    const Mat sig = model.sigma.at(t);
    const double q = a.head(jr).dot(sig * a.head(jr));
    if (i == 0)
      tr.energy.push_back(0.0);
    else
      tr.energy.push_back(tr.energy.back() + 0.25 * (t - tr.times.back()) * (tr.quadratic.back() + q));
    tr.quadratic.push_back(q);
    if (model.orthogonal) tr.max_orthogonality_defect = std::max(tr.max_orthogonality_defect, orthogonality_defect(g));
    tr.times.push_back(t);
    tr.z.push_back(velocity_field(model, t, a));
    tr.states.push_back({g, a});
  });
  return tr;
}

namespace {

SingularityCertificate annihilator_certificate(const LieGroupModel& model, const std::vector<double>& times,
                                               const std::function<Vec(double)>& z) {
  SingularityCertificate cert;
  const int d = model.dim;
  const int jr = model.sr_rank;
  if (jr == d) return cert;
  const int m = d - jr;
  const int n = static_cast<int>(times.size()) - 1;
  const double sgn = ad_sign(model);

  auto check = [&](double t) {
    const Vec v = z(t) - model.drift_at(t);
    if (v.tail(m).norm() > kHorizontalTol * std::max(v.norm(), 1e-12))
      throw NotHorizontal("z - a leaves the subspace e" + at_time(t));
  };
  Mat stacked((n + 1) * jr, m);
  double full_sq = 0.0;
  Mat y = Mat::Zero(d, m);
  y.bottomRows(m) = Mat::Identity(m, m);
  auto accumulate = [&](int i) {
    const double hl = i > 0 ? times[i] - times[i - 1] : 0.0;
    const double hr = i < n ? times[i + 1] - times[i] : 0.0;
    const double w = std::sqrt(0.5 * (hl + hr));
    stacked.middleRows(i * jr, jr) = w * y.topRows(jr);
    full_sq += w * w * y.squaredNorm();
    check(times[i]);
  };
  accumulate(0);
  auto rhs = [&](double t, const Vec& s) -> Vec {
    const Mat a = Eigen::Map<const Mat>(s.data(), d, m);
    const Mat out = sgn * model.ad(z(t)).transpose() * a;
    return Eigen::Map<const Vec>(out.data(), out.size());
  };
  for (int i = 0; i < n; ++i) {
    const Vec s = rk4_step(rhs, times[i], Eigen::Map<const Vec>(y.data(), y.size()), times[i + 1] - times[i]);
    if (!s.allFinite()) throw NonFiniteState("annihilator propagation is not finite" + at_time(times[i + 1]));
    y = Eigen::Map<const Mat>(s.data(), d, m);
    accumulate(i + 1);
  }
  Eigen::JacobiSVD<Mat> svd(stacked);
  cert.min_singular_value = svd.singularValues()(m - 1);
  cert.scale = std::sqrt(full_sq);
  cert.is_singular = cert.min_singular_value <= kSingularTol * cert.scale;
  return cert;
}

}  // namespace

SingularityCertificate lie_singular_check(const LieGroupModel& model, const std::function<Vec(double)>& z,
                                          double horizon, int steps) {
  model.validate();
  if (!(horizon > 0.0) || steps < 1) throw InvalidModel("need a positive horizon and at least one step");
  return annihilator_certificate(model, uniform_grid(horizon, steps), z);
}

SingularityCertificate lie_singular_check(const LieGroupModel& model, const LieTrajectory& trajectory) {
  model.validate();
  const std::vector<double>& ts = trajectory.times;
  if (ts.size() < 2 || trajectory.z.size() != ts.size()) throw InvalidModel("trajectory has no z samples");
  auto z = [&](double t) -> Vec {
    const auto it = std::upper_bound(ts.begin(), ts.end(), t);
    const std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - ts.begin(), 1) - 1, ts.size() - 2);
    const double th = (t - ts[i]) / (ts[i + 1] - ts[i]);
    return (1.0 - th) * trajectory.z[i] + th * trajectory.z[i + 1];
  };
  return annihilator_certificate(model, ts, z);
}

void validate_splitting(const LieGroupModel& model, double tol) {
  const int d = model.dim;
  const int jr = model.sr_rank;
  auto in_e = [jr](int i) { return i < jr; };
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const Vec b = model.bracket(Vec::Unit(d, i), Vec::Unit(d, j));
      if (!in_e(i) && !in_e(j) && b.head(jr).norm() > tol) throw SplittingInvalid("k is not a subalgebra");
      if (in_e(i) && in_e(j) && b.head(jr).norm() > tol) throw SplittingInvalid("[e, e] is not contained in k");
      if (in_e(i) != in_e(j) && b.tail(d - jr).norm() > tol) throw SplittingInvalid("[k, e] is not contained in e");
      if (in_e(i) != in_e(j) && std::abs(model.inner(i, j)) > tol) throw SplittingInvalid("e is not orthogonal to k");
    }
  for (int k = jr; k < d; ++k) {
    const Mat a = model.ad(Vec::Unit(d, k));
    if ((a.transpose() * model.inner + model.inner * a).norm() > tol)
      throw SplittingInvalid("inner product is not invariant under ad(k)");
  }
}

SubgroupDerivative subgroup_invariant_rhs(const LieGroupModel& model, double t, const SubgroupState& state) {
  const int d = model.dim;
  const int jr = model.sr_rank;
  if (state.w.size() != d) throw InvalidModel("w must have dim entries");
  const Mat ginv = model.inner.inverse();
  auto dagger = [&](const Vec& z, const Vec& w) { return Vec(ginv * model.ad(z).transpose() * model.inner * w); };
  const Vec a = model.drift_at(t);
  Vec a_e = a, a_k = a, w_e = state.w, w_k = state.w;
  a_e.tail(d - jr).setZero();
  a_k.head(jr).setZero();
  w_e.tail(d - jr).setZero();
  w_k.head(jr).setZero();
  Vec z_e = a_e;
  z_e.head(jr) += model.sigma.at(t) * w_e.head(jr);

  SubgroupDerivative out;
  const Vec de = dagger(z_e, w_k) + dagger(a_k, w_e);
  const Vec dk = dagger(z_e, w_e) + dagger(a_k, w_k);
  out.w_dot.resize(d);
  out.w_dot.head(jr) = de.head(jr);
  out.w_dot.tail(d - jr) = dk.tail(d - jr);
  out.gamma_dot = state.gamma * model.algebra_matrix(z_e + a_k);
  return out;
}

Vec lie_default_guess(const LieGroupModel& model, const Mat& target, double horizon) {
  const int jr = model.sr_rank;
  const Vec v = model.group_log(target) / horizon - model.drift_at(0.0);
  Vec guess = Vec::Zero(model.dim);
  guess.head(jr) = model.sigma.at(0.0).ldlt().solve(v.head(jr));
  return guess;
}

LieBoundaryResult lie_shoot(const LieGroupModel& model, const Mat& target, double horizon, int steps,
                            const ShootingConfig& config, const Vec* guess) {
  model.validate();
  const Mat id = model.identity();
  if (target.rows() != id.rows() || target.cols() != id.cols()) throw InvalidModel("target has wrong shape");
  const Mat target_inv = model.orthogonal ? Mat(target.transpose()) : Mat(target.inverse());
  ShootingProblem sp;
  sp.unknown_dim = model.dim;
  sp.residual = [&](const Vec& a0) {
    Mat end;
    run_group(model, a0, horizon, steps, nullptr, [&](int i, double, const Mat& g, const Vec&) {
      if (i == steps) end = g;
    });
    return model.group_log(target_inv * end);
  };
  LieBoundaryResult out;
  out.shooting = solve(sp, guess ? *guess : lie_default_guess(model, target, horizon), config);
  out.alpha0 = out.shooting.solution;
  out.trajectory = integrate_group(model, out.alpha0, horizon, steps);
  return out;
}

Mat hat3(const Vec& v) {
  Mat m(3, 3);
  m << 0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0;
  return m;
}

Vec vee3(const Mat& m) {
  Vec v(3);
  v << m(2, 1), m(0, 2), m(1, 0);
  return v;
}

Mat so3_exp(const Vec& v) {
  const double th2 = v.squaredNorm();
  const double th = std::sqrt(th2);
  const Mat k = hat3(v);
  double a, b;
  if (th < 1e-4) {
    a = 1.0 - th2 / 6.0 + th2 * th2 / 120.0;
    b = 0.5 - th2 / 24.0 + th2 * th2 / 720.0;
  } else {
    a = std::sin(th) / th;
    b = (1.0 - std::cos(th)) / th2;
  }
  return Mat::Identity(3, 3) + a * k + b * k * k;
}

Vec so3_log(const Mat& r) {
  const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double th = std::acos(c);
  const Vec s = 0.5 * vee3(r - r.transpose());  // sin θ · axis
  if (th < 1e-6) return s;
  if (M_PI - th > 1e-6) return (th / std::sin(th)) * s;
  // Near π: axis from the symmetric part, sign from the skew part.
  const Mat bmat = 0.5 * (r + Mat::Identity(3, 3));
  int i = 0;
  bmat.diagonal().maxCoeff(&i);
  Vec axis = bmat.col(i) / std::sqrt(std::max(bmat(i, i), 1e-300));
  axis.normalize();
  if (axis.dot(s) < 0.0) axis = -axis;
  return th * axis;
}

LieGroupModel so3_model(const Mat& sigma, const Vec& drift, LieConvention convention) {
  LieGroupModel m;
  m.name = "so3";
  m.dim = 3;
  m.sr_rank = static_cast<int>(sigma.rows());
  m.structure = Tensor3(3);
  for (int i = 0; i < 3; ++i) {
    const int j = (i + 1) % 3, k = (i + 2) % 3;
    m.structure(k, i, j) = 1.0;
    m.structure(k, j, i) = -1.0;
  }
  for (int i = 0; i < 3; ++i) m.rep.push_back(hat3(Vec::Unit(3, i)));
  m.inner = Mat::Identity(3, 3);
  if (drift.size() == 3) m.drift = [drift](double) { return drift; };
  m.sigma = CovarianceSchedule::constant(sigma);
  m.convention = convention;
  m.exp = [](const Vec& v) { return so3_exp(v); };
  m.log = [](const Mat& r) { return so3_log(r); };
  m.orthogonal = true;
  return m;
}

LieGroupModel heisenberg_group_model(const Mat& sigma, const Vec& drift, LieConvention convention) {
  LieGroupModel m;
  m.name = "heisenberg";
  m.dim = 3;
  m.sr_rank = 2;
  m.structure = Tensor3(3);
  m.structure(2, 0, 1) = 1.0;
  m.structure(2, 1, 0) = -1.0;
  const int rows[3] = {0, 1, 0}, cols[3] = {1, 2, 2};
  for (int i = 0; i < 3; ++i) {
    Mat a = Mat::Zero(3, 3);
    a(rows[i], cols[i]) = 1.0;
    m.rep.push_back(a);
  }
  m.inner = Mat::Identity(3, 3);
  if (drift.size() == 3) m.drift = [drift](double) { return drift; };
  m.sigma = CovarianceSchedule::constant(sigma);
  m.convention = convention;
  m.exp = [rep = m.rep](const Vec& v) {
    Mat x = Mat::Zero(3, 3);
    for (int i = 0; i < 3; ++i) x += v[i] * rep[i];
    return Mat(Mat::Identity(3, 3) + x + 0.5 * x * x);
  };
  m.log = [](const Mat& g) {
    const Mat n = g - Mat::Identity(3, 3);
    const Mat x = n - 0.5 * n * n;
    Vec v(3);
    v << x(0, 1), x(1, 2), x(0, 2);
    return v;
  };
  return m;
}

}  // namespace mppgeo
