#include "mppgeo/mpp_engine.hpp"

#include "mppgeo/rk4.hpp"

#include <cmath>
#include <string>

namespace mppgeo {

namespace {

constexpr double kFrameCollapse = 1e-10;


Vec flatten(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }
Mat unflatten(const Vec& v, int rows, int cols) { return Eigen::Map<const Mat>(v.data(), rows, cols); }

std::string at_time(double t) { return " at t=" + std::to_string(t); }

// ∇u as a matrix (k, i) = ∂_i u^k + Γ^k_{ij} u^j.
Mat covariant_drift_jacobian(const DriftModel& drift, const Tensor3& gamma, double t, const Vec& x, const Vec& u) {
  Mat m = drift.jacobian(t, x);
  const int d = static_cast<int>(x.size());
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      for (int j = 0; j < d; ++j) s += gamma(k, i, j) * u[j];
      m(k, i) += s;
    }
  return m;
}

Vec chi_derivative(const Vec& s, const Vec& lam_e) {
  const int j = static_cast<int>(s.size());
  Vec out(packed_size(j));
  int p = 0;
  for (int a = 0; a < j; ++a)
    for (int b = a + 1; b < j; ++b, ++p) out[p] = 0.5 * (s[a] * lam_e[b] - s[b] * lam_e[a]);
  return out;
}

struct RhsParts {
  Vec xdot;
  Mat fdot;
  Vec lamdot;
  Vec chidot;
};

RhsParts evaluate_rhs(const MPPProblem& problem, double t, const Vec& x, const Mat& f, const Vec& lam,
                      const Vec& chi) {
  const ManifoldModel& model = problem.model;
  const int d = model.dim;
  const int jr = model.sr_rank;
  if (frame_quality(f) < kFrameCollapse) throw FrameDegenerate("parallel frame became singular" + at_time(t));
  const Mat finv = f.inverse();
  const Mat sig = problem.sigma.at(t);
  const Vec lam_e = lam.head(jr);
  const Vec s = sig * lam_e;

  RhsParts out;
  out.xdot = f.leftCols(jr) * s;
  Vec u;
  if (!problem.drift.is_zero) {
    u = problem.drift.value(t, x);
    out.xdot += u;
  }
  const Tensor3 gamma = model.christoffel(x);
  out.fdot = -gamma.contract_first(out.xdot) * f;

  const Vec mu = finv.transpose() * lam;
  Vec pull = Vec::Zero(d);  // chart covector whose frame components are λ̇ (up to K)
  if (!problem.drift.is_zero) pull -= covariant_drift_jacobian(problem.drift, gamma, t, x, u).transpose() * mu;
  pull -= model.torsion(x).contract_first(out.xdot).transpose() * mu;
  out.lamdot = f.transpose() * pull;

  if (jr >= 2 && chi.squaredNorm() > 0.0) {
    // K(χ, ẋ)(f_r) = Σ χ^{αβ} g(R(ẋ, f_r) f_α, f_β), with g(·, f_β) = f^β.
    const Mat p = f.leftCols(jr) * unpack_antisymmetric(chi, jr) * finv.topRows(jr);
    const Tensor4 r = model.curvature(x);
    Vec q = Vec::Zero(d);
    for (int j = 0; j < d; ++j) {
      double acc = 0.0;
      for (int i = 0; i < d; ++i) {
        if (out.xdot[i] == 0.0) continue;
        for (int k = 0; k < d; ++k)
          for (int l = 0; l < d; ++l) acc += r(l, i, j, k) * out.xdot[i] * p(k, l);
      }
      q[j] = acc;
    }
    out.lamdot += f.transpose() * q;
  }
  out.chidot = chi_derivative(s, lam_e);
  return out;
}

double frame_gram_defect(const ManifoldModel& model, const Vec& x, const Mat& f) {
  if (!model.metric || model.sr_rank == 0) return 0.0;
  const Mat fe = f.leftCols(model.sr_rank);
  return (fe.transpose() * model.metric(x) * fe - Mat::Identity(model.sr_rank, model.sr_rank)).norm();
}

// Shared RK4 loop; `record(i, t, y)` is called on every grid point.
template <typename Record>
Vec run(const MPPProblem& problem, const Vec& lam0, const Vec& chi0, const Record& record) {
  problem.validate();
  const ManifoldModel& model = problem.model;
  const int d = model.dim;
  const int jr = model.sr_rank;
  if (lam0.size() != d) throw InvalidModel("lam0 must have dim entries");
  if (chi0.size() != packed_size(jr)) throw InvalidModel("chi0 must have J(J-1)/2 packed entries");

  Vec y = initial_state(problem, lam0, chi0).pack();
  const int n = problem.steps;
  const double h = problem.horizon / n;
  const bool reorth = problem.transport.reorthonormalize_every > 0 && static_cast<bool>(model.metric) && jr > 0;
  auto rhs = [&](double t, const Vec& s) { return mpp_rhs_packed(problem, t, s); };

  record(0, 0.0, y);
  for (int i = 0; i < n; ++i) {
    const double t = problem.horizon * static_cast<double>(i) / n;
    const double t1 = problem.horizon * static_cast<double>(i + 1) / n;
    y = rk4_step(rhs, t, y, h);
    if (!y.allFinite()) throw NonFiniteState("MPP state is not finite" + at_time(t1));
    if (!model.in_domain(y.head(d))) throw PathLeavesChart("MPP left the chart domain" + at_time(t1));
    if (reorth && (i + 1) % problem.transport.reorthonormalize_every == 0) {
      Mat f = unflatten(y.segment(d, d * d), d, d);
      restore_gram(f, jr, model.metric(y.head(d)), Mat::Identity(jr, jr));
      y.segment(d, d * d) = flatten(f);
    }
    record(i + 1, t1, y);
  }
  return y;
}

}  // namespace

Vec MPPState::pack() const {
  const int d = static_cast<int>(x.size());
  Vec y(d + d * d + d + chi.size());
  y.head(d) = x;
  y.segment(d, d * d) = flatten(frame);
  y.segment(d + d * d, d) = lam;
  y.tail(chi.size()) = chi;
  return y;
}

MPPState MPPState::unpack(const Vec& y, int dim, int rank) {
  MPPState s;
  s.x = y.head(dim);
  s.frame = unflatten(y.segment(dim, dim * dim), dim, dim);
  s.lam = y.segment(dim + dim * dim, dim);
  s.chi = y.tail(packed_size(rank));
  return s;
}

void MPPProblem::validate() const {
  model.validate();
  if (!(horizon > 0.0)) throw InvalidModel("horizon must be positive");
  if (steps < 1) throw InvalidModel("steps must be at least 1");
  if (sigma.rank() != model.sr_rank) throw InvalidModel("covariance rank differs from sub-Riemannian rank");
  if (!drift.value || (!drift.is_zero && !drift.jacobian)) throw InvalidModel("drift model incomplete");
}

MPPState mpp_rhs(const MPPProblem& problem, double t, const MPPState& state) {
  const RhsParts p = evaluate_rhs(problem, t, state.x, state.frame, state.lam, state.chi);
  MPPState out;
  out.x = p.xdot;
  out.frame = p.fdot;
  out.lam = p.lamdot;
  out.chi = p.chidot;
  return out;
}

Vec mpp_rhs_packed(const MPPProblem& problem, double t, const Vec& y) {
  const int d = problem.model.dim;
  const Mat f = unflatten(y.segment(d, d * d), d, d);
  const RhsParts p =
      evaluate_rhs(problem, t, y.head(d), f, y.segment(d + d * d, d), y.tail(packed_size(problem.model.sr_rank)));
  Vec out(y.size());
  out.head(d) = p.xdot;
  out.segment(d, d * d) = flatten(p.fdot);
  out.segment(d + d * d, d) = p.lamdot;
  out.tail(p.chidot.size()) = p.chidot;
  return out;
}

MPPState initial_state(const MPPProblem& problem, const Vec& lam0, const Vec& chi0) {
  MPPState s;
  s.x = problem.model.origin;
  s.frame = problem.model.orthonormal_frame0();
  s.lam = lam0;
  s.chi = chi0;
  return s;
}

double hamiltonian(const MPPProblem& problem, double t, const MPPState& state) {
  const int jr = problem.model.sr_rank;
  const Vec lam_e = state.lam.head(jr);
  double h = 0.5 * lam_e.dot(problem.sigma.at(t) * lam_e);
  if (!problem.drift.is_zero) {
    const Vec mu = state.frame.transpose().partialPivLu().solve(state.lam);
    h += mu.dot(problem.drift.value(t, state.x));
  }
  return h;
}

Trajectory integrate_forward(const MPPProblem& problem, const Vec& lam0, const Vec& chi0) {
  Trajectory tr;
  const int n = problem.steps;
  const int d = problem.model.dim;
  const int jr = problem.model.sr_rank;
  tr.times.reserve(n + 1);
  tr.states.reserve(n + 1);
  tr.velocities.reserve(n + 1);
  tr.energy.reserve(n + 1);
  tr.hamiltonian.reserve(n + 1);
  double prev_density = 0.0;
  run(problem, lam0, chi0, [&](int i, double t, const Vec& y) {
    MPPState s = MPPState::unpack(y, d, jr);
    const RhsParts p = evaluate_rhs(problem, t, s.x, s.frame, s.lam, s.chi);
    const Vec lam_e = s.lam.head(jr);
    const double density = lam_e.dot(problem.sigma.at(t) * lam_e);
    if (i == 0) {
      tr.energy.push_back(0.0);
    } else {
      const double h = t - tr.times.back();
      tr.energy.push_back(tr.energy.back() + 0.25 * h * (prev_density + density));
    }
    prev_density = density;
    tr.hamiltonian.push_back(hamiltonian(problem, t, s));
    tr.max_constraint_violation =
        std::max(tr.max_constraint_violation, frame_gram_defect(problem.model, s.x, s.frame));
    tr.times.push_back(t);
    tr.velocities.push_back(p.xdot);
    tr.states.push_back(std::move(s));
  });
  return tr;
}

MPPState integrate_endpoint(const MPPProblem& problem, const Vec& lam0, const Vec& chi0) {
  const Vec y = run(problem, lam0, chi0, [](int, double, const Vec&) {});
  return MPPState::unpack(y, problem.model.dim, problem.model.sr_rank);
}

CurvePath Trajectory::path() const {
  CurvePath p;
  p.times = times;
  p.points.reserve(states.size());
  for (const MPPState& s : states) p.points.push_back(s.x);
  p.velocities = velocities;
  return p;
}

double om_energy(const ManifoldModel& model, const CovarianceSchedule& sigma, const DriftModel& drift,
                 const CurvePath& path, const TransportOptions& opts) {
  path.validate(model);
  const int d = model.dim;
  const int jr = model.sr_rank;
  if (sigma.rank() != jr) throw InvalidModel("covariance rank differs from sub-Riemannian rank");
  if ((path.points.front() - model.origin).norm() > 1e-12 * std::max(1.0, model.origin.norm()))
    throw InvalidModel("path must start at the model origin");
  const FrameTransport ft = transport_frame(model, path, model.orthonormal_frame0(), opts);
  double energy = 0.0;
  double prev = 0.0;
  for (int i = 0; i < path.size(); ++i) {
    const double t = path.times[i];
    Vec v = path.velocity(i);
    if (!drift.is_zero) v -= drift.value(t, path.points[i]);
    const Vec w = ft.coframes[i] * v;
    const double vertical = w.tail(d - jr).norm();
    if (vertical > kHorizontalTol * std::max(w.norm(), 1e-12))
      throw NotHorizontal("velocity minus drift leaves E" + at_time(t));
    const Vec we = w.head(jr);
    const double density = we.dot(sigma.inverse_at(t) * we);
    if (i > 0) energy += 0.5 * (path.times[i] - path.times[i - 1]) * (prev + density);
    prev = density;
  }
  return 0.5 * energy;
}

SingularityCertificate singularity_certificate(const ManifoldModel& model, const DriftModel& drift,
                                               const CurvePath& path, const TransportOptions& opts) {
  SingularityCertificate cert;
  const int d = model.dim;
  const int jr = model.sr_rank;
  if (jr == d) return cert;
  path.validate(model);
  const int m = d - jr;
  const PathInterpolant interp(path);
  const Mat f0 = model.orthonormal_frame0();
  // Columns of mu0 are chart covectors with frame components e_q, q ≥ J.
  const Mat mu0 = f0.inverse().bottomRows(m).transpose();

  Vec y(d * d + d * m);
  y.head(d * d) = flatten(f0);
  y.tail(d * m) = flatten(mu0);
  const int n = interp.intervals();
  Mat stacked((n + 1) * jr, m);
  double full_sq = 0.0;

  auto horizontal_check = [&](int i, const Mat& f) {
    Vec v = path.velocity(i);
    if (!drift.is_zero) v -= drift.value(path.times[i], path.points[i]);
    const Vec w = f.partialPivLu().solve(v);
    if (w.tail(m).norm() > kHorizontalTol * std::max(w.norm(), 1e-12))
      throw NotHorizontal("velocity minus drift leaves E" + at_time(path.times[i]));
  };
  auto accumulate = [&](int i, const Vec& s) {
    const double h_left = i > 0 ? path.times[i] - path.times[i - 1] : 0.0;
    const double h_right = i < n ? path.times[i + 1] - path.times[i] : 0.0;
    const double wgt = std::sqrt(0.5 * (h_left + h_right));
    const Mat f = unflatten(s.head(d * d), d, d);
    const Mat lam = f.transpose() * unflatten(s.tail(d * m), d, m);
    stacked.middleRows(i * jr, jr) = wgt * lam.topRows(jr);
    full_sq += wgt * wgt * lam.squaredNorm();
    horizontal_check(i, f);
  };

  accumulate(0, y);
  const bool reorth = opts.reorthonormalize_every > 0 && static_cast<bool>(model.metric);
  Vec x(d), v(d);
  for (int i = 0; i < n; ++i) {
    const double h = interp.step(i);
    const double t0 = interp.time(i);
    auto rhs = [&](double t, const Vec& s) -> Vec {
      interp.eval(i, (t - t0) / h, x, v);
      const Mat f = unflatten(s.head(d * d), d, d);
      const Mat mu = unflatten(s.tail(d * m), d, m);
      const Tensor3 gamma = model.christoffel(x);
      Mat gen = gamma.contract_first(v) - model.torsion(x).contract_first(v);
      if (!drift.is_zero) gen -= covariant_drift_jacobian(drift, gamma, t, x, drift.value(t, x));
      Vec out(s.size());
      out.head(d * d) = flatten(-gamma.contract_first(v) * f);
      out.tail(d * m) = flatten(gen.transpose() * mu);
      return out;
    };
    y = rk4_step(rhs, t0, y, h);
    if (!y.allFinite()) throw NonFiniteState("annihilator propagation is not finite" + at_time(t0 + h));
    if (reorth && jr > 0 && (i + 1) % opts.reorthonormalize_every == 0) {
      Mat f = unflatten(y.head(d * d), d, d);
      restore_gram(f, jr, model.metric(interp.point(i + 1)), Mat::Identity(jr, jr));
      y.head(d * d) = flatten(f);
    }
    accumulate(i + 1, y);
  }

  Eigen::JacobiSVD<Mat> svd(stacked);
  cert.min_singular_value = svd.singularValues()(m - 1);
  cert.scale = std::sqrt(full_sq);
  cert.is_singular = cert.min_singular_value <= kSingularTol * cert.scale;
  return cert;
}

HomogeneousDerivative homogeneous_reduction_rhs(const HomogeneousData& data, double t, const Vec& alpha,
                                                const Vec& chi) {
  const int d = data.torsion.dim();
  const int jr = data.sr_rank;
  if (alpha.size() != d || chi.size() != packed_size(jr) || data.curvature.dim() != d)
    throw InvalidModel("homogeneous reduction: inconsistent dimensions");
  HomogeneousDerivative out;
  const Vec s = data.sigma.at(t) * alpha.head(jr);
  out.z = data.drift ? data.drift(t) : Vec::Zero(d);
  out.z.head(jr) += s;
  out.alpha_dot = -data.torsion.contract_first(out.z).transpose() * alpha;
  if (jr >= 2 && chi.squaredNorm() > 0.0) {
    const Mat c = unpack_antisymmetric(chi, jr);
    for (int r = 0; r < d; ++r) {
      double acc = 0.0;
      for (int a = 0; a < jr; ++a)
        for (int b = 0; b < jr; ++b) {
          if (c(a, b) == 0.0) continue;
          for (int i = 0; i < d; ++i) acc += c(a, b) * out.z[i] * data.curvature(b, i, r, a);
        }
      out.alpha_dot[r] += acc;
    }
  }
  out.chi_dot = chi_derivative(s, alpha.head(jr));
  return out;
}

ShootingProblem mpp_shooting_problem(const MPPProblem& problem, const Vec& target) {
  const int d = problem.model.dim;
  const int p = packed_size(problem.model.sr_rank);
  if (target.size() != d) throw InvalidModel("target has wrong dimension");
  if (!problem.model.in_domain(target)) throw PathLeavesChart("target outside chart domain");
  ShootingProblem sp;
  sp.unknown_dim = d + p;
  sp.residual = [problem, target, d, p](const Vec& u) {
    const MPPState end = integrate_endpoint(problem, u.head(d), u.tail(p));
    Vec r(d + p);
    r.head(d) = end.x - target;
    r.tail(p) = end.chi;
    return r;
  };
  return sp;
}

Vec mpp_default_guess(const MPPProblem& problem, const Vec& target) {
  const ManifoldModel& model = problem.model;
  const int d = model.dim;
  const int jr = model.sr_rank;
  Vec disp = target - model.origin;
  if (!problem.drift.is_zero) disp -= problem.horizon * problem.drift.value(0.0, model.origin);
  const Mat fe = model.orthonormal_frame0().leftCols(jr);
  const Vec coeff = fe.completeOrthogonalDecomposition().solve(disp) / problem.horizon;
  Vec guess = Vec::Zero(d + packed_size(jr));
  guess.head(jr) = problem.sigma.at(0.0).ldlt().solve(coeff);
  return guess;
}

MPPBoundaryResult solve_mpp_bvp(const MPPProblem& problem, const Vec& target, const ShootingConfig& config,
                                const Vec* guess) {
  problem.validate();
  const int d = problem.model.dim;
  const int p = packed_size(problem.model.sr_rank);
  const ShootingProblem sp = mpp_shooting_problem(problem, target);
  const Vec start = guess ? *guess : mpp_default_guess(problem, target);
  MPPBoundaryResult out;
  out.shooting = solve(sp, start, config);
  out.lam0 = out.shooting.solution.head(d);
  out.chi0 = out.shooting.solution.tail(p);
  out.trajectory = integrate_forward(problem, out.lam0, out.chi0);
  return out;
}

}  // namespace mppgeo
