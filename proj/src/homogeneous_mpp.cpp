#include "mppgeo/homogeneous_mpp.hpp"

#include "mppgeo/manifolds.hpp"

#include <cmath>
#include <string>

namespace mppgeo {

namespace {

constexpr double kLiftTol = 1e-10;
constexpr double kDriftStep = 1e-5;

Mat push_matrix(const HomogeneousModel& model, const Mat& gamma) {
  const int jr = model.group.sr_rank;
  const Vec first = model.push(gamma, Vec::Unit(model.group.dim, 0));
  Mat m(first.size(), jr);
  m.col(0) = first;
  for (int i = 1; i < jr; ++i) m.col(i) = model.push(gamma, Vec::Unit(model.group.dim, i));
  return m;
}

Vec lift_at(const HomogeneousModel& model, double t, const Mat& gamma) {
  const int d = model.group.dim;
  Vec out = Vec::Zero(d);
  if (!model.base_drift) return out;
  const Mat m = push_matrix(model, gamma);
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  if (!(s(s.size() - 1) > kLiftTol * s(0))) throw LiftDegenerate("projection differential is singular on the lift space");
  out.head(model.group.sr_rank) = svd.solve(model.base_drift(t, model.project(gamma)));
  return out;
}

struct HomField {
  Vec z;
  Vec alpha_dot;
};

HomField field_at(const HomogeneousModel& model, double t, const Mat& gamma, const Vec& alpha) {
  const LieGroupModel& g = model.group;
  const int d = g.dim;
  const int jr = g.sr_rank;
  HomField out;
  out.z = lift_at(model, t, gamma);
  out.z.head(jr) += g.sigma.at(t) * alpha.head(jr);
  out.alpha_dot = g.ad(out.z).transpose() * alpha;
  if (model.drift_derivative && model.base_drift) {
    for (int r = 0; r < d; ++r) {
      const Vec step = kDriftStep * Vec::Unit(d, r);
      const Vec dr = (lift_at(model, t, gamma * g.exp_map(step)) - lift_at(model, t, gamma * g.exp_map(-step))) /
                     (2.0 * kDriftStep);
      out.alpha_dot[r] -= alpha.dot(dr);
    }
  }
  return out;
}

}  // namespace

void HomogeneousModel::validate() const {
  group.validate();
  if (group.convention != LieConvention::Left) throw InvalidModel("homogeneous model needs the left convention");
  if (!project || !push || !chart) throw InvalidModel("homogeneous model needs project, push and chart");
  const int d = group.dim;
  const int jr = group.sr_rank;
  constexpr double tol = 1e-12;
  for (int i = 0; i < jr; ++i)
    for (int k = jr; k < d; ++k)
      if (std::abs(group.inner(i, k)) > tol) throw InvalidModel("p is not orthogonal to k");
  for (int k = jr; k < d; ++k) {
    const Mat a = group.ad(Vec::Unit(d, k));
    if ((a.transpose() * group.inner + group.inner * a).norm() > tol)
      throw InvalidModel("inner product is not invariant under ad(k)");
    if (a.topRows(jr).rightCols(d - jr).norm() > tol) throw InvalidModel("k is not a subalgebra");
  }
}

LiftedDrift lift_drift_field(const HomogeneousModel& model) {
  return [model](double t, const Mat& gamma) { return lift_at(model, t, gamma); };
}

double pi_relatedness_residual(const HomogeneousModel& model, double t, const Mat& gamma) {
  const Vec base = model.base_drift ? model.base_drift(t, model.project(gamma))
                                    : Vec(Vec::Zero(model.project(gamma).size()));
  return (model.push(gamma, lift_at(model, t, gamma)) - base).norm();
}

LieDerivative hom_mpp_rhs(const HomogeneousModel& model, double t, const LieMPPState& state) {
  if (state.alpha.size() != model.group.dim) throw InvalidModel("alpha must have dim entries");
  const HomField f = field_at(model, t, state.gamma, state.alpha);
  LieDerivative out;
  out.z = f.z;
  out.alpha_dot = f.alpha_dot;
  out.gamma_dot = state.gamma * model.group.algebra_matrix(f.z);
  return out;
}

HomogeneousTrajectory hom_integrate(const HomogeneousModel& model, const Vec& alpha0_p, double horizon, int steps,
                                    const Mat* gamma0) {
  model.validate();
  const LieGroupModel& g = model.group;
  const int jr = g.sr_rank;
  if (!(horizon > 0.0) || steps < 1) throw InvalidModel("need a positive horizon and at least one step");
  if (alpha0_p.size() != jr) throw InvalidModel("alpha0 must have one entry per p direction");
  if (!alpha0_p.allFinite()) throw NonFiniteState("alpha0 is not finite");

  Mat gamma = gamma0 ? *gamma0 : g.identity();
  Vec alpha = Vec::Zero(g.dim);
  alpha.head(jr) = alpha0_p;
  const LieField field = [&model](double t, const Mat& gm, const Vec& a) {
    HomField f = field_at(model, t, gm, a);
    return std::make_pair(std::move(f.z), std::move(f.alpha_dot));
  };

  HomogeneousTrajectory out;
  LieTrajectory& tr = out.lifted;
  auto record = [&](double t) {
    const double q = alpha.head(jr).dot(g.sigma.at(t) * alpha.head(jr));
    tr.energy.push_back(tr.times.empty() ? 0.0 : tr.energy.back() + 0.25 * (t - tr.times.back()) * (tr.quadratic.back() + q));
    tr.quadratic.push_back(q);
    if (g.orthogonal)
      tr.max_orthogonality_defect =
          std::max(tr.max_orthogonality_defect, (gamma.transpose() * gamma - Mat::Identity(gamma.rows(), gamma.cols())).norm());
    tr.times.push_back(t);
    tr.z.push_back(field_at(model, t, gamma, alpha).z);
    tr.states.push_back({gamma, alpha});
    const Vec p = model.project(gamma);
    if (model.chart_domain && !model.chart_domain(p))
      throw PathLeavesChart("projected path left the base chart at t=" + std::to_string(t));
    out.base_ambient.push_back(p);
    out.base_chart.push_back(model.chart(p));
  };

  const double h = horizon / steps;
  record(0.0);
  for (int i = 0; i < steps; ++i) {
    const double t = horizon * static_cast<double>(i) / steps;
    rkmk4_step(g, field, t, h, gamma, alpha);
    if (!gamma.allFinite() || !alpha.allFinite()) throw NonFiniteState("lifted state is not finite");
    if (g.orthogonal && (i + 1) % kReprojectEvery == 0) gamma = polar_projection(gamma);
    record(horizon * static_cast<double>(i + 1) / steps);
  }
  return out;
}

HomogeneousBoundaryResult sphere_shoot(const HomogeneousModel& model, const Vec& target_chart, double horizon,
                                       int steps, const ShootingConfig& config, const Vec* guess) {
  model.validate();
  const LieGroupModel& g = model.group;
  const int jr = g.sr_rank;
  const Mat id = g.identity();
  const Vec o = model.project(id);
  if (target_chart.size() != jr) throw InvalidModel("target must have one coordinate per p direction");
  if (model.chart_domain && !model.chart_domain(o)) throw PathLeavesChart("base point outside the chart");

  Vec start(jr);
  if (guess) {
    start = *guess;
  } else {
    // Chart displacement pulled back through the chart differential at o.
    const Mat m = push_matrix(model, id);
    Mat dchart(jr, m.rows());
    for (int i = 0; i < m.rows(); ++i) {
      const double hstep = 1e-6;
      Vec pp = o, pm = o;
      pp[i] += hstep;
      pm[i] -= hstep;
      dchart.col(i) = (model.chart(pp) - model.chart(pm)) / (2.0 * hstep);
    }
    const Mat jac = dchart * m;
    const Vec c = jac.partialPivLu().solve((target_chart - model.chart(o)) / horizon) - lift_at(model, 0.0, id).head(jr);
    start = g.sigma.at(0.0).ldlt().solve(c);
  }

  ShootingProblem sp;
  sp.unknown_dim = jr;
  sp.residual = [&](const Vec& a0) {
    const HomogeneousTrajectory tr = hom_integrate(model, a0, horizon, steps);
    return Vec(tr.base_chart.back() - target_chart);
  };
  HomogeneousBoundaryResult out;
  out.shooting = solve(sp, start, config);
  out.alpha0_p = out.shooting.solution;
  out.trajectory = hom_integrate(model, out.alpha0_p, horizon, steps);
  return out;
}

namespace {

// Basis coordinates (A_2, A_3, A_1) to a rotation vector.
Vec rotation_vector(const Vec& c) {
  Vec w(3);
  w << c[2], c[0], c[1];
  return w;
}

Vec basis_coordinates(const Vec& w) {
  Vec c(3);
  c << w[1], w[2], w[0];
  return c;
}

}  // namespace

HomogeneousModel sphere_homogeneous_model(const Mat& sigma,
                                          std::function<Eigen::Vector3d(double, const Eigen::Vector3d&)> field) {
  HomogeneousModel m;
  LieGroupModel g = so3_model(sigma, Vec(), LieConvention::Left);
  g.name = "so3-sphere";
  // The cyclic relabelling keeps c^k_{ij} = ε_{ijk}.
  g.rep = {hat3(Vec::Unit(3, 1)), hat3(Vec::Unit(3, 2)), hat3(Vec::Unit(3, 0))};
  g.exp = [](const Vec& c) { return so3_exp(rotation_vector(c)); };
  g.log = [](const Mat& r) { return basis_coordinates(so3_log(r)); };
  m.group = std::move(g);
  m.project = [](const Mat& gamma) { return Vec(gamma.col(0)); };
  m.push = [](const Mat& gamma, const Vec& c) {
    const Eigen::Vector3d w = rotation_vector(c);
    return Vec(gamma * w.cross(Eigen::Vector3d::UnitX()));
  };
  m.chart = [](const Vec& p) { return chart_from_sphere(Eigen::Vector3d(p)); };
  const ManifoldModel base = sphere_model();
  m.chart_domain = [domain = base.chart_domain](const Vec& p) {
    return p.allFinite() && domain(chart_from_sphere(Eigen::Vector3d(p)));
  };
  if (field) {
    m.base_drift = [field](double t, const Vec& p) {
      const Eigen::Vector3d q = Eigen::Vector3d(p).normalized();
      const Eigen::Vector3d f = field(t, q);
      return Vec(f - f.dot(q) * q);
    };
  }
  return m;
}

Eigen::Vector3d sphere_preset_field(const Eigen::Vector3d& p) {
  const Eigen::Vector3d axis = Eigen::Vector3d(0.3, 0.2, 1.0).normalized();
  return 0.6 * axis.cross(p) + 0.4 * Eigen::Vector3d::UnitZ();
}

}  // namespace mppgeo
