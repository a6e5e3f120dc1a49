#include "mppgeo/landmark_mpp.hpp"

#include "mppgeo/rk4.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

namespace mppgeo {

namespace {

constexpr double kVanishTol = 1e-10;

// Gaussian fields sharing a center and width share one kernel evaluation.
struct KernelGroup {
  Vec center;
  double inv_width2 = 0.0;
  std::vector<std::pair<int, int>> members;  // (field index, direction)
};

struct Plan {
  std::vector<KernelGroup> groups;
  std::vector<int> generic;
};

Plan make_plan(const LandmarkSystem& system) {
  Plan plan;
  std::map<std::vector<double>, int> index;
  for (int a = 0; a < system.rank(); ++a) {
    const NoiseField& f = system.fields[a];
    if (f.kind != FieldKind::Gaussian) {
      plan.generic.push_back(a);
      continue;
    }
    std::vector<double> key(f.center.data(), f.center.data() + f.center.size());
    key.push_back(f.width);
    auto [it, inserted] = index.emplace(key, static_cast<int>(plan.groups.size()));
    if (inserted) plan.groups.push_back({f.center, 1.0 / (f.width * f.width), {}});
    plan.groups[it->second].members.emplace_back(a, f.direction);
  }
  return plan;
}

Mat as_matrix(const double* data, int n, int d) {
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(data, n, d);
}

void store(const Mat& m, double* data) {
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(data, m.rows(), m.cols()) = m;
}

// Kernel value of every group at every landmark, groups × n.
Mat kernels(const Plan& plan, const Mat& x) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  Mat k(plan.groups.size(), n);
  for (std::size_t g = 0; g < plan.groups.size(); ++g) {
    const KernelGroup& grp = plan.groups[g];
    for (int r = 0; r < n; ++r) {
      double s = 0.0;
      for (int i = 0; i < d; ++i) {
        const double diff = x(r, i) - grp.center[i];
        s += diff * diff;
      }
      k(static_cast<Eigen::Index>(g), r) = std::exp(-0.5 * s * grp.inv_width2);
    }
  }
  return k;
}

Vec control(const LandmarkSystem& system, const Plan& plan, const Mat& x, const Mat& lam, const Mat& kern) {
  const int n = system.n();
  Vec c = Vec::Zero(system.rank());
  for (std::size_t g = 0; g < plan.groups.size(); ++g) {
    for (const auto& [a, m] : plan.groups[g].members) {
      double acc = 0.0;
      for (int r = 0; r < n; ++r) acc += lam(r, m) * kern(static_cast<Eigen::Index>(g), r);
      c[a] += acc;
    }
  }
  for (int a : plan.generic)
    for (int r = 0; r < n; ++r) c[a] += lam.row(r).dot(system.fields[a].eval(x.row(r).transpose()));
  return c;
}

Vec control(const LandmarkSystem& system, const Plan& plan, const Mat& x, const Mat& lam) {
  return control(system, plan, x, lam, kernels(plan, x));
}

// Velocity and, when lam_dot is given, the covector derivative.
Mat velocity(const LandmarkSystem& system, const Plan& plan, double t, const Mat& x, const Mat& lam, const Vec& c,
             const Mat& kern, Mat* lam_dot) {
  const int n = system.n();
  const int d = system.d();
  Mat v(n, d);
  if (lam_dot) lam_dot->setZero(n, d);
  for (int r = 0; r < n; ++r) {
    const Vec xr = x.row(r).transpose();
    v.row(r) = system.drift.value(t, xr).transpose();
    if (lam_dot && !system.drift.is_zero)
      lam_dot->row(r) -= (system.drift.jacobian(t, xr).transpose() * lam.row(r).transpose()).transpose();
  }
  for (std::size_t g = 0; g < plan.groups.size(); ++g) {
    const KernelGroup& grp = plan.groups[g];
    for (int r = 0; r < n; ++r) {
      const double k = kern(static_cast<Eigen::Index>(g), r);
      double pairing = 0.0;
      for (const auto& [a, m] : grp.members) {
        v(r, m) += c[a] * k;
        pairing += c[a] * lam(r, m);
      }
      // ∂_k of the kernel is −k (x − p)_k / τ².
      if (lam_dot) {
        const double w = pairing * k * grp.inv_width2;
        for (int i = 0; i < d; ++i) (*lam_dot)(r, i) += w * (x(r, i) - grp.center[i]);
      }
    }
  }
  for (int a : plan.generic) {
    const NoiseField& f = system.fields[a];
    for (int r = 0; r < n; ++r) {
      const Vec xr = x.row(r).transpose();
      v.row(r) += c[a] * f.eval(xr).transpose();
      if (lam_dot) lam_dot->row(r) -= c[a] * (f.grad(xr).transpose() * lam.row(r).transpose()).transpose();
    }
  }
  return v;
}

Mat velocity(const LandmarkSystem& system, const Plan& plan, double t, const Mat& x, const Mat& lam, const Vec& c,
             Mat* lam_dot) {
  return velocity(system, plan, t, x, lam, c, kernels(plan, x), lam_dot);
}

Vec packed_rhs(const LandmarkSystem& system, const Plan& plan, double t, const Vec& y) {
  const int n = system.n();
  const int d = system.d();
  const int nd = n * d;
  const Mat x = as_matrix(y.data(), n, d);
  const Mat lam = as_matrix(y.data() + nd, n, d);
  const Mat kern = kernels(plan, x);
  const Vec c = control(system, plan, x, lam, kern);
  Mat lam_dot;
  const Mat v = velocity(system, plan, t, x, lam, c, kern, &lam_dot);
  Vec out(2 * nd);
  store(v, out.data());
  store(lam_dot, out.data() + nd);
  return out;
}

void check_shapes(const LandmarkSystem& system, const Mat& m, const char* what) {
  if (m.rows() != system.n() || m.cols() != system.d())
    throw InvalidModel(std::string(what) + " must be n × d");
}

}  // namespace

NoiseField gaussian_field(const Vec& center, double width, int direction) {
  if (!(width > 0.0)) throw InvalidModel("gaussian width must be positive");
  if (direction < 0 || direction >= center.size()) throw InvalidModel("gaussian direction out of range");
  NoiseField f;
  f.kind = FieldKind::Gaussian;
  f.center = center;
  f.width = width;
  f.direction = direction;
  const double s = 1.0 / (width * width);
  f.eval = [center, s, direction](const Vec& x) {
    Vec out = Vec::Zero(x.size());
    out[direction] = std::exp(-0.5 * (x - center).squaredNorm() * s);
    return out;
  };
  f.grad = [center, s, direction](const Vec& x) {
    const Vec diff = x - center;
    const double k = std::exp(-0.5 * diff.squaredNorm() * s);
    Mat out = Mat::Zero(x.size(), x.size());
    out.row(direction) = (-k * s) * diff.transpose();
    return out;
  };
  return f;
}

NoiseField constant_field(const Vec& v) {
  NoiseField f;
  f.kind = FieldKind::Constant;
  f.eval = [v](const Vec&) { return v; };
  f.grad = [d = v.size()](const Vec&) { return Mat(Mat::Zero(d, d)); };
  return f;
}

NoiseField linear_field(const Mat& a, const Vec& b) {
  if (a.rows() != a.cols() || a.rows() != b.size()) throw InvalidModel("linear field needs square A and matching b");
  NoiseField f;
  f.kind = FieldKind::Linear;
  f.eval = [a, b](const Vec& x) { return Vec(a * x + b); };
  f.grad = [a](const Vec&) { return a; };
  return f;
}

double field_gradient_mismatch(const NoiseField& field, const std::vector<Vec>& samples) {
  double worst = 0.0;
  for (const Vec& x : samples) {
    const Mat g = field.grad(x);
    Mat fd(g.rows(), g.cols());
    for (int k = 0; k < x.size(); ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[k]));
      Vec xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      fd.col(k) = (field.eval(xp) - field.eval(xm)) / (2.0 * h);
    }
    worst = std::max(worst, (g - fd).norm() / std::max(1.0, g.norm()));
  }
  return worst;
}

void LandmarkSystem::validate() const {
  if (n() < 1 || d() < 1) throw InvalidModel("landmark system needs n ≥ 1 and d ≥ 1");
  if (!initial.allFinite()) throw NonFiniteState("initial landmarks are not finite");
  if (!(horizon > 0.0) || steps < 1) throw InvalidModel("need a positive horizon and at least one step");
  if (!drift.value || (!drift.is_zero && !drift.jacobian)) throw InvalidModel("landmark drift needs value and jacobian");
  for (int a = 0; a < rank(); ++a) {
    const NoiseField& f = fields[a];
    if (!f.eval || !f.grad) throw InvalidModel("noise field needs eval and grad");
    bool vanishes = true;
    for (int r = 0; r < n(); ++r) {
      const Vec s = f.eval(initial.row(r).transpose());
      if (s.size() != d()) throw InvalidModel("noise field has the wrong dimension");
      if (s.norm() >= kVanishTol) vanishes = false;
    }
    if (vanishes) throw InvalidModel("noise field " + std::to_string(a) + " vanishes at every landmark");
  }
}

Vec pack_landmarks(const Mat& x, const Mat& lam) {
  const int nd = static_cast<int>(x.size());
  Vec y(2 * nd);
  store(x, y.data());
  store(lam, y.data() + nd);
  return y;
}

LandmarkState landmark_rhs(const LandmarkSystem& system, double t, const LandmarkState& state) {
  check_shapes(system, state.x, "x");
  check_shapes(system, state.lam, "lam");
  if (!state.x.allFinite() || !state.lam.allFinite()) throw NonFiniteState("landmark state is not finite");
  const Plan plan = make_plan(system);
  LandmarkState out;
  out.c = control(system, plan, state.x, state.lam);
  out.x = velocity(system, plan, t, state.x, state.lam, out.c, &out.lam);
  return out;
}

double landmark_hamiltonian(const LandmarkSystem& system, double t, const LandmarkState& state) {
  const Plan plan = make_plan(system);
  const Vec c = control(system, plan, state.x, state.lam);
  double h = 0.5 * c.squaredNorm();
  for (int r = 0; r < system.n(); ++r)
    h += state.lam.row(r).dot(system.drift.value(t, state.x.row(r).transpose()));
  return h;
}

LandmarkTrajectory landmark_integrate(const LandmarkSystem& system, const Mat& lam0) {
  system.validate();
  check_shapes(system, lam0, "lam0");
  if (!lam0.allFinite()) throw NonFiniteState("lam0 is not finite");
  const int n = system.n();
  const int d = system.d();
  const int nd = n * d;
  const Plan plan = make_plan(system);
  const auto f = [&](double t, const Vec& y) { return packed_rhs(system, plan, t, y); };

  LandmarkTrajectory out;
  out.times.reserve(system.steps + 1);
  out.states.reserve(system.steps + 1);
  auto record = [&](double t, const Vec& y) {
    LandmarkState s;
    s.x = as_matrix(y.data(), n, d);
    s.lam = as_matrix(y.data() + nd, n, d);
    s.c = control(system, plan, s.x, s.lam);
    double h = 0.5 * s.c.squaredNorm();
    for (int r = 0; r < n; ++r) h += s.lam.row(r).dot(system.drift.value(t, s.x.row(r).transpose()));
    const double q = s.c.squaredNorm();
    out.energy.push_back(out.times.empty()
                             ? 0.0
                             : out.energy.back() + 0.25 * (t - out.times.back()) * (out.states.back().c.squaredNorm() + q));
    out.hamiltonian.push_back(h);
    out.times.push_back(t);
    out.states.push_back(std::move(s));
  };

  Vec y = pack_landmarks(system.initial, lam0);
  const double h = system.horizon / system.steps;
  record(0.0, y);
  for (int i = 0; i < system.steps; ++i) {
    const double t = system.horizon * static_cast<double>(i) / system.steps;
    y = rk4_step(f, t, y, h);
    if (!y.allFinite()) throw NonFiniteState("landmark state is not finite at t=" + std::to_string(t + h));
    record(system.horizon * static_cast<double>(i + 1) / system.steps, y);
  }
  return out;
}

Mat landmark_endpoint(const LandmarkSystem& system, const Mat& lam0) {
  const int n = system.n();
  const int d = system.d();
  const Plan plan = make_plan(system);
  const auto f = [&](double t, const Vec& y) { return packed_rhs(system, plan, t, y); };
  Vec y = pack_landmarks(system.initial, lam0);
  const double h = system.horizon / system.steps;
  for (int i = 0; i < system.steps; ++i) {
    y = rk4_step(f, system.horizon * static_cast<double>(i) / system.steps, y, h);
    if (!y.allFinite()) throw NonFiniteState("landmark state is not finite");
  }
  return as_matrix(y.data(), n, d);
}

Mat landmark_default_guess(const LandmarkSystem& system, const Mat& targets) {
  system.validate();
  check_shapes(system, targets, "targets");
  const Mat drift_end = landmark_endpoint(system, Mat::Zero(system.n(), system.d()));
  Mat guess = (targets - drift_end) / system.horizon;
  for (int r = 0; r < system.n(); ++r) {
    double s = 0.0;
    for (const NoiseField& f : system.fields) s += f.eval(system.initial.row(r).transpose()).squaredNorm();
    const double scale = s > 0.0 ? std::clamp(1.0 / s, 1e-3, 1e3) : 1e3;
    guess.row(r) *= scale;
  }
  return guess;
}

LandmarkBoundaryResult landmark_shoot(const LandmarkSystem& system, const Mat& targets, const Mat* lam0_guess,
                                      const ShootingConfig& config) {
  system.validate();
  check_shapes(system, targets, "targets");
  if (!targets.allFinite()) throw NonFiniteState("targets are not finite");
  const int n = system.n();
  const int d = system.d();
  const Mat zero = Mat::Zero(n, d);

  LandmarkBoundaryResult out;
  if (system.rank() == 0) {
    // Only the drift flow is available.
    Vec res(n * d);
    store(landmark_endpoint(system, zero) - targets, res.data());
    if (res.norm() > config.tol)
      throw NonConvergence("no noise fields and targets differ from the drift endpoints", Vec::Zero(n * d), res.norm(), 0);
    out.lam0 = zero;
    out.shooting.solution = Vec::Zero(n * d);
    out.shooting.residual = res;
    out.shooting.residual_norm = res.norm();
    out.shooting.converged = true;
    out.trajectory = landmark_integrate(system, zero);
    return out;
  }

  const Mat guess = lam0_guess ? *lam0_guess : landmark_default_guess(system, targets);
  check_shapes(system, guess, "lam0 guess");
  ShootingProblem sp;
  sp.unknown_dim = n * d;
  sp.residual = [&](const Vec& u) {
    const Mat lam0 = as_matrix(u.data(), n, d);
    const Mat diff = landmark_endpoint(system, lam0) - targets;
    Vec r(n * d);
    store(diff, r.data());
    return r;
  };
  Vec start(n * d);
  store(guess, start.data());
  try {
    out.shooting = solve(sp, start, config);
  } catch (const SingularJacobian& e) {
    throw RankDeficient(std::string("landmark shooting Jacobian is rank deficient: ") + e.what());
  }
  out.lam0 = as_matrix(out.shooting.solution.data(), n, d);
  out.trajectory = landmark_integrate(system, out.lam0);
  return out;
}

SingularityCertificate landmark_singular_check(const LandmarkSystem& system, const LandmarkTrajectory& trajectory) {
  SingularityCertificate cert;
  if (trajectory.states.empty() || trajectory.times.size() < 2) return cert;
  const int n = system.n();
  const int d = system.d();
  const int nd = n * d;
  const int jr = system.rank();
  const int steps = static_cast<int>(trajectory.times.size()) - 1;
  const double horizon = trajectory.times.back() - trajectory.times.front();
  if (jr == 0) {
    cert.min_singular_value = 0.0;
    cert.is_singular = true;
    return cert;
  }
  const Plan plan = make_plan(system);

  // Packed as [x, λ, Λ] where column b of Λ (n·d × n·d) is the test covector
  // started from the b-th basis vector; c comes from the (x, λ) part.
  const auto f = [&](double t, const Vec& y) {
    Vec out(2 * nd + nd * nd);
    out.head(2 * nd) = packed_rhs(system, plan, t, y.head(2 * nd));
    const Mat x = as_matrix(y.data(), n, d);
    const Mat lam = as_matrix(y.data() + nd, n, d);
    const Mat kern = kernels(plan, x);
    const Vec c = control(system, plan, x, lam, kern);
    for (int b = 0; b < nd; ++b) {
      const Mat mu = as_matrix(y.data() + 2 * nd + b * nd, n, d);
      Mat mu_dot;
      velocity(system, plan, t, x, mu, c, kern, &mu_dot);
      store(mu_dot, out.data() + 2 * nd + b * nd);
    }
    return out;
  };

  const LandmarkState& s0 = trajectory.states.front();
  Vec y(2 * nd + nd * nd);
  y.head(2 * nd) = pack_landmarks(s0.x, s0.lam);
  y.tail(nd * nd) = Eigen::Map<const Vec>(Mat::Identity(nd, nd).eval().data(), nd * nd);

  Mat rows((steps + 1) * jr, nd);
  const double h = horizon / steps;
  auto assemble = [&](int i) {
    const Mat x = as_matrix(y.data(), n, d);
    const double hl = i > 0 ? h : 0.0;
    const double hr = i < steps ? h : 0.0;
    const double w = std::sqrt(0.5 * (hl + hr));
    for (int a = 0; a < jr; ++a) {
      for (int b = 0; b < nd; ++b) {
        const Mat mu = as_matrix(y.data() + 2 * nd + b * nd, n, d);
        double p = 0.0;
        for (int r = 0; r < n; ++r) p += mu.row(r).dot(system.fields[a].eval(x.row(r).transpose()));
        rows(i * jr + a, b) = w * p;
      }
    }
  };
  assemble(0);
  for (int i = 0; i < steps; ++i) {
    y = rk4_step(f, trajectory.times.front() + i * h, y, h);
    assemble(i + 1);
  }

  cert.scale = rows.norm();
  if (rows.rows() < nd) {
    cert.min_singular_value = 0.0;
  } else {
    const Mat r = rows.householderQr().matrixQR().topRows(nd).triangularView<Eigen::Upper>();
    cert.min_singular_value = Eigen::JacobiSVD<Mat>(r).singularValues().minCoeff();
  }
  cert.is_singular = cert.min_singular_value <= kSingularTol * cert.scale;
  return cert;
}

std::vector<NoiseField> grid_fields(const Mat& scene, int per_axis, double width, double inflate) {
  if (scene.rows() < 1 || scene.cols() != 2) throw InvalidModel("grid presets need a non-empty 2-d scene");
  if (per_axis < 1) throw InvalidModel("grid needs at least one node per axis");
  const Vec lo = scene.colwise().minCoeff().transpose();
  const Vec hi = scene.colwise().maxCoeff().transpose();
  const Vec pad = inflate * (hi - lo);
  const Vec a = lo - pad;
  const Vec b = hi + pad;
  std::vector<NoiseField> out;
  out.reserve(2 * per_axis * per_axis);
  for (int i = 0; i < per_axis; ++i) {
    for (int j = 0; j < per_axis; ++j) {
      Vec p(2);
      p[0] = per_axis == 1 ? 0.5 * (a[0] + b[0]) : a[0] + (b[0] - a[0]) * i / (per_axis - 1);
      p[1] = per_axis == 1 ? 0.5 * (a[1] + b[1]) : a[1] + (b[1] - a[1]) * j / (per_axis - 1);
      for (int m = 0; m < 2; ++m) out.push_back(gaussian_field(p, width, m));
    }
  }
  return out;
}

Mat circle_scene(int n, const Vec& center, double rx, double ry, double phase) {
  if (n < 1 || center.size() != 2) throw InvalidModel("circle scene needs n ≥ 1 and a 2-d center");
  Mat out(n, 2);
  for (int r = 0; r < n; ++r) {
    const double phi = phase + 2.0 * std::numbers::pi * r / n;
    out(r, 0) = center[0] + rx * std::cos(phi);
    out(r, 1) = center[1] + ry * std::sin(phi);
  }
  return out;
}

}  // namespace mppgeo
