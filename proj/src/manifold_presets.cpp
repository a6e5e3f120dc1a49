#include "mppgeo/manifolds.hpp"

#include <cmath>

namespace mppgeo {

namespace {

Tensor3 torsion_of(const Tensor3& gamma) {
  const int d = gamma.dim();
  Tensor3 t(d);
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) t(k, i, j) = gamma(k, i, j) - gamma(k, j, i);
  return t;
}

double fd_step(double base, double xi) { return base * std::max(1.0, std::abs(xi)); }

}  // namespace

ManifoldModel flat_model(int dim, const Vec& origin) {
  ManifoldModel m;
  m.name = "flat";
  m.dim = dim;
  m.sr_rank = dim;
  m.christoffel = [dim](const Vec&) { return Tensor3(dim); };
  m.torsion = [dim](const Vec&) { return Tensor3(dim); };
  m.curvature = [dim](const Vec&) { return Tensor4(dim); };
  m.origin = origin.size() == dim ? origin : Vec::Zero(dim);
  m.frame0 = Mat::Identity(dim, dim);
  m.metric_e = Mat::Identity(dim, dim);
  m.metric = [dim](const Vec&) { return Mat::Identity(dim, dim); };
  return m;
}

Eigen::Vector3d sphere_from_chart(const Vec& x) {
  const double r2 = x.squaredNorm();
  const double s = 1.0 / (1.0 + r2);
  return {2.0 * x[0] * s, 2.0 * x[1] * s, (1.0 - r2) * s};
}

Vec chart_from_sphere(const Eigen::Vector3d& p) {
  Vec x(2);
  x << p[0] / (1.0 + p[2]), p[1] / (1.0 + p[2]);
  return x;
}

Eigen::Matrix<double, 3, 2> sphere_chart_differential(const Vec& x) {
  const double r2 = x.squaredNorm();
  const double s = 1.0 / (1.0 + r2);
  const double s2 = s * s;
  Eigen::Matrix<double, 3, 2> j;
  // ∂/∂x_i of (2x/(1+r²), (1−r²)/(1+r²)).
  for (int i = 0; i < 2; ++i) {
    for (int a = 0; a < 2; ++a) j(a, i) = 2.0 * ((a == i ? 1.0 : 0.0) * s - 2.0 * x[a] * x[i] * s2);
    j(2, i) = -4.0 * x[i] * s2;
  }
  return j;
}

Mat sphere_metric(const Vec& x) {
  const double c = 2.0 / (1.0 + x.squaredNorm());
  return c * c * Mat::Identity(2, 2);
}

ManifoldModel sphere_model(const Vec& origin) {
  ManifoldModel m;
  m.name = "sphere";
  m.dim = 2;
  m.sr_rank = 2;
  // g = e^{2φ} δ with φ = log 2 − log(1 + r²).
  m.christoffel = [](const Vec& x) {
    Tensor3 g(2);
    const double q = 1.0 + x.squaredNorm();
    const double dphi[2] = {-2.0 * x[0] / q, -2.0 * x[1] / q};
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          g(k, i, j) = (i == k ? dphi[j] : 0.0) + (j == k ? dphi[i] : 0.0) - (i == j ? dphi[k] : 0.0);
    return g;
  };
  m.torsion = [](const Vec&) { return Tensor3(2); };
  // Constant curvature 1: R(X, Y)Z = g(Y, Z) X − g(X, Z) Y.
  m.curvature = [](const Vec& x) {
    Tensor4 r(2);
    const Mat g = sphere_metric(x);
    for (int l = 0; l < 2; ++l)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          for (int k = 0; k < 2; ++k) r(l, i, j, k) = g(j, k) * (l == i) - g(i, k) * (l == j);
    return r;
  };
  m.origin = origin;
  m.frame0 = Mat::Identity(2, 2) * (0.5 * (1.0 + origin.squaredNorm()));
  m.metric_e = Mat::Identity(2, 2);
  m.metric = sphere_metric;
  // Reject points within ambient distance 1e-3 of the south pole; that
  // distance equals 2 / sqrt(1 + r²).
  m.chart_domain = [](const Vec& x) { return 2.0 / std::sqrt(1.0 + x.squaredNorm()) >= 1e-3; };
  return m;
}

Mat heisenberg_frame(const Vec& x) {
  Mat f = Mat::Identity(3, 3);
  f(2, 0) = -0.5 * x[1];
  f(2, 1) = 0.5 * x[0];
  return f;
}

ManifoldModel heisenberg_model(const Vec& origin) {
  ManifoldModel m;
  m.name = "heisenberg";
  m.dim = 3;
  m.sr_rank = 2;
  // Γ_i = −(∂_i F) F^{-1} for the parallel frame F; only two entries survive.
  m.christoffel = [](const Vec&) {
    Tensor3 g(3);
    g(2, 0, 1) = -0.5;
    g(2, 1, 0) = 0.5;
    return g;
  };
  m.torsion = [](const Vec&) {
    Tensor3 t(3);
    t(2, 0, 1) = -1.0;
    t(2, 1, 0) = 1.0;
    return t;
  };
  m.curvature = [](const Vec&) { return Tensor4(3); };
  m.origin = origin;
  m.frame0 = heisenberg_frame(origin);
  m.metric_e = Mat::Identity(2, 2);
  m.metric = [](const Vec& x) {
    const Mat finv = heisenberg_frame(x).inverse();
    return Mat(finv.transpose() * finv);
  };
  return m;
}

ManifoldModel parallel_frame_model(int dim, int sr_rank, std::function<Mat(const Vec&)> frame, const Vec& origin,
                                   std::function<bool(const Vec&)> domain) {
  ManifoldModel m;
  m.name = "parallel-frame";
  m.dim = dim;
  m.sr_rank = sr_rank;
  m.christoffel = [frame, dim](const Vec& x) {
    const Mat finv = frame(x).inverse();
    Tensor3 g(dim);
    for (int i = 0; i < dim; ++i) {
      const double h = fd_step(1e-5, x[i]);
      Vec xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const Mat gi = -(frame(xp) - frame(xm)) / (2.0 * h) * finv;
      for (int k = 0; k < dim; ++k)
        for (int j = 0; j < dim; ++j) g(k, i, j) = gi(k, j);
    }
    return g;
  };
  m.torsion = [c = m.christoffel](const Vec& x) { return torsion_of(c(x)); };
  m.curvature = [dim](const Vec&) { return Tensor4(dim); };
  m.origin = origin;
  m.frame0 = frame(origin);
  m.metric_e = Mat::Identity(sr_rank, sr_rank);
  m.chart_domain = std::move(domain);
  return m;
}

Mat so3_left_jacobian(const Vec& x) {
  const double th2 = x.squaredNorm();
  const double th = std::sqrt(th2);
  Mat k(3, 3);
  k << 0.0, -x[2], x[1], x[2], 0.0, -x[0], -x[1], x[0], 0.0;
  double a, b;
  if (th < 1e-4) {
    a = 0.5 - th2 / 24.0;
    b = 1.0 / 6.0 - th2 / 120.0;
  } else {
    a = (1.0 - std::cos(th)) / th2;
    b = (th - std::sin(th)) / (th2 * th);
  }
  return Mat::Identity(3, 3) + a * k + b * k * k;
}

ManifoldModel so3_chart_model() {
  ManifoldModel m = parallel_frame_model(
      3, 3, [](const Vec& x) { return Mat(so3_left_jacobian(x).inverse()); }, Vec::Zero(3),
      [](const Vec& x) { return x.norm() < 3.0; });
  m.name = "so3-chart";
  return m;
}

std::function<Tensor4(const Vec&)> curvature_from_christoffel(std::function<Tensor3(const Vec&)> christoffel,
                                                              int dim, double step) {
  return [christoffel, dim, step](const Vec& x) {
    std::vector<Tensor3> dgamma(dim);
    for (int i = 0; i < dim; ++i) {
      const double h = fd_step(step, x[i]);
      Vec xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const Tensor3 gp = christoffel(xp);
      const Tensor3 gm = christoffel(xm);
      Tensor3 d(dim);
      for (int l = 0; l < dim; ++l)
        for (int a = 0; a < dim; ++a)
          for (int b = 0; b < dim; ++b) d(l, a, b) = (gp(l, a, b) - gm(l, a, b)) / (2.0 * h);
      dgamma[i] = d;
    }
    const Tensor3 g = christoffel(x);
    Tensor4 r(dim);
    for (int l = 0; l < dim; ++l)
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
          for (int k = 0; k < dim; ++k) {
            double s = dgamma[i](l, j, k) - dgamma[j](l, i, k);
            for (int m = 0; m < dim; ++m) s += g(l, i, m) * g(m, j, k) - g(l, j, m) * g(m, i, k);
            r(l, i, j, k) = s;
          }
    return r;
  };
}

ManifoldModel metric_model(int dim, std::function<Mat(const Vec&)> metric, const Vec& origin,
                           std::function<bool(const Vec&)> domain) {
  ManifoldModel m;
  m.name = "metric";
  m.dim = dim;
  m.sr_rank = dim;
  auto christoffel = [metric, dim](const Vec& x) {
    std::vector<Mat> dg(dim);
    for (int i = 0; i < dim; ++i) {
      const double h = fd_step(1e-5, x[i]);
      Vec xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      dg[i] = (metric(xp) - metric(xm)) / (2.0 * h);
    }
    const Mat ginv = metric(x).inverse();
    Tensor3 g(dim);
    for (int k = 0; k < dim; ++k)
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
          double s = 0.0;
          for (int l = 0; l < dim; ++l) s += ginv(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
          g(k, i, j) = 0.5 * s;
        }
    return g;
  };
  m.christoffel = christoffel;
  m.torsion = [dim](const Vec&) { return Tensor3(dim); };
  m.curvature = curvature_from_christoffel(christoffel, dim, 1e-4);
  m.origin = origin;
  m.frame0 = spd_inv_sqrt(metric(origin));
  m.metric_e = Mat::Identity(dim, dim);
  m.chart_domain = std::move(domain);
  m.metric = std::move(metric);
  return m;
}

ManifoldModel perturb_connection(const ManifoldModel& model, std::function<Tensor3(const Vec&)> mu) {
  ManifoldModel m = model;
  m.name = model.name + "+mu";
  auto base = model.christoffel;
  auto christoffel = [base, mu](const Vec& x) {
    Tensor3 g = base(x);
    g += mu(x);
    return g;
  };
  m.christoffel = christoffel;
  m.torsion = [christoffel](const Vec& x) { return torsion_of(christoffel(x)); };
  m.curvature = curvature_from_christoffel(christoffel, model.dim);
  // The perturbed connection need not preserve the full chart metric.
  m.metric = nullptr;
  return m;
}

}  // namespace mppgeo
