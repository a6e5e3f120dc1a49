// Analytic reference solutions shared by the unit and acceptance tests.
#ifndef MPPGEO_TESTS_ORACLES_HPP
#define MPPGEO_TESTS_ORACLES_HPP

#include "mppgeo/geom_core.hpp"
#include "mppgeo/manifolds.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace oracle {

using mppgeo::Mat;
using mppgeo::Vec;

/// Unit-speed great circle on S² from the north pole in ambient direction
/// (cos φ, sin φ, 0), evaluated in the stereographic chart.
inline Vec great_circle_chart(double phi, double t) {
  const Eigen::Vector3d p(std::sin(t) * std::cos(phi), std::sin(t) * std::sin(phi), std::cos(t));
  return mppgeo::chart_from_sphere(p);
}

inline Vec great_circle_chart_velocity(double phi, double t) {
  const Eigen::Vector3d p(std::sin(t) * std::cos(phi), std::sin(t) * std::sin(phi), std::cos(t));
  const Eigen::Vector3d dp(std::cos(t) * std::cos(phi), std::cos(t) * std::sin(phi), -std::sin(t));
  // d/dt of p_xy / (1 + p_z).
  Vec v(2);
  for (int a = 0; a < 2; ++a) v[a] = dp[a] / (1.0 + p[2]) - p[a] * dp[2] / ((1.0 + p[2]) * (1.0 + p[2]));
  return v;
}

/// Sampled path from closed-form position and velocity.
inline mppgeo::CurvePath sample_path(const std::function<Vec(double)>& x, const std::function<Vec(double)>& v,
                                     double horizon, int steps) {
  mppgeo::CurvePath p;
  p.times = mppgeo::uniform_grid(horizon, steps);
  std::vector<Vec> vel;
  for (double t : p.times) {
    p.points.push_back(x(t));
    vel.push_back(v(t));
  }
  p.velocities = vel;
  return p;
}

/// Great-circle distance between chart points of S².
inline double sphere_distance(const Vec& a, const Vec& b) {
  const double c = mppgeo::sphere_from_chart(a).dot(mppgeo::sphere_from_chart(b));
  return std::acos(std::clamp(c, -1.0, 1.0));
}

/// Smooth test path on S² starting at the north pole (chart origin).
inline mppgeo::CurvePath wiggly_sphere_path(int steps, double a = 0.6, double b = 0.35) {
  auto x = [a, b](double t) {
    Vec p(2);
    p << a * std::sin(1.3 * t) + 0.1 * t * t, b * (1.0 - std::cos(2.1 * t)) + 0.2 * std::sin(t);
    return p;
  };
  auto v = [a, b](double t) {
    Vec p(2);
    p << 1.3 * a * std::cos(1.3 * t) + 0.2 * t, 2.1 * b * std::sin(2.1 * t) + 0.2 * std::cos(t);
    return p;
  };
  return sample_path(x, v, 1.0, steps);
}

}  // namespace oracle

#endif  // MPPGEO_TESTS_ORACLES_HPP
