#ifndef MPPGEO_RK4_HPP
#define MPPGEO_RK4_HPP

#include "mppgeo/types.hpp"

namespace mppgeo {

/// One classical fourth-order Runge–Kutta step for y' = f(t, y).
template <typename Rhs>
Vec rk4_step(const Rhs& f, double t, const Vec& y, double h) {
  const Vec k1 = f(t, y);
  const Vec k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
  const Vec k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
  const Vec k4 = f(t + h, y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace mppgeo

#endif  // MPPGEO_RK4_HPP
