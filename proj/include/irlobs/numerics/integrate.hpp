#pragma once

#include <concepts>

#include "irlobs/numerics/types.hpp"

namespace irlobs::numerics {

template <typename F>
concept VectorField = requires(F f, double t, const Vector& x) {
  { f(t, x) } -> std::convertible_to<Vector>;
};

/// One classical fourth-order Runge-Kutta step of xdot = f(t, x).
template <VectorField F>
Vector rk4_step(F&& f, double t, const Vector& x, double dt) {
  if (!(dt > 0.0)) throw DomainError("rk4_step: dt must be positive");
  const double h2 = 0.5 * dt;
  const Vector k1 = f(t, x);
  require_dims(k1.size() == x.size(), "rk4_step: vector field changed dimension");
  const Vector k2 = f(t + h2, x + h2 * k1);
  const Vector k3 = f(t + h2, x + h2 * k2);
  const Vector k4 = f(t + dt, x + dt * k3);
  Vector next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  require_finite(next, "rk4_step");
  return next;
}

}  // namespace irlobs::numerics
