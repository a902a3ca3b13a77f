#pragma once

// Test-only oracles and random generators. Nothing here calls into the
// exponential or envelope code it is used to check.

#include "qenv/generator.hpp"
#include "qenv/linalg.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace qenv::testing {

/// e^{tq} for q = [[-a, a], [b, -b]] in closed form.
inline Matrix closed_form_2x2(double a, double b, double t) {
  const double s = a + b;
  Matrix e(2, 2);
  if (s == 0.0) return Matrix::Identity(2, 2);
  const double decay = std::exp(-s * t);
  e << b + a * decay, a - a * decay, b - b * decay, a + b * decay;
  return e / s;
}

inline Matrix two_state(double a, double b) {
  Matrix q(2, 2);
  q << -a, a, b, -b;
  return q;
}

/// Classical RK4 on u' = q u + f, written out independently of qenv::ode.
inline Vector rk4_linear(const Matrix& q, const Vector& f, const Vector& u0, double h, int steps) {
  const double dt = h / steps;
  Vector u = u0;
  auto rhs = [&](const Vector& v) -> Vector { return q * v + f; };
  for (int j = 0; j < steps; ++j) {
    const Vector k1 = rhs(u);
    const Vector k2 = rhs(u + 0.5 * dt * k1);
    const Vector k3 = rhs(u + 0.5 * dt * k2);
    const Vector k4 = rhs(u + dt * k3);
    u += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return u;
}

/// Random rate matrix with off-diagonal rates in [0, scale], about a third
/// of them zero.
inline Matrix random_q(std::mt19937_64& rng, Eigen::Index d, double scale = 1.0) {
  std::uniform_real_distribution<double> rate(0.0, scale);
  std::bernoulli_distribution zero(1.0 / 3.0);
  Matrix q = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (i == j || zero(rng)) continue;
      q(i, j) = rate(rng);
      sum += q(i, j);
    }
    q(i, i) = -sum;
  }
  return q;
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index d, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> coord(lo, hi);
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = coord(rng);
  return v;
}

/// Family with `members` random rate matrices; with penalties, member 0 is
/// unpenalized and the others carry f in [-1, 0]^d.
inline GeneratorFamily random_family(std::mt19937_64& rng, Eigen::Index d, std::size_t members,
                                     bool penalized, double scale = 1.0,
                                     Direction dir = Direction::upper) {
  std::vector<GeneratorFamily::Member> list;
  for (std::size_t k = 0; k < members; ++k) {
    Vector f = Vector::Zero(d);
    if (penalized && k > 0) f = random_vector(rng, d, -1.0, 0.0);
    list.push_back({random_q(rng, d, scale), f});
  }
  return GeneratorFamily(std::move(list), dir);
}

/// Two-member interval family q0 + lambda q with random rate matrices q0, q
/// and lambda in [0, lambda_max].
inline GeneratorFamily random_interval_family(std::mt19937_64& rng, Eigen::Index d,
                                              Direction dir = Direction::upper) {
  std::uniform_real_distribution<double> lam(0.0, 2.0);
  double lo = lam(rng), hi = lam(rng);
  if (lo > hi) std::swap(lo, hi);
  return interval_generator(random_q(rng, d), random_q(rng, d), lo, hi, dir);
}

template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& a) {
  return a.size() ? a.cwiseAbs().maxCoeff() : 0.0;
}

}  // namespace qenv::testing
