#include "qenv/pricing.hpp"

#include "qenv/ode.hpp"

#include <cmath>
#include <sstream>

namespace qenv {

namespace {

void require_strikes(double K, double L, const char* who) {
  if (!std::isfinite(K) || !std::isfinite(L) || !(K < L)) {
    throw InvalidInput(std::string(who) + ": requires K < L");
  }
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

Payoff payoff_butterfly(const StateGrid& grid, double K, double L) {
  require_strikes(K, L, "payoff_butterfly");
  Vector values(grid.dim);
  for (Eigen::Index i = 0; i < grid.dim; ++i) {
    values(i) = std::max(L - K - std::abs(grid.point(i) - L), 0.0);
  }
  return Payoff{PayoffKind::butterfly, K, L, grid, std::move(values)};
}

Payoff payoff_bull(const StateGrid& grid, double K, double L) {
  require_strikes(K, L, "payoff_bull");
  Vector values(grid.dim);
  for (Eigen::Index i = 0; i < grid.dim; ++i) {
    values(i) = std::min(std::max(grid.point(i) - K, 0.0), L - K);
  }
  return Payoff{PayoffKind::bull, K, L, grid, std::move(values)};
}

Payoff payoff_custom(const StateGrid& grid, Vector values) {
  if (values.size() != grid.dim) {
    throw DimensionMismatch("payoff_custom: " + std::to_string(values.size()) +
                            " values for a grid of " + std::to_string(grid.dim) + " points");
  }
  require_finite(values, "payoff_custom");
  return Payoff{PayoffKind::custom, 0.0, 0.0, grid, std::move(values)};
}

std::string describe(const PricingMethod& method) {
  return std::visit(
      overloaded{
          [](const OdeEuler& m) { return "ode-euler(steps=" + std::to_string(m.steps) + ")"; },
          [](const OdeRk4& m) { return "ode-rk4(steps=" + std::to_string(m.steps) + ")"; },
          [](const NisioMethod& m) {
            return "nisio(n=" + std::to_string(m.n) +
                   (m.k == 0 ? std::string(", exact exponentials)")
                             : ", k=" + std::to_string(m.k) + ")");
          },
      },
      method);
}

namespace {

Vector solve_direction(const GeneratorFamily& fam, const Vector& u0, double t,
                       const PricingMethod& method) {
  if (t == 0.0) return u0;
  OdeOptions keep_ends{2};
  return std::visit(
      overloaded{
          [&](const OdeEuler& m) { return solve_euler(fam, u0, t, m.steps, keep_ends).final_value(); },
          [&](const OdeRk4& m) { return solve_rk4(fam, u0, t, m.steps, keep_ends).final_value(); },
          [&](const NisioMethod& m) {
            FlowOptions options;
            if (m.k > 0) options = {ExpMode::euler_product, m.k};
            return envelope(fam, t, m.n, u0, options);
          },
      },
      method);
}

void validate_method(const PricingMethod& method) {
  std::visit(overloaded{
                 [](const OdeEuler& m) {
                   if (m.steps < 1) throw InvalidInput("ode-euler: steps must be >= 1");
                 },
                 [](const OdeRk4& m) {
                   if (m.steps < 1) throw InvalidInput("ode-rk4: steps must be >= 1");
                 },
                 [](const NisioMethod& m) {
                   if (m.n < 0 || m.n > 30) throw InvalidInput("nisio: n must be in [0, 30]");
                   if (m.k < 0) throw InvalidInput("nisio: k must be >= 0");
                 },
             },
             method);
}

}  // namespace

PriceBounds price_bounds(const GeneratorFamily& fam, const Payoff& payoff, double t,
                         const PricingMethod& method) {
  if (payoff.values.size() != fam.dim()) {
    throw DimensionMismatch("price_bounds: payoff has " + std::to_string(payoff.values.size()) +
                            " states, family has " + std::to_string(fam.dim()));
  }
  if (!std::isfinite(t) || t < 0.0) throw InvalidInput("price_bounds: t must be >= 0");
  validate_method(method);
  Vector upper = solve_direction(fam.with_direction(Direction::upper), payoff.values, t, method);
  Vector lower = solve_direction(fam.with_direction(Direction::lower), payoff.values, t, method);
  return PriceBounds{payoff.grid, std::move(upper), std::move(lower), method, t};
}

Vector linear_reference(const Matrix& q_lin, const Payoff& payoff, double t) {
  if (q_lin.rows() != payoff.values.size()) {
    throw DimensionMismatch("linear_reference: matrix and payoff dimensions differ");
  }
  return mat_exp(q_lin, t) * payoff.values;
}

ComparisonReport compare_methods(const PriceBounds& first, const PriceBounds& second) {
  if (!(first.grid == second.grid)) throw DimensionMismatch("compare_methods: grids differ");
  Vector du = (first.upper - second.upper).cwiseAbs();
  Vector dl = (first.lower - second.lower).cwiseAbs();
  const double mu = norm_inf(du);
  const double ml = norm_inf(dl);
  return ComparisonReport{mu, ml, std::move(du), std::move(dl), first, second};
}

}  // namespace qenv
