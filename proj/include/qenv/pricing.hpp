#pragma once

#include "qenv/generator.hpp"
#include "qenv/linalg.hpp"
#include "qenv/nisio.hpp"

#include <string>
#include <variant>

namespace qenv {

enum class PayoffKind { butterfly, bull, custom };

struct Payoff {
  PayoffKind kind;
  double strike_low = 0.0;   // K
  double strike_high = 0.0;  // L
  StateGrid grid;
  Vector values;
};

/// (L - K - |x - L|)^+ on the grid.
[[nodiscard]] Payoff payoff_butterfly(const StateGrid& grid, double K, double L);

/// min((x - K)^+, L - K) on the grid.
[[nodiscard]] Payoff payoff_bull(const StateGrid& grid, double K, double L);

[[nodiscard]] Payoff payoff_custom(const StateGrid& grid, Vector values);

/// Method configuration for price_bounds.
struct OdeEuler {
  long long steps = 1000;
};
struct OdeRk4 {
  long long steps = 1000;
};
struct NisioMethod {
  int n = 10;
  long long k = 10;  ///< 0 selects exact exponentials
};
using PricingMethod = std::variant<OdeEuler, OdeRk4, NisioMethod>;

[[nodiscard]] std::string describe(const PricingMethod& method);

struct PriceBounds {
  StateGrid grid;
  Vector upper;
  Vector lower;
  PricingMethod method;
  double t;
};

/// Upper curve from the sup-envelope of `fam`, lower from the inf-envelope of
/// the same members. The direction stored in `fam` is ignored.
[[nodiscard]] PriceBounds price_bounds(const GeneratorFamily& fam, const Payoff& payoff, double t,
                                       const PricingMethod& method);

/// Single-model price e^{t q} payoff.
[[nodiscard]] Vector linear_reference(const Matrix& q_lin, const Payoff& payoff, double t);

struct ComparisonReport {
  double max_abs_diff_upper;
  double max_abs_diff_lower;
  Vector diff_upper;  // |first - second| per state
  Vector diff_lower;
  PriceBounds first;
  PriceBounds second;

  [[nodiscard]] double max_abs_diff() const {
    return max_abs_diff_upper > max_abs_diff_lower ? max_abs_diff_upper : max_abs_diff_lower;
  }
};

[[nodiscard]] ComparisonReport compare_methods(const PriceBounds& first, const PriceBounds& second);

}  // namespace qenv
