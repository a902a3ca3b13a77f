#pragma once

#include "qenv/generator.hpp"
#include "qenv/linalg.hpp"

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace qenv {

/// The integration produced NaN/Inf; `step()` names the first bad step.
class IntegrationDiverged : public std::runtime_error {
 public:
  IntegrationDiverged(const std::string& what, long long step)
      : std::runtime_error(what), step_(step) {}
  [[nodiscard]] long long step() const { return step_; }

 private:
  long long step_;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> values;

  [[nodiscard]] const Vector& final_value() const { return values.back(); }
};

struct OdeOptions {
  /// Number of evenly spaced snapshots kept (endpoints always included);
  /// 0 keeps every step.
  std::size_t snapshots = 101;
};

/// Explicit Euler for u' = Q u with Q the family's operator.
[[nodiscard]] Trajectory solve_euler(const GeneratorFamily& fam, const Vector& u0, double t,
                                     long long steps, OdeOptions options = {});

/// Classical four-stage Runge-Kutta for the same equation.
[[nodiscard]] Trajectory solve_rk4(const GeneratorFamily& fam, const Vector& u0, double t,
                                   long long steps, OdeOptions options = {});

/// (t/steps) * max_k op_norm_inf(q_k). Above 1 the Euler map I + hQ is no
/// longer monotone.
[[nodiscard]] double euler_step_ratio(const GeneratorFamily& fam, double t, long long steps);

}  // namespace qenv
