#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace qenv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when an input contains NaN/Inf or otherwise violates a precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical tolerances shared by validators and self-checks. Tests may pass
/// a modified copy wherever a function accepts one.
struct Tolerances {
  double stochastic_row_sum = 1e-10;
  double semigroup = 1e-9;
  double q_matrix = 1e-12;
};

inline constexpr Tolerances kDefaultTolerances{};

/// The flow map u -> linear_part * u + offset of u' = q u + f over a step h.
struct AffineFlow {
  Matrix linear_part;
  Vector offset;

  [[nodiscard]] Vector apply(const Vector& u) const { return linear_part * u + offset; }
};

void require_finite(const Matrix& a, const char* what);
void require_finite(const Vector& v, const char* what);

/// e^{t a} by scaling and squaring with a diagonal Pade approximant whose
/// degree is chosen from the 1-norm of t a.
[[nodiscard]] Matrix mat_exp(const Matrix& a, double t);

/// (I + (h/k) a)^k by binary powering.
[[nodiscard]] Matrix euler_product_exp(const Matrix& a, double h, long long k);

/// Exact flow of u' = q u + f over [0, h], read off the exponential of the
/// augmented block matrix [[q, f], [0, 0]].
[[nodiscard]] AffineFlow affine_flow(const Matrix& q, const Vector& f, double h);

/// Same block construction, but with the exponential replaced by the
/// k-factor Euler product.
[[nodiscard]] AffineFlow affine_flow_euler(const Matrix& q, const Vector& f, double h, long long k);

/// Operator norm induced by the sup-norm: the largest absolute row sum.
[[nodiscard]] double op_norm_inf(const Matrix& a);

[[nodiscard]] inline double norm_inf(const Vector& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

}  // namespace qenv
