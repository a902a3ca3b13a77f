#pragma once

#include "qenv/linalg.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qenv {

/// A member of the family violates the rate-matrix conditions.
class InvalidGenerator : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

struct QViolation {
  enum class Kind { positive_diagonal, negative_off_diagonal, nonzero_row_sum };
  Kind kind;
  Eigen::Index row;
  Eigen::Index col;  // equals row for diagonal and row-sum violations
  double value;

  [[nodiscard]] std::string describe() const;
};

struct QMatrixCheck;

/// A validated rate matrix: nonpositive diagonal, nonnegative off-diagonal
/// entries and zero row sums.
class QMatrix {
 public:
  /// Validates and throws InvalidGenerator listing every violation.
  static QMatrix make(Matrix m, double tol = kDefaultTolerances.q_matrix);

  [[nodiscard]] const Matrix& matrix() const { return m_; }
  [[nodiscard]] Eigen::Index dim() const { return m_.rows(); }

 private:
  explicit QMatrix(Matrix m) : m_(std::move(m)) {}
  friend struct QMatrixCheck;

  Matrix m_;
};

struct QMatrixCheck {
  Matrix checked;
  std::vector<QViolation> violations;

  [[nodiscard]] bool ok() const { return violations.empty(); }
  /// The validated matrix, or nullopt when any violation was found.
  [[nodiscard]] std::optional<QMatrix> value() const;
};

/// Checks the rate-matrix conditions within `tol`. A non-square input throws
/// DimensionMismatch; every other failure lands in the returned violations.
[[nodiscard]] QMatrixCheck validate_q_matrix(const Matrix& m, double tol = kDefaultTolerances.q_matrix);

/// Second-difference matrix with reflecting ends, scaled by 1/delta^2.
[[nodiscard]] QMatrix build_laplacian_a(Eigen::Index d, double delta);

/// Forward first-difference matrix scaled by 1/delta, last row zero.
[[nodiscard]] QMatrix build_drift_b(Eigen::Index d, double delta);

/// Uniform state grid x_i = i * delta, i = 0..d-1.
struct StateGrid {
  Eigen::Index dim;
  double delta;

  StateGrid(Eigen::Index d, double spacing);
  [[nodiscard]] double point(Eigen::Index i) const { return static_cast<double>(i) * delta; }
  [[nodiscard]] Vector points() const;
  friend bool operator==(const StateGrid&, const StateGrid&) = default;
};

enum class Direction { upper, lower };

[[nodiscard]] const char* to_string(Direction d);

/// Finite dual representation of a convex Q-operator:
///   Q u = max_k (q_k u + f_k)          (upper)
///   Q u = min_k (q_k u - f_k) = -Q(-u) (lower)
/// with penalties f_k <= 0 and at least one f_k identically zero.
class GeneratorFamily {
 public:
  struct Member {
    Matrix rates;
    Vector penalty;
  };

  /// Validates every member as a rate matrix.
  GeneratorFamily(std::vector<Member> members, Direction direction = Direction::upper,
                  double tol = kDefaultTolerances.q_matrix);

  /// Skips the rate-matrix validation of members; the structural checks on
  /// dimensions and penalties still apply. Used to probe broken operators.
  static GeneratorFamily unchecked(std::vector<Member> members,
                                   Direction direction = Direction::upper);

  /// Sublinear family with all penalties zero.
  static GeneratorFamily sublinear(const std::vector<Matrix>& rates,
                                   Direction direction = Direction::upper);

  [[nodiscard]] Eigen::Index dim() const { return dim_; }
  [[nodiscard]] std::size_t size() const { return members_.size(); }
  [[nodiscard]] const Member& member(std::size_t k) const { return members_.at(k); }
  [[nodiscard]] const std::vector<Member>& members() const { return members_; }
  [[nodiscard]] Direction direction() const { return direction_; }
  [[nodiscard]] bool is_sublinear() const { return sublinear_; }

  /// Same members, opposite envelope direction.
  [[nodiscard]] GeneratorFamily with_direction(Direction direction) const;

  /// Penalty entering the componentwise optimum for the current direction
  /// (f_k for upper, -f_k for lower).
  [[nodiscard]] Vector signed_penalty(std::size_t k) const;

  /// Largest op_norm_inf over the member rate matrices.
  [[nodiscard]] double max_rate_norm() const;

 private:
  GeneratorFamily(std::vector<Member> members, Direction direction, bool validate, double tol);

  std::vector<Member> members_;
  Direction direction_;
  Eigen::Index dim_ = 0;
  bool sublinear_ = true;
};

/// Is `candidate` strictly preferred over `incumbent` for this direction?
[[nodiscard]] inline bool improves(Direction dir, double candidate, double incumbent) {
  return dir == Direction::upper ? candidate > incumbent : candidate < incumbent;
}

/// Two-member family {q0 + lambda_low q, q0 + lambda_high q} with zero
/// penalties. Throws InvalidGenerator when either endpoint fails validation.
[[nodiscard]] GeneratorFamily interval_generator(const Matrix& q0, const Matrix& q, double lambda_low,
                                                 double lambda_high,
                                                 Direction direction = Direction::upper);

/// Componentwise optimum over members. When `argopt` is non-null it receives,
/// per component, the lowest member index attaining the optimum.
[[nodiscard]] Vector apply_q_operator(const GeneratorFamily& fam, const Vector& u,
                                      std::vector<std::size_t>* argopt = nullptr);

struct PmpReport {
  struct Entry {
    std::string name;
    std::size_t checks = 0;
    std::size_t failures = 0;
    std::optional<std::string> counterexample;
  };
  std::vector<Entry> entries;

  [[nodiscard]] bool passed() const;
};

/// Randomized positive-maximum-principle check plus the sign axioms of a
/// Q-operator on scaled unit vectors and constants. Deterministic in `seed`.
/// The slack is `tol` times max(1, |input| * largest member norm).
[[nodiscard]] PmpReport check_pmp(const GeneratorFamily& fam, std::size_t trials,
                                  std::uint64_t seed, double tol = kDefaultTolerances.q_matrix);

// Text format: first line d, then d lines of d whitespace-separated values.
[[nodiscard]] Matrix read_matrix(std::istream& in);
[[nodiscard]] Matrix read_matrix_file(const std::string& path);
void write_matrix(std::ostream& out, const Matrix& m);

// Text format: first line d, then d whitespace-separated values.
[[nodiscard]] Vector read_vector(std::istream& in);
[[nodiscard]] Vector read_vector_file(const std::string& path);

}  // namespace qenv
