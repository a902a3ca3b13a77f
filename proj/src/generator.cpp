#include "qenv/generator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace qenv {

std::string QViolation::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case Kind::positive_diagonal:
      os << "diagonal positive at (" << row << "," << col << "): " << value;
      break;
    case Kind::negative_off_diagonal:
      os << "off-diagonal negative at (" << row << "," << col << "): " << value;
      break;
    case Kind::nonzero_row_sum:
      os << "row " << row << " sums to " << value;
      break;
  }
  return os.str();
}

std::optional<QMatrix> QMatrixCheck::value() const {
  if (!ok()) return std::nullopt;
  return QMatrix(checked);
}

QMatrixCheck validate_q_matrix(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatch("validate_q_matrix: " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + " matrix is not square");
  }
  require_finite(m, "validate_q_matrix");
  QMatrixCheck check{m, {}};
  using Kind = QViolation::Kind;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (m(i, i) > tol) check.violations.push_back({Kind::positive_diagonal, i, i, m(i, i)});
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j != i && m(i, j) < -tol) {
        check.violations.push_back({Kind::negative_off_diagonal, i, j, m(i, j)});
      }
    }
    const double row_sum = m.row(i).sum();
    if (std::abs(row_sum) > tol) check.violations.push_back({Kind::nonzero_row_sum, i, i, row_sum});
  }
  return check;
}

namespace {

std::string join_violations(const std::vector<QViolation>& violations, std::size_t limit = 8) {
  std::string out;
  for (std::size_t k = 0; k < violations.size() && k < limit; ++k) {
    if (k) out += "; ";
    out += violations[k].describe();
  }
  if (violations.size() > limit) {
    out += "; ... (" + std::to_string(violations.size() - limit) + " more)";
  }
  return out;
}

void require_grid_args(Eigen::Index d, double delta, const char* who) {
  if (d < 2) throw InvalidInput(std::string(who) + ": d must be >= 2");
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw InvalidInput(std::string(who) + ": delta must be positive");
  }
}

}  // namespace

QMatrix QMatrix::make(Matrix m, double tol) {
  auto check = validate_q_matrix(m, tol);
  if (!check.ok()) throw InvalidGenerator("not a Q-matrix: " + join_violations(check.violations));
  return QMatrix(std::move(m));
}

QMatrix build_laplacian_a(Eigen::Index d, double delta) {
  require_grid_args(d, delta, "build_laplacian_a");
  const double s = 1.0 / (delta * delta);
  Matrix a = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    if (i > 0) a(i, i - 1) = s;
    if (i + 1 < d) a(i, i + 1) = s;
    a(i, i) = (i == 0 || i + 1 == d) ? -s : -2.0 * s;
  }
  return QMatrix::make(std::move(a));
}

QMatrix build_drift_b(Eigen::Index d, double delta) {
  require_grid_args(d, delta, "build_drift_b");
  const double s = 1.0 / delta;
  Matrix b = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i + 1 < d; ++i) {
    b(i, i) = -s;
    b(i, i + 1) = s;
  }
  return QMatrix::make(std::move(b));
}

StateGrid::StateGrid(Eigen::Index d, double spacing) : dim(d), delta(spacing) {
  if (d < 1) throw InvalidInput("StateGrid: d must be >= 1");
  if (!(spacing > 0.0) || !std::isfinite(spacing)) {
    throw InvalidInput("StateGrid: delta must be positive");
  }
}

Vector StateGrid::points() const {
  Vector x(dim);
  for (Eigen::Index i = 0; i < dim; ++i) x(i) = point(i);
  return x;
}

const char* to_string(Direction d) { return d == Direction::upper ? "upper" : "lower"; }

GeneratorFamily::GeneratorFamily(std::vector<Member> members, Direction direction, double tol)
    : GeneratorFamily(std::move(members), direction, true, tol) {}

GeneratorFamily::GeneratorFamily(std::vector<Member> members, Direction direction, bool validate,
                                 double tol)
    : members_(std::move(members)), direction_(direction) {
  if (members_.empty()) throw InvalidInput("GeneratorFamily: no members");
  dim_ = members_.front().rates.rows();
  bool has_zero_penalty = false;
  for (std::size_t k = 0; k < members_.size(); ++k) {
    const auto& [rates, penalty] = members_[k];
    const std::string tag = "GeneratorFamily member " + std::to_string(k);
    if (rates.rows() != dim_ || rates.cols() != dim_ || penalty.size() != dim_) {
      throw DimensionMismatch(tag + ": dimension differs from " + std::to_string(dim_));
    }
    require_finite(rates, tag.c_str());
    require_finite(penalty, tag.c_str());
    if ((penalty.array() > 0.0).any()) throw InvalidInput(tag + ": penalty has a positive entry");
    if (penalty.isZero(0.0)) {
      has_zero_penalty = true;
    } else {
      sublinear_ = false;
    }
    if (validate) {
      auto check = validate_q_matrix(rates, tol);
      if (!check.ok()) throw InvalidGenerator(tag + ": " + join_violations(check.violations));
    }
  }
  if (!has_zero_penalty) throw InvalidInput("GeneratorFamily: no member has zero penalty");
}

GeneratorFamily GeneratorFamily::unchecked(std::vector<Member> members, Direction direction) {
  return GeneratorFamily(std::move(members), direction, false, 0.0);
}

GeneratorFamily GeneratorFamily::sublinear(const std::vector<Matrix>& rates, Direction direction) {
  std::vector<Member> members;
  members.reserve(rates.size());
  for (const auto& q : rates) members.push_back({q, Vector::Zero(q.rows())});
  return GeneratorFamily(std::move(members), direction);
}

GeneratorFamily GeneratorFamily::with_direction(Direction direction) const {
  GeneratorFamily copy = *this;
  copy.direction_ = direction;
  return copy;
}

Vector GeneratorFamily::signed_penalty(std::size_t k) const {
  const Vector& f = members_.at(k).penalty;
  return direction_ == Direction::upper ? f : Vector(-f);
}

double GeneratorFamily::max_rate_norm() const {
  double norm = 0.0;
  for (const auto& m : members_) norm = std::max(norm, op_norm_inf(m.rates));
  return norm;
}

GeneratorFamily interval_generator(const Matrix& q0, const Matrix& q, double lambda_low,
                                   double lambda_high, Direction direction) {
  if (!(lambda_low <= lambda_high)) {
    throw InvalidInput("interval_generator: lambda_low must not exceed lambda_high");
  }
  if (q0.rows() != q.rows() || q0.cols() != q.cols()) {
    throw DimensionMismatch("interval_generator: q0 and q differ in shape");
  }
  std::vector<GeneratorFamily::Member> members;
  for (double lambda : {lambda_low, lambda_high}) {
    Matrix rates = q0 + lambda * q;
    auto check = validate_q_matrix(rates);
    if (!check.ok()) {
      std::ostringstream os;
      os.precision(17);
      os << "interval_generator: q0 + " << lambda << " * q is not a Q-matrix: "
         << join_violations(check.violations);
      throw InvalidGenerator(os.str());
    }
    members.push_back({std::move(rates), Vector::Zero(q.rows())});
  }
  return GeneratorFamily(std::move(members), direction);
}

Vector apply_q_operator(const GeneratorFamily& fam, const Vector& u,
                        std::vector<std::size_t>* argopt) {
  if (u.size() != fam.dim()) {
    throw DimensionMismatch("apply_q_operator: vector has dimension " + std::to_string(u.size()) +
                            ", family has " + std::to_string(fam.dim()));
  }
  const Direction dir = fam.direction();
  Vector best = fam.member(0).rates * u + fam.signed_penalty(0);
  if (argopt) argopt->assign(static_cast<std::size_t>(fam.dim()), 0);
  for (std::size_t k = 1; k < fam.size(); ++k) {
    const Vector value = fam.member(k).rates * u + fam.signed_penalty(k);
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      if (improves(dir, value(i), best(i))) {
        best(i) = value(i);
        if (argopt) (*argopt)[static_cast<std::size_t>(i)] = k;
      }
    }
  }
  return best;
}

bool PmpReport::passed() const {
  return std::all_of(entries.begin(), entries.end(),
                     [](const Entry& e) { return e.failures == 0; });
}

namespace {

constexpr double kAxiomScales[] = {0.5, 1.0, 10.0};
constexpr double kConstants[] = {-1.0, 0.5, 1.0, 5.0, 10.0};

void record(PmpReport::Entry& entry, bool ok, const std::string& what) {
  ++entry.checks;
  if (ok) return;
  ++entry.failures;
  if (!entry.counterexample) entry.counterexample = what;
}

std::string fmt_value(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

PmpReport check_pmp(const GeneratorFamily& fam, std::size_t trials, std::uint64_t seed,
                    double tol) {
  if (trials < 1) throw InvalidInput("check_pmp: trials must be >= 1");
  const Eigen::Index d = fam.dim();
  const double norm = fam.max_rate_norm();
  auto slack = [&](double input_scale) { return tol * std::max(1.0, input_scale * norm); };

  PmpReport report;
  PmpReport::Entry max_principle{"positive maximum principle (random vectors)", 0, 0, std::nullopt};
  PmpReport::Entry unit_diag{"(Q c e_i)_i <= 0", 0, 0, std::nullopt};
  PmpReport::Entry unit_off{"(Q(-c e_j))_i <= 0, i != j", 0, 0, std::nullopt};
  PmpReport::Entry constants{"Q(c 1) = 0", 0, 0, std::nullopt};

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  std::uniform_int_distribution<Eigen::Index> pick(0, d - 1);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    Vector u(d);
    for (Eigen::Index i = 0; i < d; ++i) u(i) = coord(rng);
    // Every other trial plants a tie at the maximum.
    if (trial % 2 == 1 && d > 1) {
      Eigen::Index imax = 0;
      u.maxCoeff(&imax);
      u(pick(rng)) = u(imax);
    }
    const Vector qu = apply_q_operator(fam, u);
    const double top = u.maxCoeff();
    const double s = slack(norm_inf(u));
    for (Eigen::Index i = 0; i < d; ++i) {
      if (u(i) != top) continue;
      record(max_principle, qu(i) <= s,
             "trial " + std::to_string(trial) + ": u attains its max at " + std::to_string(i) +
                 " but (Qu)_i = " + fmt_value(qu(i)));
    }
  }

  for (double c : kAxiomScales) {
    const double s = slack(c);
    for (Eigen::Index j = 0; j < d; ++j) {
      Vector e = Vector::Zero(d);
      e(j) = c;
      const Vector up = apply_q_operator(fam, e);
      record(unit_diag, up(j) <= s,
             "(Q " + fmt_value(c) + " e_" + std::to_string(j) + ")_" + std::to_string(j) + " = " +
                 fmt_value(up(j)));
      const Vector down = apply_q_operator(fam, Vector(-e));
      for (Eigen::Index i = 0; i < d; ++i) {
        if (i == j) continue;
        record(unit_off, down(i) <= s,
               "(Q(-" + fmt_value(c) + " e_" + std::to_string(j) + "))_" + std::to_string(i) +
                   " = " + fmt_value(down(i)));
      }
    }
  }

  for (double c : kConstants) {
    const Vector qc = apply_q_operator(fam, Vector::Constant(d, c));
    const double worst = norm_inf(qc);
    record(constants, worst <= slack(std::abs(c)),
           "|Q(" + fmt_value(c) + " 1)|_inf = " + fmt_value(worst));
  }

  report.entries = {std::move(max_principle), std::move(unit_diag), std::move(unit_off),
                    std::move(constants)};
  return report;
}

Matrix read_matrix(std::istream& in) {
  long long d = 0;
  if (!(in >> d) || d < 1) throw InvalidInput("read_matrix: expected a positive dimension");
  Matrix m(d, d);
  for (long long i = 0; i < d; ++i) {
    for (long long j = 0; j < d; ++j) {
      if (!(in >> m(i, j))) {
        throw InvalidInput("read_matrix: missing or malformed entry (" + std::to_string(i) + "," +
                           std::to_string(j) + ")");
      }
    }
  }
  std::string extra;
  if (in >> extra) throw InvalidInput("read_matrix: trailing content '" + extra + "'");
  require_finite(m, "read_matrix");
  return m;
}

Matrix read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open matrix file " + path);
  return read_matrix(in);
}

void write_matrix(std::ostream& out, const Matrix& m) {
  const auto old = out.precision(17);
  out << m.rows() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
    out << '\n';
  }
  out.precision(old);
}

Vector read_vector(std::istream& in) {
  long long d = 0;
  if (!(in >> d) || d < 1) throw InvalidInput("read_vector: expected a positive dimension");
  Vector v(d);
  for (long long i = 0; i < d; ++i) {
    if (!(in >> v(i))) {
      throw InvalidInput("read_vector: missing or malformed entry " + std::to_string(i));
    }
  }
  std::string extra;
  if (in >> extra) throw InvalidInput("read_vector: trailing content '" + extra + "'");
  require_finite(v, "read_vector");
  return v;
}

Vector read_vector_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open vector file " + path);
  return read_vector(in);
}

}  // namespace qenv
