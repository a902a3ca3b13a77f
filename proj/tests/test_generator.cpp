#include "qenv/generator.hpp"

#include "support.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace qenv;
using namespace qenv::testing;

TEST_CASE("validate_q_matrix") {
  SUBCASE("accepts a two-state rate matrix") {
    CHECK(validate_q_matrix(two_state(1.0, 1.0)).ok());
    CHECK(validate_q_matrix(two_state(1.0, 1.0)).value().has_value());
  }
  SUBCASE("reports each violated condition") {
    Matrix m(2, 2);
    m << 1, -1, 0, 0;
    const auto check = validate_q_matrix(m);
    REQUIRE(check.violations.size() == 2);
    CHECK(check.violations[0].kind == QViolation::Kind::positive_diagonal);
    CHECK(check.violations[0].row == 0);
    CHECK(check.violations[0].value == 1.0);
    CHECK(check.violations[1].kind == QViolation::Kind::negative_off_diagonal);
    CHECK(check.violations[1].row == 0);
    CHECK(check.violations[1].col == 1);
    CHECK(check.violations[0].describe().find("diagonal positive at (0,0)") != std::string::npos);
    CHECK_FALSE(check.value().has_value());
  }
  SUBCASE("row sums") {
    Matrix m(2, 2);
    m << -1, 0.5, 0, 0;
    const auto check = validate_q_matrix(m);
    REQUIRE(check.violations.size() == 1);
    CHECK(check.violations[0].kind == QViolation::Kind::nonzero_row_sum);
  }
  SUBCASE("non-square") {
    CHECK_THROWS_AS((void)validate_q_matrix(Matrix::Zero(2, 3)), DimensionMismatch);
  }
  SUBCASE("QMatrix::make throws with the report") {
    Matrix m(2, 2);
    m << 1, -1, 0, 0;
    CHECK_THROWS_AS((void)QMatrix::make(m), InvalidGenerator);
  }
}

TEST_CASE("discretization matrices") {
  SUBCASE("second difference, d = 3") {
    Matrix expected(3, 3);
    expected << -1, 1, 0, 1, -2, 1, 0, 1, -1;
    CHECK(build_laplacian_a(3, 1.0).matrix() == expected);
  }
  SUBCASE("second difference, d = 2, delta = 0.5") {
    CHECK(build_laplacian_a(2, 0.5).matrix() == 4.0 * two_state(1.0, 1.0));
  }
  SUBCASE("desk-scale matrix is a valid rate matrix with norm 4/delta^2") {
    const Matrix a = build_laplacian_a(101, 0.1).matrix();
    CHECK(validate_q_matrix(a).ok());
    CHECK(a.rowwise().sum().cwiseAbs().maxCoeff() == 0.0);
    CHECK(op_norm_inf(a) == doctest::Approx(400.0).epsilon(1e-12));
  }
  SUBCASE("first difference, d = 3") {
    Matrix expected(3, 3);
    expected << -1, 1, 0, 0, -1, 1, 0, 0, 0;
    CHECK(build_drift_b(3, 1.0).matrix() == expected);
  }
  SUBCASE("first difference, d = 2, delta = 0.1") {
    Matrix expected(2, 2);
    expected << -10, 10, 0, 0;
    CHECK(max_abs(build_drift_b(2, 0.1).matrix() - expected) < 1e-14);
    CHECK(validate_q_matrix(build_drift_b(101, 0.1).matrix()).ok());
  }
  CHECK_THROWS_AS((void)build_laplacian_a(1, 1.0), InvalidInput);
  CHECK_THROWS_AS((void)build_drift_b(3, 0.0), InvalidInput);
}

TEST_CASE("state grid is zero-based") {
  const StateGrid grid(101, 0.1);
  CHECK(grid.point(0) == 0.0);
  CHECK(grid.point(100) == doctest::Approx(10.0));
  const Vector x = grid.points();
  for (Eigen::Index i = 1; i < x.size(); ++i) CHECK(x(i) > x(i - 1));
}

TEST_CASE("interval_generator") {
  const Matrix a = build_laplacian_a(101, 0.1).matrix();
  const Matrix b = build_drift_b(101, 0.1).matrix();

  SUBCASE("drift uncertainty") {
    const auto fam = interval_generator(a, b, -1.0, 1.0);
    REQUIRE(fam.size() == 2);
    CHECK(fam.is_sublinear());
    CHECK(max_abs(fam.member(0).rates - (a - b)) == 0.0);
    CHECK(max_abs(fam.member(1).rates - (a + b)) == 0.0);
    for (const auto& m : fam.members()) CHECK(validate_q_matrix(m.rates).ok());
  }
  SUBCASE("volatility uncertainty") {
    const auto fam = interval_generator(Matrix::Zero(101, 101), a, 0.5, 1.5);
    CHECK(max_abs(fam.member(0).rates - 0.5 * a) == 0.0);
    CHECK(max_abs(fam.member(1).rates - 1.5 * a) == 0.0);
  }
  SUBCASE("zero-width interval repeats one generator") {
    const auto fam = interval_generator(a, b, 1.0, 1.0);
    CHECK(fam.member(0).rates == fam.member(1).rates);
  }
  SUBCASE("incompatible interval") {
    // Large negative drift makes the super-diagonal of a + lambda b negative.
    CHECK_THROWS_AS((void)interval_generator(a, b, -20.0, 1.0), InvalidGenerator);
    CHECK_THROWS_AS((void)interval_generator(a, b, 1.0, -1.0), InvalidInput);
  }
  SUBCASE("random members always validate") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
      const auto fam = random_interval_family(rng, 2 + trial % 10);
      for (const auto& m : fam.members()) CHECK(validate_q_matrix(m.rates, 1e-12).ok());
    }
  }
}

TEST_CASE("GeneratorFamily structural checks") {
  const Matrix q = two_state(1.0, 2.0);
  using Member = GeneratorFamily::Member;
  CHECK_THROWS_AS(GeneratorFamily(std::vector<Member>{}), InvalidInput);
  Vector positive(2);
  positive << 0.1, 0.0;
  CHECK_THROWS_AS(GeneratorFamily({{q, Vector::Zero(2)}, {q, positive}}), InvalidInput);
  CHECK_THROWS_AS(GeneratorFamily({{q, Vector::Constant(2, -1.0)}}), InvalidInput);
  CHECK_THROWS_AS(GeneratorFamily({{q, Vector::Zero(2)}, {Matrix::Zero(3, 3), Vector::Zero(3)}}),
                  DimensionMismatch);
  const GeneratorFamily fam({{q, Vector::Zero(2)}, {q, Vector::Constant(2, -0.5)}});
  CHECK_FALSE(fam.is_sublinear());
  CHECK(fam.signed_penalty(1)(0) == -0.5);
  CHECK(fam.with_direction(Direction::lower).signed_penalty(1)(0) == 0.5);
}

TEST_CASE("apply_q_operator") {
  Matrix b(2, 2);
  b << -1, 1, 0, 0;

  SUBCASE("enumerated two-member example") {
    const auto fam = GeneratorFamily::unchecked({{-b, Vector::Zero(2)}, {b, Vector::Zero(2)}});
    Vector u(2);
    u << 0, 1;
    std::vector<std::size_t> arg;
    const Vector qu = apply_q_operator(fam, u, &arg);
    CHECK(qu(0) == 1.0);
    CHECK(qu(1) == 0.0);
    CHECK(arg[0] == 1);
    CHECK(arg[1] == 0);  // tie between members -> lowest index
  }

  std::mt19937_64 rng(7);
  SUBCASE("constants are annihilated, translations ignored") {
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::Index d = 2 + trial % 6;
      const auto fam = random_family(rng, d, 3, trial % 2 == 0);
      CHECK(max_abs(apply_q_operator(fam, Vector::Constant(d, 3.7))) < 1e-14);
      const Vector u = random_vector(rng, d);
      CHECK(max_abs(apply_q_operator(fam, Vector(u.array() + 2.5)) - apply_q_operator(fam, u)) <
            1e-13);
    }
  }
  SUBCASE("convex in the upper direction") {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
      const Eigen::Index d = 2 + trial % 6;
      const auto fam = random_family(rng, d, 3, trial % 2 == 0);
      const Vector u = random_vector(rng, d), v = random_vector(rng, d);
      const double l = unit(rng);
      const Vector lhs = apply_q_operator(fam, Vector(l * u + (1 - l) * v));
      const Vector rhs = l * apply_q_operator(fam, u) + (1 - l) * apply_q_operator(fam, v);
      CHECK((lhs - rhs).maxCoeff() <= 1e-12);
    }
  }
  SUBCASE("single member is an affine map") {
    for (int trial = 0; trial < 50; ++trial) {
      const Matrix q = random_q(rng, 4);
      const Vector u = random_vector(rng, 4);
      const GeneratorFamily fam({{q, Vector::Zero(4)}});
      CHECK(max_abs(apply_q_operator(fam, u) - q * u) == 0.0);
    }
  }
  SUBCASE("positively homogeneous when sublinear") {
    for (int trial = 0; trial < 100; ++trial) {
      const auto fam = random_family(rng, 5, 3, false);
      const Vector u = random_vector(rng, 5);
      const double c = 0.25 * (trial % 9);
      CHECK(max_abs(apply_q_operator(fam, Vector(c * u)) - c * apply_q_operator(fam, u)) <= 1e-12);
    }
  }
  SUBCASE("reported members attain the optimum") {
    for (int trial = 0; trial < 100; ++trial) {
      const auto dir = trial % 2 ? Direction::upper : Direction::lower;
      const auto fam = random_family(rng, 5, 4, true, 1.0, dir);
      const Vector u = random_vector(rng, 5);
      std::vector<std::size_t> arg;
      const Vector qu = apply_q_operator(fam, u, &arg);
      for (Eigen::Index i = 0; i < 5; ++i) {
        const std::size_t k = arg[static_cast<std::size_t>(i)];
        const double value = fam.member(k).rates.row(i).dot(u) + fam.signed_penalty(k)(i);
        CHECK(value == qu(i));
      }
    }
  }
  SUBCASE("lower direction is the conjugate -Q(-u)") {
    for (int trial = 0; trial < 50; ++trial) {
      const auto fam = random_family(rng, 4, 3, true);
      const Vector u = random_vector(rng, 4);
      const Vector lower = apply_q_operator(fam.with_direction(Direction::lower), u);
      CHECK(max_abs(lower + apply_q_operator(fam, Vector(-u))) < 1e-14);
    }
  }
  SUBCASE("dimension mismatch") {
    const auto fam = random_family(rng, 3, 2, false);
    CHECK_THROWS_AS((void)apply_q_operator(fam, Vector::Zero(4)), DimensionMismatch);
  }
}

TEST_CASE("check_pmp") {
  SUBCASE("interval families pass") {
    const Matrix a = build_laplacian_a(21, 0.5).matrix();
    const Matrix b = build_drift_b(21, 0.5).matrix();
    const auto report = check_pmp(interval_generator(a, b, -1.0, 1.0), 500, 1);
    CHECK(report.passed());
    REQUIRE(report.entries.size() == 4);
    CHECK(report.entries[3].name == "Q(c 1) = 0");
    CHECK(report.entries[3].checks == 5);
    CHECK(report.entries[3].failures == 0);
  }
  SUBCASE("a non-rate-matrix member is caught") {
    Matrix bad(2, 2);
    bad << 1, -1, 0, 0;  // pushes mass up at its own maximum
    const auto fam = GeneratorFamily::unchecked({{bad, Vector::Zero(2)}});
    const auto report = check_pmp(fam, 100, 1);
    CHECK_FALSE(report.passed());
    CHECK(report.entries[1].failures > 0);
    REQUIRE(report.entries[1].counterexample.has_value());
    CHECK(report.entries[1].counterexample->find("e_0") != std::string::npos);
  }
  SUBCASE("deterministic in the seed") {
    std::mt19937_64 rng(8);
    const auto fam = random_family(rng, 6, 3, true);
    const auto r1 = check_pmp(fam, 200, 99);
    const auto r2 = check_pmp(fam, 200, 99);
    for (std::size_t e = 0; e < r1.entries.size(); ++e) {
      CHECK(r1.entries[e].checks == r2.entries[e].checks);
      CHECK(r1.entries[e].failures == r2.entries[e].failures);
    }
  }
}

TEST_CASE("matrix and vector text files") {
  const Matrix a = build_laplacian_a(4, 0.3).matrix();
  std::stringstream ss;
  write_matrix(ss, a);
  CHECK(read_matrix(ss) == a);

  std::istringstream missing("2\n1 2\n3\n");
  CHECK_THROWS_AS((void)read_matrix(missing), InvalidInput);
  std::istringstream trailing("1\n0\n7\n");
  CHECK_THROWS_AS((void)read_matrix(trailing), InvalidInput);

  std::istringstream vec("3\n0.5 1 -2\n");
  const Vector v = read_vector(vec);
  CHECK(v.size() == 3);
  CHECK(v(2) == -2.0);
}
