#include "qenv/linalg.hpp"

#include <array>
#include <cmath>
#include <string>

namespace qenv {

void require_finite(const Matrix& a, const char* what) {
  if (!a.allFinite()) throw InvalidInput(std::string(what) + ": non-finite entry");
}

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw InvalidInput(std::string(what) + ": non-finite entry");
}

namespace {

// Pade coefficients and 1-norm thresholds for degrees 3, 5, 7, 9, 13
// (Higham, "The scaling and squaring method for the matrix exponential
// revisited", 2005).
constexpr std::array<double, 4> kPade3 = {120.0, 60.0, 12.0, 1.0};
constexpr std::array<double, 6> kPade5 = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
constexpr std::array<double, 8> kPade7 = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                                          25200.0,    1512.0,    56.0,      1.0};
constexpr std::array<double, 10> kPade9 = {17643225600.0, 8821612800.0, 2075673600.0,
                                           302702400.0,   30270240.0,   2162160.0,
                                           110880.0,      3960.0,       90.0,
                                           1.0};
constexpr std::array<double, 14> kPade13 = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
    1323241920.0,        40840800.0,          960960.0,           16380.0,
    182.0,               1.0};

constexpr double kTheta3 = 1.495585217958292e-2;
constexpr double kTheta5 = 2.539398330063230e-1;
constexpr double kTheta7 = 9.504178996162932e-1;
constexpr double kTheta9 = 2.097847961257068e0;
constexpr double kTheta13 = 5.371920351148152e0;

template <std::size_t N>
Matrix pade_low_degree(const Matrix& a, const std::array<double, N>& b) {
  const Eigen::Index d = a.rows();
  const Matrix ident = Matrix::Identity(d, d);
  const Matrix a2 = a * a;
  Matrix power = ident;  // a^{2j}
  Matrix u_sum = Matrix::Zero(d, d);
  Matrix v_sum = Matrix::Zero(d, d);
  for (std::size_t j = 0; j + 1 < N; j += 2) {
    v_sum += b[j] * power;
    u_sum += b[j + 1] * power;
    power = power * a2;
  }
  const Matrix u = a * u_sum;
  return (v_sum - u).partialPivLu().solve(v_sum + u);
}

Matrix pade13(const Matrix& a) {
  const Eigen::Index d = a.rows();
  const auto& b = kPade13;
  const Matrix ident = Matrix::Identity(d, d);
  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  const Matrix u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
                         b[3] * a2 + b[1] * ident;
  const Matrix u = a * u_inner;
  const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
                   b[2] * a2 + b[0] * ident;
  return (v - u).partialPivLu().solve(v + u);
}

}  // namespace

Matrix mat_exp(const Matrix& a, double t) {
  if (a.rows() != a.cols()) throw DimensionMismatch("mat_exp: matrix is not square");
  if (!std::isfinite(t) || t < 0.0) throw InvalidInput("mat_exp: t must be finite and >= 0");
  require_finite(a, "mat_exp");

  const Matrix ta = t * a;
  const double norm1 = ta.cwiseAbs().colwise().sum().maxCoeff();
  if (ta.size() == 0) return ta;
  if (norm1 <= kTheta3) return pade_low_degree(ta, kPade3);
  if (norm1 <= kTheta5) return pade_low_degree(ta, kPade5);
  if (norm1 <= kTheta7) return pade_low_degree(ta, kPade7);
  if (norm1 <= kTheta9) return pade_low_degree(ta, kPade9);

  int squarings = 0;
  if (norm1 > kTheta13) squarings = static_cast<int>(std::ceil(std::log2(norm1 / kTheta13)));
  Matrix result = pade13(std::ldexp(1.0, -squarings) * ta);
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

Matrix euler_product_exp(const Matrix& a, double h, long long k) {
  if (a.rows() != a.cols()) throw DimensionMismatch("euler_product_exp: matrix is not square");
  if (!std::isfinite(h) || h < 0.0) throw InvalidInput("euler_product_exp: h must be >= 0");
  if (k < 1) throw InvalidInput("euler_product_exp: k must be >= 1");
  require_finite(a, "euler_product_exp");

  const Eigen::Index d = a.rows();
  Matrix base = Matrix::Identity(d, d) + (h / static_cast<double>(k)) * a;
  Matrix result = Matrix::Identity(d, d);
  bool first = true;
  for (long long e = k; e > 0; e >>= 1) {
    if (e & 1) {
      if (first) {
        result = base;
        first = false;
      } else {
        result = result * base;
      }
    }
    if (e > 1) base = base * base;
  }
  return result;
}

namespace {

Matrix augmented(const Matrix& q, const Vector& f) {
  const Eigen::Index d = q.rows();
  Matrix block = Matrix::Zero(d + 1, d + 1);
  block.topLeftCorner(d, d) = q;
  block.topRightCorner(d, 1) = f;
  return block;
}

AffineFlow split(const Matrix& block) {
  const Eigen::Index d = block.rows() - 1;
  return AffineFlow{block.topLeftCorner(d, d), block.topRightCorner(d, 1)};
}

void check_flow_inputs(const Matrix& q, const Vector& f, double h) {
  if (q.rows() != q.cols()) throw DimensionMismatch("affine_flow: matrix is not square");
  if (f.size() != q.rows()) {
    throw DimensionMismatch("affine_flow: offset has dimension " + std::to_string(f.size()) +
                            ", matrix has " + std::to_string(q.rows()));
  }
  if (!std::isfinite(h) || h < 0.0) throw InvalidInput("affine_flow: h must be >= 0");
  require_finite(q, "affine_flow");
  require_finite(f, "affine_flow");
}

}  // namespace

AffineFlow affine_flow(const Matrix& q, const Vector& f, double h) {
  check_flow_inputs(q, f, h);
  if (f.isZero(0.0)) return AffineFlow{mat_exp(q, h), Vector::Zero(q.rows())};
  return split(mat_exp(augmented(q, f), h));
}

AffineFlow affine_flow_euler(const Matrix& q, const Vector& f, double h, long long k) {
  check_flow_inputs(q, f, h);
  if (f.isZero(0.0)) return AffineFlow{euler_product_exp(q, h, k), Vector::Zero(q.rows())};
  return split(euler_product_exp(augmented(q, f), h, k));
}

double op_norm_inf(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return a.cwiseAbs().rowwise().sum().maxCoeff();
}

}  // namespace qenv
