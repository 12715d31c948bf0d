#pragma once

// Quaternions in the 2x2 complex realization q = q_r + i (q . sigma), Pauli and
// 5D Dirac matrices, and antiunitary quaternionic structures.

#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace halfdirac {

template <typename Scalar>
using Matrix2c = Eigen::Matrix<std::complex<Scalar>, 2, 2>;
template <typename Scalar>
using Matrix4c = Eigen::Matrix<std::complex<Scalar>, 4, 4>;

/// The Pauli matrices sigma_1, sigma_2, sigma_3.
template <typename Scalar = double>
std::array<Matrix2c<Scalar>, 3> pauli() {
  using C = std::complex<Scalar>;
  const C i(0, 1);
  Matrix2c<Scalar> s1, s2, s3;
  s1 << C(0), C(1), C(1), C(0);
  s2 << C(0), -i, i, C(0);
  s3 << C(1), C(0), C(0), C(-1);
  return {s1, s2, s3};
}

/// Quaternion q = q_r + i q.sigma with real part q_r and vector part q.
///
/// The matrix realization is ((q_r + i q3, q2 + i q1), (-q2 + i q1, q_r - i q3)),
/// so conjugation is the Hermitian adjoint and |q|^2 = det(matrix).
template <typename Scalar = double>
class Quaternion {
 public:
  using Real = Scalar;
  using Complex = std::complex<Scalar>;
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
  using Vector4 = Eigen::Matrix<Scalar, 4, 1>;
  using Matrix2 = Matrix2c<Scalar>;

  Quaternion() : r_(0), v_(Vector3::Zero()) {}
  Quaternion(Scalar r, const Vector3& v) : r_(r), v_(v) {}
  Quaternion(Scalar r, Scalar v1, Scalar v2, Scalar v3) : r_(r), v_(v1, v2, v3) {}

  static Quaternion identity() { return Quaternion(1, Vector3::Zero()); }
  static Quaternion zero() { return Quaternion(); }

  /// From the (q_r, b, c, d) coordinates of q = q_r + bI + cJ + dK, whose
  /// vector part is q = (-d, -c, b).
  static Quaternion from_ijk(Scalar r, Scalar b, Scalar c, Scalar d) {
    return Quaternion(r, Vector3(-d, -c, b));
  }
  static Quaternion unit_i() { return from_ijk(0, 1, 0, 0); }
  static Quaternion unit_j() { return from_ijk(0, 0, 1, 0); }
  static Quaternion unit_k() { return from_ijk(0, 0, 0, 1); }

  /// Inverse of matrix(); the input is projected onto the quaternion subspace.
  static Quaternion from_matrix(const Matrix2& m) {
    const Scalar r = (m(0, 0) + m(1, 1)).real() / 2;
    const Scalar v3 = (m(0, 0) - m(1, 1)).imag() / 2;
    const Scalar v1 = (m(0, 1) + m(1, 0)).imag() / 2;
    const Scalar v2 = (m(0, 1) - m(1, 0)).real() / 2;
    return Quaternion(r, Vector3(v1, v2, v3));
  }

  /// Coefficients (q_r, q1, q2, q3).
  static Quaternion from_coeffs(const Vector4& c) {
    return Quaternion(c(0), Vector3(c(1), c(2), c(3)));
  }
  Vector4 coeffs() const { return Vector4(r_, v_(0), v_(1), v_(2)); }

  Scalar real() const { return r_; }
  const Vector3& vec() const { return v_; }

  Matrix2 matrix() const {
    const Complex i(0, 1);
    Matrix2 m;
    m(0, 0) = Complex(r_, v_(2));
    m(0, 1) = v_(1) + i * v_(0);
    m(1, 0) = -v_(1) + i * v_(0);
    m(1, 1) = Complex(r_, -v_(2));
    return m;
  }

  /// The traceless Hermitian part q.sigma (without the factor i).
  Matrix2 vec_dot_sigma() const {
    const auto s = pauli<Scalar>();
    return v_(0) * s[0] + v_(1) * s[1] + v_(2) * s[2];
  }

  Quaternion conjugate() const { return Quaternion(r_, -v_); }
  Scalar squared_norm() const { return r_ * r_ + v_.squaredNorm(); }
  Scalar norm() const { return std::sqrt(squared_norm()); }
  Quaternion normalized() const { return *this * (Scalar(1) / norm()); }
  Quaternion inverse() const { return conjugate() * (Scalar(1) / squared_norm()); }

  Quaternion operator*(const Quaternion& b) const {
    return Quaternion(r_ * b.r_ - v_.dot(b.v_),
                      r_ * b.v_ + b.r_ * v_ - v_.cross(b.v_));
  }
  Quaternion operator*(Scalar s) const { return Quaternion(r_ * s, v_ * s); }
  Quaternion operator+(const Quaternion& b) const { return Quaternion(r_ + b.r_, v_ + b.v_); }
  Quaternion operator-(const Quaternion& b) const { return Quaternion(r_ - b.r_, v_ - b.v_); }
  Quaternion operator-() const { return Quaternion(-r_, -v_); }

  bool isApprox(const Quaternion& b, Scalar tol) const {
    return (coeffs() - b.coeffs()).cwiseAbs().maxCoeff() <= tol;
  }

 private:
  Scalar r_;
  Vector3 v_;
};

template <typename Scalar>
Quaternion<Scalar> operator*(Scalar s, const Quaternion<Scalar>& q) {
  return q * s;
}

using Quaterniond = Quaternion<double>;

template <typename Scalar>
Quaternion<Scalar> quat_mul(const Quaternion<Scalar>& a, const Quaternion<Scalar>& b) {
  return a * b;
}

/// Boundary-parallel momentum (p1, p2, p3, p4) packaged as the quaternion with
/// matrix ((p1 + i p2, -p3 + i p4), (p3 + i p4, p1 - i p2)); q_r = p1 and
/// q = (p4, -p3, p2).
template <typename Scalar>
Quaternion<Scalar> momentum_to_quaternion(const Eigen::Matrix<Scalar, 4, 1>& p) {
  return Quaternion<Scalar>(p(0), p(3), -p(2), p(1));
}

template <typename Scalar>
Eigen::Matrix<Scalar, 4, 1> quaternion_to_momentum(const Quaternion<Scalar>& q) {
  const auto& v = q.vec();
  return Eigen::Matrix<Scalar, 4, 1>(q.real(), v(2), -v(1), v(0));
}

/// Antiunitary map v -> U conj(v), stored as the unitary U.
template <typename Scalar, int N>
struct AntiUnitary {
  using MatrixType = Eigen::Matrix<std::complex<Scalar>, N, N>;
  MatrixType unitary;

  template <typename Derived>
  auto apply(const Eigen::MatrixBase<Derived>& v) const {
    return (unitary * v.conjugate()).eval();
  }
  /// Theta^2, which is the linear map U conj(U).
  MatrixType square() const { return unitary * unitary.conjugate(); }
  /// Theta X Theta^{-1} = U conj(X) U^dagger.
  MatrixType conjugate_by(const MatrixType& x) const {
    return unitary * x.conjugate() * unitary.adjoint();
  }
};

template <typename Scalar, int Ra, int Ca, int Rb, int Cb>
Eigen::Matrix<std::complex<Scalar>, Ra * Rb, Ca * Cb> kron(
    const Eigen::Matrix<std::complex<Scalar>, Ra, Ca>& a,
    const Eigen::Matrix<std::complex<Scalar>, Rb, Cb>& b) {
  Eigen::Matrix<std::complex<Scalar>, Ra * Rb, Ca * Cb> out;
  for (int i = 0; i < Ra; ++i)
    for (int j = 0; j < Ca; ++j) out.block(i * Rb, j * Cb, Rb, Cb) = a(i, j) * b;
  return out;
}

/// Five Hermitian 4x4 generators of Cl(0,5) together with the quaternionic
/// structure that commutes with all of them.
template <typename Scalar = double>
struct DiracSet {
  std::array<Matrix4c<Scalar>, 5> gamma;
  AntiUnitary<Scalar, 4> theta;
};

/// gamma_1 = s1 x 1, gamma_2 = s2 x s3, gamma_3 = -s2 x s2, gamma_4 = s2 x s1,
/// gamma_5 = s3 x 1, Theta = (1 x -i s2) o conj.
template <typename Scalar = double>
DiracSet<Scalar> dirac_set() {
  using C = std::complex<Scalar>;
  const auto s = pauli<Scalar>();
  const Matrix2c<Scalar> one = Matrix2c<Scalar>::Identity();
  DiracSet<Scalar> d;
  d.gamma[0] = kron(s[0], one);
  d.gamma[1] = kron(s[1], s[2]);
  d.gamma[2] = -kron(s[1], s[1]);
  d.gamma[3] = kron(s[1], s[0]);
  d.gamma[4] = kron(s[2], one);
  d.theta.unitary = kron(one, Matrix2c<Scalar>(C(0, -1) * s[1]));
  return d;
}

/// Quaternionic structure on C^2: Theta = -i sigma_2 o conj.
template <typename Scalar = double>
AntiUnitary<Scalar, 2> quaternionic_structure() {
  return {Matrix2c<Scalar>(std::complex<Scalar>(0, -1) * pauli<Scalar>()[1])};
}

/// The momentum-space symbol Q(p) = sum_j p_j gamma_j.
template <typename Scalar>
Matrix4c<Scalar> weyl_symbol(const DiracSet<Scalar>& d, const Eigen::Matrix<Scalar, 5, 1>& p) {
  Matrix4c<Scalar> q = Matrix4c<Scalar>::Zero();
  for (int j = 0; j < 5; ++j) q += p(j) * d.gamma[j];
  return q;
}

struct CliffordReport {
  struct Pair {
    int i = 0;
    int j = 0;
    double deviation = 0;  // max-norm of {g_i, g_j} - 2 delta_ij
    bool pass = false;
  };
  std::vector<Pair> anticommutators;  // 15 pairs, i <= j
  double chirality_deviation = 0;     // ||g1 g2 g3 g4 g5 + 1||_max
  bool chirality_pass = false;
  std::array<double, 5> theta_commutator{};  // ||Theta g_i - g_i Theta||_max
  bool theta_commutes = false;
  double theta_square_deviation = 0;  // ||Theta^2 + 1||_max
  bool theta_squares_to_minus_one = false;

  bool all_pass() const {
    for (const auto& p : anticommutators)
      if (!p.pass) return false;
    return chirality_pass && theta_commutes && theta_squares_to_minus_one;
  }
};

template <typename Scalar>
CliffordReport clifford_check(const DiracSet<Scalar>& d, double tol = 0.0) {
  using M = Matrix4c<Scalar>;
  const M id = M::Identity();
  CliffordReport rep;
  for (int i = 0; i < 5; ++i) {
    for (int j = i; j < 5; ++j) {
      const M ac = d.gamma[i] * d.gamma[j] + d.gamma[j] * d.gamma[i];
      const M expected = (i == j ? Scalar(2) : Scalar(0)) * id;
      CliffordReport::Pair p;
      p.i = i;
      p.j = j;
      p.deviation = static_cast<double>((ac - expected).cwiseAbs().maxCoeff());
      p.pass = p.deviation <= tol;
      rep.anticommutators.push_back(p);
    }
  }
  const M chi = d.gamma[0] * d.gamma[1] * d.gamma[2] * d.gamma[3] * d.gamma[4];
  rep.chirality_deviation = static_cast<double>((chi + id).cwiseAbs().maxCoeff());
  rep.chirality_pass = rep.chirality_deviation <= tol;

  rep.theta_commutes = true;
  for (int i = 0; i < 5; ++i) {
    rep.theta_commutator[i] = static_cast<double>(
        (d.theta.conjugate_by(d.gamma[i]) - d.gamma[i]).cwiseAbs().maxCoeff());
    rep.theta_commutes = rep.theta_commutes && rep.theta_commutator[i] <= tol;
  }
  rep.theta_square_deviation =
      static_cast<double>((d.theta.square() + id).cwiseAbs().maxCoeff());
  rep.theta_squares_to_minus_one = rep.theta_square_deviation <= tol;
  return rep;
}

}  // namespace halfdirac
