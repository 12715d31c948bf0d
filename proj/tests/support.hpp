#pragma once

#include <random>

#include <Eigen/Dense>

#include "halfdirac/algebra.hpp"

namespace halfdirac::test {

inline std::mt19937& rng() {
  static std::mt19937 g(20240611);
  return g;
}

inline double normal() {
  static std::normal_distribution<double> d;
  return d(rng());
}

inline double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng()); }

inline Quaterniond random_unit_quaternion() {
  return Quaterniond(normal(), normal(), normal(), normal()).normalized();
}

inline Eigen::MatrixXcd random_complex(int rows, int cols) {
  Eigen::MatrixXcd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = {normal(), normal()};
  return m;
}

inline Eigen::MatrixXcd random_hermitian(int n) {
  const Eigen::MatrixXcd a = random_complex(n, n);
  return (a + a.adjoint()) / 2;
}

inline Eigen::MatrixXcd random_unitary(int n) {
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(random_complex(n, n));
  return qr.householderQ() * Eigen::MatrixXcd::Identity(n, n);
}

inline double max_abs(const Eigen::MatrixXcd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace halfdirac::test
