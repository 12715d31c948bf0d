#pragma once

// Closed-form spectra of the half-line Dirac operators. These are the oracles
// every numerical solver in the toolkit is checked against.

#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "halfdirac/algebra.hpp"

namespace halfdirac {

/// Absolute tolerance for "unit" inputs and for the closed branch conditions
/// Im(omega) >= 0 and |q_r| = 1; boundary cases go to the empty branch.
inline constexpr double kExactTolerance = 1e-9;

struct Interval {
  double lo = 0;
  double hi = 0;
  bool contains(double x) const { return lo <= x && x <= hi; }
};

struct DiscreteEigenvalue {
  double value = 0;
  int multiplicity = 1;
};

/// psi(z) = boundary_value * exp(-decay_rate * z), with unit L^2 norm.
struct BoundState {
  Eigen::VectorXcd boundary_value;
  double decay_rate = 0;
  /// For the quaternionic operator: the spinor u^- with (q.sigma) u = -|q| u,
  /// unit norm, first non-negligible component real and positive.
  std::optional<Eigen::Vector2cd> spinor;

  Eigen::VectorXcd operator()(double z) const {
    return boundary_value * std::exp(-decay_rate * z);
  }
};

struct ExactSpectrum {
  double gap_edge = 0;
  std::vector<Interval> essential_bands;
  std::vector<DiscreteEigenvalue> discrete;
  std::optional<BoundState> bound_state;
};

/// Spectrum of the 2-component operator D(rho; omega) with boundary condition
/// psi(0) ~ (1, omega). Eigenvalue rho Re(omega) exists iff Im(omega) < 0.
ExactSpectrum u1_spectrum(double rho, std::complex<double> omega);

/// Spectrum of the quaternionic operator with boundary condition
/// psi(0) = (u, q u), mass 1. Eigenvalue q_r exists iff |q_r| < 1.
ExactSpectrum sp1_spectrum(const Quaterniond& q);

/// Spectrum of the Weyl fiber with mass quaternion q (any norm) and Sp(1)
/// boundary condition gamma: eigenvalue Re(conj(q) gamma) iff it lies in the
/// open gap (-|q|, |q|).
ExactSpectrum weyl_fiber_spectrum(const Quaterniond& q, const Quaterniond& gamma);

/// Unit spinor u with (v.sigma) u = -|v| u, phase fixed so the first
/// component above 1e-12 in modulus is real positive. v must be nonzero.
Eigen::Vector2cd negative_spinor(const Eigen::Vector3d& v);

/// Re(conj(q) gamma).
double fermi_energy_function(const Quaterniond& q, const Quaterniond& gamma);

/// True iff Re(conj(q) gamma) = mu and |q| > |mu|, both within tol.
bool fermi_surface_exact(const Quaterniond& gamma, double mu, const Quaterniond& q,
                         double tol = kExactTolerance);

/// True iff D(rho; conj(omega) omega0) has a zero mode, i.e. the boundary
/// momentum (rho, omega) lies on the ray Arg(omega conj(omega0)) = pi/2.
bool fermi_arc_ray_3d(std::complex<double> omega0, double rho, std::complex<double> omega,
                      double tol = kExactTolerance);

/// Eigenvalues of Q(p) = p.gamma, ascending: -|p| and +|p|, each twice.
Eigen::Vector4d weyl_symbol_eigenvalues(const Eigen::Matrix<double, 5, 1>& p);

}  // namespace halfdirac
