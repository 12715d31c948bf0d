#include "halfdirac/exact.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "halfdirac/error.hpp"

namespace halfdirac {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<Interval> bands(double edge) { return {{-kInf, -edge}, {edge, kInf}}; }

void require_unit(double modulus, const char* what) {
  if (!(std::abs(modulus - 1.0) <= kExactTolerance)) {
    std::ostringstream os;
    os << what << " must have unit modulus, got " << modulus;
    throw ValidationError(os.str());
  }
}

void fix_phase(Eigen::VectorXcd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-12) {
      v *= std::conj(v(i)) / std::abs(v(i));
      v(i) = std::abs(v(i));
      return;
    }
  }
}

}  // namespace

Eigen::Vector2cd negative_spinor(const Eigen::Vector3d& v) {
  const double len = v.norm();
  if (!(len > 0)) throw ValidationError("negative_spinor: zero vector has no spinor");
  const Eigen::Vector3d n = v / len;
  // Columns of the projector (1 - n.sigma)/2; take the longer one.
  using C = std::complex<double>;
  Eigen::Vector2cd c0(C((1 - n(2)) / 2, 0), -C(n(0), n(1)) / 2.0);
  Eigen::Vector2cd c1(-C(n(0), -n(1)) / 2.0, C((1 + n(2)) / 2, 0));
  Eigen::VectorXcd u = (c0.norm() >= c1.norm() ? c0 : c1);
  u.normalize();
  fix_phase(u);
  return u;
}

ExactSpectrum u1_spectrum(double rho, std::complex<double> omega) {
  if (!(rho > 0)) throw ValidationError("u1_spectrum: rho must be positive (massless case excluded)");
  require_unit(std::abs(omega), "u1_spectrum: omega");
  ExactSpectrum s;
  s.gap_edge = rho;
  s.essential_bands = bands(rho);
  if (omega.imag() < -kExactTolerance) {
    s.discrete.push_back({rho * omega.real(), 1});
    BoundState b;
    b.decay_rate = -rho * omega.imag();
    b.boundary_value = Eigen::Vector2cd(1.0, omega) * std::sqrt(b.decay_rate);
    s.bound_state = b;
  }
  return s;
}

ExactSpectrum sp1_spectrum(const Quaterniond& q) {
  require_unit(q.norm(), "sp1_spectrum: q");
  ExactSpectrum s;
  s.gap_edge = 1.0;
  s.essential_bands = bands(1.0);
  if (std::abs(q.real()) < 1.0 - kExactTolerance) {
    s.discrete.push_back({q.real(), 1});
    BoundState b;
    b.decay_rate = q.vec().norm();
    const Eigen::Vector2cd u = negative_spinor(q.vec());
    b.spinor = u;
    b.boundary_value.resize(4);
    b.boundary_value << u, q.matrix() * u;
    b.boundary_value *= std::sqrt(b.decay_rate);
    s.bound_state = b;
  }
  return s;
}

ExactSpectrum weyl_fiber_spectrum(const Quaterniond& q, const Quaterniond& gamma) {
  require_unit(gamma.norm(), "weyl_fiber_spectrum: gamma");
  const double edge = q.norm();
  if (!(edge > 0)) throw ValidationError("weyl_fiber_spectrum: q = 0 is a gapless fiber");
  ExactSpectrum s;
  s.gap_edge = edge;
  s.essential_bands = bands(edge);
  const Quaterniond m = q.conjugate() * gamma;  // |m| = |q|
  if (std::abs(m.real()) < edge * (1.0 - kExactTolerance)) {
    s.discrete.push_back({m.real(), 1});
  }
  return s;
}

double fermi_energy_function(const Quaterniond& q, const Quaterniond& gamma) {
  return (q.conjugate() * gamma).real();
}

bool fermi_surface_exact(const Quaterniond& gamma, double mu, const Quaterniond& q, double tol) {
  require_unit(gamma.norm(), "fermi_surface_exact: gamma");
  return std::abs(fermi_energy_function(q, gamma) - mu) <= tol && q.norm() - std::abs(mu) > tol;
}

bool fermi_arc_ray_3d(std::complex<double> omega0, double rho, std::complex<double> omega,
                      double tol) {
  if (!(rho > 0)) throw ValidationError("fermi_arc_ray_3d: rho must be positive");
  require_unit(std::abs(omega0), "fermi_arc_ray_3d: omega0");
  require_unit(std::abs(omega), "fermi_arc_ray_3d: omega");
  const double arg = std::arg(omega * std::conj(omega0));
  return std::abs(arg - M_PI / 2) <= tol;
}

Eigen::Vector4d weyl_symbol_eigenvalues(const Eigen::Matrix<double, 5, 1>& p) {
  const double r = p.norm();
  return Eigen::Vector4d(-r, -r, r, r);
}

}  // namespace halfdirac
