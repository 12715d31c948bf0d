#include <cmath>

#include "doctest.h"
#include "halfdirac/error.hpp"
#include "halfdirac/exact.hpp"
#include "halfdirac/linalg.hpp"
#include "support.hpp"

using namespace halfdirac;
using halfdirac::test::max_abs;

namespace {

// H psi - lambda psi for psi = b exp(-k z), H = [[-i d, M], [M^dagger, i d]],
// evaluated with d psi = -k psi.
double eigen_residual(const Eigen::MatrixXcd& m, const BoundState& s, double lambda, double z) {
  const int k = static_cast<int>(m.rows());
  const Eigen::VectorXcd psi = s(z);
  const Eigen::VectorXcd up = psi.head(k), lo = psi.tail(k);
  const cd i(0, 1);
  Eigen::VectorXcd r(2 * k);
  r.head(k) = i * s.decay_rate * up + m * lo - lambda * up;
  r.tail(k) = m.adjoint() * up - i * s.decay_rate * lo - lambda * lo;
  return r.norm();
}

}  // namespace

TEST_SUITE("exact") {
  TEST_CASE("u1 examples") {
    auto s = u1_spectrum(1, cd(0, -1));
    REQUIRE(s.discrete.size() == 1);
    CHECK(std::abs(s.discrete[0].value) <= 1e-15);
    CHECK(u1_spectrum(1, 1.0).discrete.empty());
    s = u1_spectrum(2, std::polar(1.0, -3 * M_PI / 4));
    REQUIRE(s.discrete.size() == 1);
    CHECK(s.discrete[0].value == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-14));
    CHECK(s.essential_bands.size() == 2);
    CHECK(s.essential_bands[0].hi == -2);
    CHECK(s.essential_bands[1].lo == 2);
  }

  TEST_CASE("u1 boundary cases go to the empty branch") {
    CHECK(u1_spectrum(1, cd(-1, 0)).discrete.empty());
    CHECK(u1_spectrum(1, std::polar(1.0, -1e-12)).discrete.empty());
    CHECK_FALSE(u1_spectrum(1, std::polar(1.0, -1e-6)).discrete.empty());
  }

  TEST_CASE("u1 validation") {
    CHECK_THROWS_AS(u1_spectrum(0, 1.0), ValidationError);
    CHECK_THROWS_AS(u1_spectrum(-1, 1.0), ValidationError);
    CHECK_THROWS_AS(u1_spectrum(1, cd(1.1, 0)), ValidationError);
  }

  TEST_CASE("u1 bound state solves the equation") {
    for (int t = 0; t < 100; ++t) {
      const double rho = test::uniform(0.1, 3);
      const cd omega = std::polar(1.0, test::uniform(-M_PI + 0.01, -0.01));
      const auto s = u1_spectrum(rho, omega);
      REQUIRE(s.bound_state);
      const auto& b = *s.bound_state;
      CHECK(b.decay_rate > 0);
      CHECK(std::abs(b.boundary_value(1) - omega * b.boundary_value(0)) <= 1e-14);
      // Unit L^2 norm: |b|^2 / (2 k) = 1.
      CHECK(b.boundary_value.squaredNorm() / (2 * b.decay_rate) == doctest::Approx(1).epsilon(1e-13));
      Eigen::MatrixXcd m(1, 1);
      m(0, 0) = rho;
      for (double z : {0.0, 0.3, 1.7, 5.0}) CHECK(eigen_residual(m, b, s.discrete[0].value, z) <= 1e-10);
    }
  }

  TEST_CASE("sp1 examples") {
    auto s = sp1_spectrum(Quaterniond(0.5, std::sqrt(0.75), 0, 0));
    REQUIRE(s.discrete.size() == 1);
    CHECK(s.discrete[0].value == 0.5);
    CHECK(s.discrete[0].multiplicity == 1);
    CHECK(s.bound_state->decay_rate == doctest::Approx(std::sqrt(0.75)).epsilon(1e-15));
    CHECK(sp1_spectrum(Quaterniond::identity()).discrete.empty());
    CHECK(sp1_spectrum(-Quaterniond::identity()).discrete.empty());
    s = sp1_spectrum(Quaterniond(0, 0, 0, 1));
    REQUIRE(s.discrete.size() == 1);
    CHECK(s.discrete[0].value == 0);
    const Eigen::Vector2cd u = *s.bound_state->spinor;
    CHECK(std::abs(u(0)) <= 1e-15);
    CHECK(std::abs(std::abs(u(1)) - 1) <= 1e-15);
    CHECK_THROWS_AS(sp1_spectrum(Quaterniond(1, 1, 0, 0)), ValidationError);
  }

  TEST_CASE("sp1 random unit quaternions") {
    const auto sigma = pauli();
    double worst_spinor = 0, worst_eq = 0;
    for (int t = 0; t < 1000; ++t) {
      const Quaterniond q = test::random_unit_quaternion();
      const auto s = sp1_spectrum(q);
      REQUIRE(s.discrete.size() == 1);
      CHECK(s.discrete[0].value == q.real());
      const auto& b = *s.bound_state;
      const Eigen::Vector2cd u = *b.spinor;
      const Eigen::Matrix2cd qs = q.vec()(0) * sigma[0] + q.vec()(1) * sigma[1] + q.vec()(2) * sigma[2];
      worst_spinor = std::max(worst_spinor, (qs * u + q.vec().norm() * u).norm());
      // Phase convention: first non-negligible entry real positive.
      const int first = std::abs(u(0)) > 1e-12 ? 0 : 1;
      CHECK(u(first).imag() == 0);
      CHECK(u(first).real() > 0);
      // Boundary condition psi(0) = (u, q u) up to the normalization.
      const Eigen::VectorXcd b0 = b.boundary_value;
      CHECK((b0.tail(2) - q.matrix() * b0.head(2)).norm() <= 1e-13);
      CHECK(b0.squaredNorm() / (2 * b.decay_rate) == doctest::Approx(1).epsilon(1e-12));
      for (double z : {0.0, 0.5, 2.0})
        worst_eq = std::max(worst_eq, eigen_residual(Eigen::Matrix2cd::Identity(), b, q.real(), z));
    }
    CHECK(worst_spinor <= 1e-12);
    CHECK(worst_eq <= 1e-10);
  }

  TEST_CASE("complex quaternions decouple into two u1 problems") {
    for (int t = 0; t < 200; ++t) {
      const double a = test::uniform(-M_PI, M_PI);
      if (std::abs(std::sin(a)) < 1e-6) continue;
      const Quaterniond q(std::cos(a), 0, 0, std::sin(a));
      // Components 1 and 2 see omega = q_r + i q3 and q_r - i q3.
      std::vector<double> joined;
      for (const cd w : {cd(q.real(), q.vec()(2)), cd(q.real(), -q.vec()(2))})
        for (const auto& e : u1_spectrum(1, w).discrete) joined.push_back(e.value);
      const auto s = sp1_spectrum(q);
      REQUIRE(joined.size() == 1);
      REQUIRE(s.discrete.size() == 1);
      CHECK(joined[0] == doctest::Approx(s.discrete[0].value).epsilon(1e-15));
    }
  }

  TEST_CASE("weyl fiber spectrum") {
    const auto s = weyl_fiber_spectrum(Quaterniond(0, 0, 0, 2), Quaterniond::identity());
    CHECK(s.gap_edge == 2);
    REQUIRE(s.discrete.size() == 1);
    CHECK(s.discrete[0].value == 0);
    CHECK(weyl_fiber_spectrum(Quaterniond(3, 0, 0, 0), Quaterniond::identity()).discrete.empty());
    CHECK_THROWS_AS(weyl_fiber_spectrum(Quaterniond::zero(), Quaterniond::identity()), ValidationError);
    for (int t = 0; t < 100; ++t) {
      const Quaterniond x = test::random_unit_quaternion(), g = test::random_unit_quaternion();
      const double r = test::uniform(0.2, 3);
      const auto f = weyl_fiber_spectrum(x * r, g);
      const auto ref = sp1_spectrum(x.conjugate() * g);
      REQUIRE(f.discrete.size() == ref.discrete.size());
      if (!f.discrete.empty()) CHECK(f.discrete[0].value == doctest::Approx(r * ref.discrete[0].value).epsilon(1e-12));
    }
  }

  TEST_CASE("fermi surface examples") {
    const auto one = Quaterniond::identity();
    CHECK(fermi_surface_exact(one, 0, Quaterniond(0, 0, 1, 0)));
    CHECK_FALSE(fermi_surface_exact(one, 0, one));
    CHECK(fermi_surface_exact(one, 0.5, Quaterniond(0.5, 1, 0, 0)));
    CHECK_FALSE(fermi_surface_exact(one, 0.5, Quaterniond(0.5, 0, 0, 0)));
    CHECK_THROWS_AS(fermi_surface_exact(one * 2.0, 0, one), ValidationError);
  }

  TEST_CASE("fermi arc ray examples") {
    CHECK(fermi_arc_ray_3d(1.0, 0.7, cd(0, 1)));
    CHECK(fermi_arc_ray_3d(1.0, 3.0, cd(0, 1)));
    CHECK_FALSE(fermi_arc_ray_3d(1.0, 1.0, 1.0));
    CHECK(fermi_arc_ray_3d(cd(0, 1), 1.0, -1.0));
    CHECK_FALSE(fermi_arc_ray_3d(1.0, 1.0, cd(0, -1)));
  }

  TEST_CASE("fermi arc ray agrees with the zero mode of D(rho; conj(omega) omega0)") {
    for (int t = 0; t < 300; ++t) {
      const cd w0 = std::polar(1.0, test::uniform(-M_PI, M_PI));
      const double rho = test::uniform(0.1, 2);
      const bool on = t % 3 == 0;
      const cd w = on ? w0 * cd(0, 1) : std::polar(1.0, test::uniform(-M_PI, M_PI));
      const auto s = u1_spectrum(rho, std::conj(w) * w0);
      const bool zero_mode = !s.discrete.empty() && std::abs(s.discrete[0].value) <= 1e-9;
      CHECK(fermi_arc_ray_3d(w0, rho, w) == zero_mode);
      if (on) CHECK(zero_mode);
    }
  }

  TEST_CASE("negative spinor") {
    CHECK_THROWS_AS(negative_spinor(Eigen::Vector3d::Zero()), ValidationError);
    const auto sigma = pauli();
    for (int t = 0; t < 200; ++t) {
      const Eigen::Vector3d v(test::normal(), test::normal(), test::normal());
      const Eigen::Vector2cd u = negative_spinor(v);
      const Eigen::Matrix2cd vs = v(0) * sigma[0] + v(1) * sigma[1] + v(2) * sigma[2];
      CHECK((vs * u + v.norm() * u).norm() <= 1e-12);
      CHECK(u.norm() == doctest::Approx(1).epsilon(1e-14));
    }
  }
}
