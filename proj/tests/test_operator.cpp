#include <cmath>

#include "doctest.h"
#include "halfdirac/dirac_operator.hpp"
#include "halfdirac/error.hpp"
#include "halfdirac/exact.hpp"
#include "support.hpp"

using namespace halfdirac;
using halfdirac::test::max_abs;

namespace {

std::vector<double> evans_values(const HalfLineOperatorSpec& spec, double resolution = 0.05) {
  MidgapOptions o;
  o.resolution = resolution;
  o.eigenfunctions = false;
  std::vector<double> out;
  for (const auto& s : find_midgap_eigenvalues(EvansContext(spec), o))
    for (int m = 0; m < s.multiplicity; ++m) out.push_back(s.eigenvalue);
  return out;
}

std::vector<double> matrix_values(const HalfLineOperatorSpec& spec, const GridSpec& grid) {
  MatrixSolveOptions o;
  o.eigenfunctions = false;
  std::vector<double> out;
  for (const auto& s : solve_spectrum_matrix(spec, grid, o).midgap) out.push_back(s.eigenvalue);
  return out;
}

PotentialSpec identity_potential(double c, int dim) {
  return PotentialSpec{{PotentialTerm{c, 1.0, Eigen::MatrixXcd::Identity(dim, dim)}}};
}

}  // namespace

TEST_SUITE("operator") {
  TEST_CASE("matrix method: u1 zero mode") {
    GridSpec g;
    g.L = 40;
    g.N = 2000;
    const auto v = matrix_values(dirac_u1(1, cd(0, -1)), g);
    REQUIRE(v.size() == 1);
    CHECK(std::abs(v[0]) <= 5e-3);
  }

  TEST_CASE("matrix method: q_r = 0.5") {
    GridSpec g;
    g.L = 30;
    g.N = 3000;
    const auto v = matrix_values(dirac_sp1(Quaterniond(0.5, std::sqrt(0.75), 0, 0)), g);
    REQUIRE(v.size() == 1);
    CHECK(std::abs(v[0] - 0.5) <= 2e-3);
  }

  TEST_CASE("matrix method: no spurious states for q = 1") {
    GridSpec g;
    g.L = 60;
    g.N = 3000;
    MatrixSolveOptions o;
    o.window_factor = 0.95;
    o.eigenfunctions = false;
    const auto r = solve_spectrum_matrix(dirac_sp1(Quaterniond::identity()), g, o);
    CHECK(r.midgap.empty());
    for (Eigen::Index i = 0; i < r.all_eigenvalues.size(); ++i) CHECK(std::abs(r.all_eigenvalues(i)) >= 0.9);
  }

  TEST_CASE("matrix is Hermitian and blocks agree with the dense form") {
    GridSpec g;
    g.L = 5;
    g.N = 40;
    const Quaterniond q = test::random_unit_quaternion();
    const PotentialSpec v{{PotentialTerm{0.3, 2.0, test::random_hermitian(4)}}};
    const auto spec = dirac_sp1(q, v);
    const Eigen::MatrixXcd a = assemble_matrix(spec, g);
    CHECK(hermiticity_defect(a) <= 1e-12);
    CHECK(a.rows() == 4 * g.N - 2);
    CHECK(max_abs(assemble_blocks(spec, g).to_dense() - a) <= 1e-14);
  }

  TEST_CASE("matrix method converges linearly in h") {
    const Quaterniond q(0.5, 0, std::sqrt(0.75), 0);
    std::vector<double> err;
    for (int n : {750, 1500, 3000}) {
      GridSpec g;
      g.L = 30;
      g.N = n;
      const auto v = matrix_values(dirac_sp1(q), g);
      REQUIRE(v.size() == 1);
      err.push_back(std::abs(v[0] - 0.5));
    }
    for (int i = 0; i + 1 < 3; ++i) {
      const double ratio = err[i] / err[i + 1];
      CHECK(ratio >= 2 * 0.7);
      CHECK(ratio <= 2 * 1.3);
    }
  }

  TEST_CASE("matrix eigenfunction overlaps the exact bound state") {
    const Quaterniond q(-0.2, 0.3, -0.6, 0.7 );
    const Quaterniond u = q.normalized();
    GridSpec g;
    g.L = 30;
    g.N = 3000;
    const auto r = solve_spectrum_matrix(dirac_sp1(u), g);
    REQUIRE(r.midgap.size() == 1);
    const auto ex = *sp1_spectrum(u).bound_state;
    const auto& f = r.midgap[0].eigenfunction;
    cd overlap = 0;
    for (std::size_t j = 0; j < f.z.size(); ++j) overlap += ex(f.z[j]).dot(f.values.col(j)) * g.h();
    CHECK(std::abs(overlap) >= 1 - 1e-2);
  }

  TEST_CASE("Evans examples") {
    const Quaterniond q(0.5, 0, 0, std::sqrt(0.75));
    CHECK(std::abs(evans_function(dirac_sp1(q), 0.5)) <= 1e-8);
    CHECK(std::abs(evans_function(dirac_sp1(q), 0.0)) >= 1e-2);
    CHECK(std::abs(evans_function(dirac_u1(1, cd(0, -1)), 0.0)) <= 1e-8);
    const auto v = evans_values(dirac_sp1(Quaterniond(-0.3, 0, std::sqrt(0.91), 0)));
    REQUIRE(v.size() == 1);
    CHECK(std::abs(v[0] + 0.3) <= 1e-9);
    CHECK(evans_values(dirac_sp1(Quaterniond::identity())).empty());
    CHECK(evans_values(dirac_sp1(-Quaterniond::identity())).empty());
    CHECK_THROWS_AS(evans_function(dirac_sp1(q), 1.5), ValidationError);
  }

  TEST_CASE("Evans matches the closed form for random q") {
    double worst = 0;
    for (int t = 0; t < 40; ++t) {
      const Quaterniond q = test::random_unit_quaternion();
      const auto v = evans_values(dirac_sp1(q));
      if (std::abs(q.real()) > 0.999) continue;
      REQUIRE(v.size() == 1);
      worst = std::max(worst, std::abs(v[0] - q.real()));
    }
    CHECK(worst <= 1e-9);
  }

  TEST_CASE("Evans eigenfunction equals the exact one") {
    for (int t = 0; t < 10; ++t) {
      const Quaterniond q = test::random_unit_quaternion();
      if (std::abs(q.real()) > 0.9) continue;
      const auto st = find_midgap_eigenvalues(dirac_sp1(q), 0.05);
      REQUIRE(st.size() == 1);
      const auto ex = *sp1_spectrum(q).bound_state;
      const auto& f = st[0].eigenfunction;
      double worst = 0;
      for (std::size_t j = 0; j < f.z.size(); j += 7) worst = std::max(worst, (f.values.col(j) - ex(f.z[j])).norm());
      CHECK(worst <= 1e-6);
    }
  }

  TEST_CASE("u1 Evans matches the closed form") {
    for (int t = 0; t < 30; ++t) {
      const double rho = test::uniform(0.3, 2);
      const cd w = std::polar(1.0, test::uniform(-M_PI, M_PI));
      const auto v = evans_values(dirac_u1(rho, w));
      const auto ex = u1_spectrum(rho, w);
      if (std::abs(w.imag()) < 1e-3) continue;
      REQUIRE(v.size() == ex.discrete.size());
      if (!v.empty()) CHECK(std::abs(v[0] - ex.discrete[0].value) <= 1e-9);
    }
  }

  TEST_CASE("complex quaternions decouple into two u1 problems") {
    for (int t = 0; t < 10; ++t) {
      const double a = test::uniform(-M_PI, M_PI);
      const Quaterniond q(std::cos(a), 0, 0, std::sin(a));
      if (std::abs(std::sin(a)) < 0.05) continue;
      std::vector<double> joined;
      for (const cd w : {cd(q.real(), q.vec()(2)), cd(q.real(), -q.vec()(2))})
        for (double x : evans_values(dirac_u1(1, w))) joined.push_back(x);
      const auto four = evans_values(dirac_sp1(q));
      REQUIRE(four.size() == joined.size());
      for (std::size_t i = 0; i < four.size(); ++i) CHECK(std::abs(four[i] - joined[i]) <= 1e-6);
    }
  }

  TEST_CASE("perturbed operator: Evans and matrix agree") {
    const Quaterniond q(0.5, std::sqrt(0.75), 0, 0);
    const auto spec = dirac_sp1(q, identity_potential(0.1, 4));
    const auto ev = evans_values(spec);
    REQUIRE(ev.size() == 1);
    CHECK(std::abs(ev[0] - 0.5) >= 1e-3);
    GridSpec g;
    g.L = 30;
    g.N = 3000;
    const auto mv = matrix_values(spec, g);
    REQUIRE(mv.size() == 1);
    CHECK(std::abs(ev[0] - mv[0]) <= 2e-3);
  }

  TEST_CASE("Gamma = diag(i, i) fiber eigenvalue") {
    // Not an Sp(1) boundary condition: checked against the closed form and the matrix method.
    for (int t = 0; t < 20; ++t) {
      const Quaterniond q = test::random_unit_quaternion() * test::uniform(0.5, 2);
      // The state decays like exp(q_r z); keep it well inside the box.
      if (std::abs(q.real()) < 0.2 * q.norm()) continue;
      const Eigen::Matrix2cd gamma = cd(0, 1) * Eigen::Matrix2cd::Identity();
      const auto v = evans_values(weyl_fiber_operator(q, gamma));
      // Closed form: lower = i upper reduces to q_bar u = (-k - i lambda) u, so
      // q_r < 0 gives lambda = +-|q_vec| and q_r > 0 gives nothing.
      if (q.real() < 0) {
        REQUIRE(v.size() == 2);
        CHECK(std::abs(v[0] + q.vec().norm()) <= 1e-9);
        CHECK(std::abs(v[1] - q.vec().norm()) <= 1e-9);
      } else {
        CHECK(v.empty());
      }
      const auto vm = [&] {
        GridSpec g = GridSpec::for_decay(q.norm() * 0.2, 3000, 60);
        return matrix_values(weyl_fiber_operator(q, gamma), g);
      }();
      REQUIRE(v.size() == vm.size());
      for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(v[i] - vm[i]) <= 5e-3 * q.norm());
    }
  }

  TEST_CASE("normalize_gap") {
    const auto spec = dirac_u1(2, std::polar(1.0, -3 * M_PI / 4));
    const auto [scaled, factor] = normalize_gap(spec);
    CHECK(factor == 0.5);
    CHECK(scaled.essential_edge() == doctest::Approx(1.0));
    const auto v = evans_values(scaled);
    REQUIRE(v.size() == 1);
    CHECK(v[0] == doctest::Approx(-std::sqrt(2.0) / 2).epsilon(1e-9));
    const auto id = normalize_gap(dirac_sp1(Quaterniond::identity()));
    CHECK(id.second == 1.0);
    HalfLineOperatorSpec zero = dirac_u1(1, 1.0);
    zero.mass(0, 0) = 0;
    CHECK_THROWS_AS(normalize_gap(zero), ValidationError);
    CHECK_THROWS_AS(dirac_u1(0, 1.0), ValidationError);
  }

  TEST_CASE("conjugate check") {
    for (int t = 0; t < 20; ++t) {
      const Quaterniond q = test::random_unit_quaternion(), g = test::random_unit_quaternion();
      const auto rep = conjugate_check(q, g);
      CHECK(rep.pass);
      const double expect = (q.conjugate() * g).real();
      if (rep.variable_domain.size() == 1) CHECK(std::abs(rep.variable_domain[0] - expect) <= 1e-6);
    }
    const Quaterniond q = test::random_unit_quaternion();
    auto rep = conjugate_check(q, Quaterniond::identity());
    CHECK(rep.pass);
    REQUIRE(rep.fixed_domain.size() == 1);
    CHECK(std::abs(rep.fixed_domain[0] - q.real()) <= 1e-6);
    rep = conjugate_check(q, q);
    CHECK(rep.pass);
    CHECK(rep.variable_domain.empty());
    CHECK(rep.fixed_domain.empty());
  }

  TEST_CASE("validation errors") {
    Eigen::Matrix2cd bad = Eigen::Matrix2cd::Identity();
    bad(0, 0) = 1.1;
    CHECK_THROWS_AS(weyl_fiber_operator(Quaterniond::identity(), bad).validate(), ValidationError);
    CHECK_THROWS_AS(BoundaryCondition::from_quaternion(Quaterniond(2, 0, 0, 0)), ValidationError);
    CHECK_THROWS_AS(dirac_u1(1, cd(2, 0)), ValidationError);
    PotentialSpec p{{PotentialTerm{1, 1, test::random_complex(4, 4)}}};
    CHECK_THROWS_AS(dirac_sp1(Quaterniond::identity(), p).validate(), ValidationError);
    p = identity_potential(1, 2);
    CHECK_THROWS_AS(dirac_sp1(Quaterniond::identity(), p).validate(), ValidationError);
    p = identity_potential(1, 4);
    p.terms[0].alpha = 0;
    CHECK_THROWS_AS(dirac_sp1(Quaterniond::identity(), p).validate(), ValidationError);
    GridSpec g;
    g.N = 1;
    CHECK_THROWS_AS(g.validate(), ValidationError);
    g = GridSpec{};
    g.wilson_r = 0;
    CHECK_THROWS_AS(g.validate(), ValidationError);
    try {
      weyl_fiber_operator(Quaterniond::zero(), Eigen::Matrix2cd::Identity()).validate();
      FAIL("expected gapless");
    } catch (const ValidationError& e) {
      CHECK(e.code() == "gapless");
    }
  }

  TEST_CASE("far-end states are dropped and counted") {
    // q_r < 0 has a truncation state near z = L that the filter removes.
    const Quaterniond q(-0.6, 0.8, 0, 0);
    GridSpec g;
    g.L = 30;
    g.N = 3000;
    const auto r = solve_spectrum_matrix(dirac_sp1(q), g);
    REQUIRE(r.midgap.size() == 1);
    CHECK(std::abs(r.midgap[0].eigenvalue + 0.6) <= 2e-3);
    const auto w = matrix_window(dirac_sp1(q), g, -0.98, 0.98, false);
    CHECK(w.eigenvalues.size() == 1 + r.far_end_states);
  }
}
