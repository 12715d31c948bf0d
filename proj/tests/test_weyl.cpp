#include <cmath>

#include "doctest.h"
#include "halfdirac/error.hpp"
#include "halfdirac/exact.hpp"
#include "halfdirac/weyl.hpp"
#include "support.hpp"

using namespace halfdirac;

namespace {

std::vector<double> precise_values(const HalfLineOperatorSpec& spec) {
  MidgapOptions o;
  o.resolution = 0.02 * spec.essential_edge();
  o.eigenfunctions = false;
  std::vector<double> out;
  for (const auto& s : find_midgap_eigenvalues(EvansContext(spec), o)) out.push_back(s.eigenvalue);
  return out;
}

double residual_at(const WeylFamilySpec& spec, const Eigen::Vector4d& p) {
  double best = std::numeric_limits<double>::infinity();
  for (double x : precise_values(fiber_operator(spec, p))) best = std::min(best, std::abs(x - spec.fermi_level));
  return best;
}

FermiScanOptions small_scan(double r0) {
  FermiScanOptions o;
  o.r0 = r0;
  o.r1 = 2;
  o.n_radial = 3;
  o.n_lat = 4;
  o.n_lon = 8;
  o.n_chi = 12;
  return o;
}

}  // namespace

TEST_SUITE("weyl") {
  TEST_CASE("fiber examples") {
    const WeylFamilySpec one;
    auto op = fiber_operator(one, Eigen::Vector4d(1, 0, 0, 0));
    CHECK(op.essential_edge() == doctest::Approx(1.0));
    CHECK(test::max_abs(op.mass - Eigen::MatrixXcd::Identity(2, 2)) == 0);
    CHECK(precise_values(op).empty());

    op = fiber_operator(one, Eigen::Vector4d(0, 0, 0, 1));
    const auto v = precise_values(op);
    REQUIRE(v.size() == 1);
    CHECK(std::abs(v[0]) <= 1e-9);

    CHECK(gapless_fiber(Eigen::Vector4d::Zero()));
    CHECK_FALSE(gapless_fiber(Eigen::Vector4d(0, 1e-3, 0, 0)));
    std::string code;
    try {
      fiber_operator(one, Eigen::Vector4d::Zero()).validate();
    } catch (const ValidationError& e) {
      code = e.code();
    }
    CHECK(code == "gapless");
  }

  TEST_CASE("fiber gap is (-|p|, |p|)") {
    for (int t = 0; t < 20; ++t) {
      const Eigen::Vector4d p(test::normal(), test::normal(), test::normal(), test::normal());
      CHECK(fiber_operator(WeylFamilySpec{}, p).essential_edge() == doctest::Approx(p.norm()).epsilon(1e-12));
    }
  }

  TEST_CASE("Sp(1) fibers match Re(conj(q) Gamma)") {
    for (int t = 0; t < 30; ++t) {
      const Quaterniond g = test::random_unit_quaternion();
      const WeylFamilySpec spec = WeylFamilySpec::sp1(g);
      const Eigen::Vector4d p = Eigen::Vector4d(test::normal(), test::normal(), test::normal(), test::normal());
      const Quaterniond q = momentum_to_quaternion(p);
      const auto ex = weyl_fiber_spectrum(q, g);
      const auto v = precise_values(fiber_operator(spec, p));
      REQUIRE(v.size() == ex.discrete.size());
      if (!v.empty()) CHECK(std::abs(v[0] - ex.discrete[0].value) <= 1e-9 * (1 + p.norm()));
    }
  }

  TEST_CASE("family validation") {
    CHECK_THROWS_AS(WeylFamilySpec::sp1(Quaterniond::identity(), 1.0).validate(), ValidationError);
    Eigen::Matrix2cd bad = Eigen::Matrix2cd::Identity();
    bad(1, 0) = 0.5;
    CHECK_THROWS_AS(WeylFamilySpec::u2(bad).validate(), ValidationError);
    CHECK_THROWS_AS(sphere_family(WeylFamilySpec{}, 0.0), ValidationError);
    FermiScanOptions o = small_scan(0.4);
    CHECK_THROWS_AS(fermi_surface_scan(WeylFamilySpec::sp1(Quaterniond::identity(), 0.5), o), ValidationError);
  }

  TEST_CASE("sphere family is gap normalized") {
    const SphereFamily f = sphere_family(WeylFamilySpec{}, 2.0);
    for (int t = 0; t < 10; ++t) {
      const Quaterniond x = test::random_unit_quaternion();
      const auto op = f.family(x);
      CHECK(op.essential_edge() == doctest::Approx(1.0).epsilon(1e-12));
      const auto v = gap_eigenvalues(op);
      if (std::abs(x.real()) < 0.9) {
        REQUIRE(v.size() == 1);
        CHECK(std::abs(v[0] - x.real()) <= 1e-5);
      }
    }
  }

  TEST_CASE("DD of the momentum sphere does not depend on the radius") {
    SphereGrid g;
    g.s2 = {8, 16};
    g.n_chi = 8;
    DDOptions o;
    o.matrix_n = 800;
    const auto f1 = sphere_family(WeylFamilySpec{}, 1.0, g);
    const auto f2 = sphere_family(WeylFamilySpec{}, 2.0, g);
    const int d1 = dd_invariant(f1.grid, f1.family, o).dd;
    CHECK(std::abs(d1) == 1);
    CHECK(dd_invariant(f2.grid, f2.family, o).dd == d1);
  }

  TEST_CASE("Fermi scan, Gamma = 1, mu = 0") {
    const WeylFamilySpec spec;
    const auto cloud = fermi_surface_scan(spec, small_scan(0.2));
    CHECK(cloud.nonempty_at_every_radius());
    CHECK(cloud.radii.size() == 3);
    for (const auto& pt : cloud.points) {
      CHECK(std::abs(pt.p(0)) <= 0.03);
      CHECK(pt.residual <= 0.02);
      CHECK(pt.p.norm() > 0);
    }
  }

  TEST_CASE("Fermi scan, Gamma = 1, mu = 0.5") {
    const WeylFamilySpec spec = WeylFamilySpec::sp1(Quaterniond::identity(), 0.5);
    const auto cloud = fermi_surface_scan(spec, small_scan(0.6));
    CHECK(cloud.nonempty_at_every_radius());
    for (const auto& pt : cloud.points) {
      CHECK(std::abs(pt.p(0) - 0.5) <= 0.03);
      CHECK(pt.p.norm() > 0.5);
    }
  }

  TEST_CASE("Fermi points of a random Sp(1) boundary condition satisfy the exact equation") {
    const Quaterniond g = test::random_unit_quaternion();
    const WeylFamilySpec spec = WeylFamilySpec::sp1(g, 0.2);
    const auto cloud = fermi_surface_scan(spec, small_scan(0.5));
    CHECK(!cloud.points.empty());
    for (const auto& pt : cloud.points) {
      const Quaterniond q = momentum_to_quaternion(Eigen::Vector4d(pt.p));
      CHECK(std::abs(fermi_energy_function(q, g) - 0.2) <= 0.02 + 1e-6);
      CHECK(q.norm() > 0.2);
    }
  }

  TEST_CASE("Fermi membership is rotation covariant in (p2, p3, p4)") {
    const WeylFamilySpec spec;
    const auto cloud = fermi_surface_scan(spec, small_scan(0.5));
    REQUIRE(cloud.points.size() > 5);
    for (std::size_t i = 0; i < 5; ++i) {
      const Eigen::Vector4d p = cloud.points[i * cloud.points.size() / 5].p;
      const Eigen::Matrix3d rot =
          Eigen::Quaterniond(test::normal(), test::normal(), test::normal(), test::normal()).normalized()
              .toRotationMatrix();
      Eigen::Vector4d pr = p;
      pr.tail<3>() = rot * p.tail<3>();
      CHECK(std::abs(residual_at(spec, p) - residual_at(spec, pr)) <= 1e-8);
    }
  }

  TEST_CASE("perturbation experiment, small grids") {
    PerturbationOptions o;
    o.dd_grid.s2 = {8, 16};
    o.dd_grid.n_chi = 8;
    o.dd.matrix_n = 800;
    o.gap_grid = SphereGrid::tilted(6, 12, 8);
    o.gap_resolution = 0.05;
    o.fermi = small_scan(0.2);
    const auto rows = perturbation_experiment(WeylFamilySpec{}, {0.0, 0.1}, o);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
      REQUIRE(r.dd);
      CHECK(std::abs(*r.dd) == 1);
      CHECK(r.dd_status == "certified");
      CHECK(r.coverage == doctest::Approx(1.0));
      CHECK(r.fermi_nonempty);
    }
    CHECK(*rows[0].dd == *rows[1].dd);
    CHECK(rows[0].max_displacement <= 0.03);
  }

  TEST_CASE("a strong perturbation is reported beyond the certified range") {
    PerturbationOptions o;
    o.dd_grid.s2 = {8, 16};
    o.dd_grid.n_chi = 8;
    o.dd.matrix_n = 800;
    o.gap_grid = SphereGrid::tilted(4, 8, 4);
    o.gap_resolution = 0.05;
    o.fermi = small_scan(0.2);
    o.fermi.n_radial = 1;
    // A slowly decaying shift pushes the equator eigenvalues onto +epsilon.
    o.alpha = 0.3;
    const auto rows = perturbation_experiment(WeylFamilySpec{}, {0.1}, o);
    REQUIRE(rows.size() == 1);
    CHECK_FALSE(rows[0].dd);
    CHECK(rows[0].dd_status.rfind("beyond certified range", 0) == 0);
  }
}
