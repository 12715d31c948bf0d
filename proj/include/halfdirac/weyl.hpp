#pragma once

// Half-space Weyl Hamiltonian in five dimensions, fibered over the boundary
// momenta p = (p1, p2, p3, p4): fiber operators, momentum spheres, Fermi
// surface scans and perturbation experiments.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "halfdirac/algebra.hpp"
#include "halfdirac/dirac_operator.hpp"
#include "halfdirac/topology.hpp"

namespace halfdirac {

struct WeylFamilySpec {
  BoundaryCondition bc = BoundaryCondition::u2(Eigen::Matrix2cd::Identity());
  PotentialSpec potential;
  double fermi_level = 0;

  static WeylFamilySpec sp1(const Quaterniond& gamma, double mu = 0, PotentialSpec v = {});
  static WeylFamilySpec u2(const Eigen::Matrix2cd& gamma, double mu = 0, PotentialSpec v = {});

  void validate() const;
};

/// Fiber at boundary momentum p: mass quaternion conj(q(p)), boundary
/// condition Gamma, essential gap (-|p|, |p|). p = 0 gives a gapless fiber,
/// which validate() rejects with code "gapless".
HalfLineOperatorSpec fiber_operator(const WeylFamilySpec& spec, const Eigen::Vector4d& p);
bool gapless_fiber(const Eigen::Vector4d& p);

/// The family over the momentum sphere |p| = rho, parametrized by unit
/// quaternions x with q(p) = rho x, gap-normalized to (-1, 1).
struct SphereFamily {
  SphereGrid grid;
  FamilyFn family;
  double rho = 1;
};
SphereFamily sphere_family(const WeylFamilySpec& spec, double rho, const SphereGrid& grid = {});

// --- Fermi surface --------------------------------------------------------------

struct FermiScanOptions {
  double r0 = 0.2, r1 = 2.0;
  int n_radial = 10;
  int n_lat = 8;    // transverse S^2 mesh for (p2, p3, p4) / |.|
  int n_lon = 16;
  int n_chi = 24;   // levels of the polar angle chi from the +p1 axis
  double tol_fs = 0.02;
  double bisect_tol = 1e-3;  // stop bisecting once the residual is below bisect_tol * tol_fs
  SurveyOptions survey;
  int threads = 0;
};

struct FermiPoint {
  Eigen::Vector4d p = Eigen::Vector4d::Zero();
  double eigenvalue = 0;  // nearest eigenvalue to mu, operator units
  double residual = 0;    // |eigenvalue - mu|
  int radius_index = 0;
};

struct FermiSurfaceCloud {
  std::vector<FermiPoint> points;
  std::vector<double> radii;
  std::vector<int> per_radius;  // points found at each radius
  double angular_step = 0;      // polar angle spacing of the mesh
  double tol_fs = 0;

  bool nonempty_at_every_radius() const;
};

/// Points p with |p| in [r0, r1] where some fiber eigenvalue lies within
/// tol_fs of mu. Along each meridian chi -> r (cos chi, sin chi n) the count of
/// eigenvalues below mu is sampled on the chi levels and every change is
/// bisected; mesh samples already within tolerance are kept as well.
FermiSurfaceCloud fermi_surface_scan(const WeylFamilySpec& spec, const FermiScanOptions& opt = {});

// --- perturbations ----------------------------------------------------------------

struct PerturbationOptions {
  Eigen::MatrixXcd matrix = Eigen::MatrixXcd::Identity(4, 4);  // M in c e^{-alpha z} M
  double alpha = 1;
  SphereGrid dd_grid;
  DDOptions dd;
  SphereGrid gap_grid = SphereGrid::tilted(24, 48, 24);
  double gap_delta = 0.05;
  double gap_resolution = 0.01;
  FermiScanOptions fermi;
};

struct PerturbationRow {
  double strength = 0;
  std::optional<int> dd;  // empty when the cover certificate fails
  std::string dd_status;  // "certified" or "beyond certified range: <reason>"
  double coverage = 0;
  double max_gap = 0;
  std::size_t fermi_points = 0;
  bool fermi_nonempty = false;
  double max_displacement = 0;  // max |p1 - mu| over the cloud
};

std::vector<PerturbationRow> perturbation_experiment(const WeylFamilySpec& spec, const std::vector<double>& strengths,
                                                     const PerturbationOptions& opt = {});

}  // namespace halfdirac
