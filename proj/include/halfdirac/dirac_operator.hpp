#pragma once

// Half-line Dirac operators
//
//   H = [[-i d/dz 1_k, M], [M^dagger, i d/dz 1_k]] + V(z),   z > 0,
//
// with boundary condition lower(0) = Gamma upper(0), k = 1 or 2. Realized as a
// finite-difference matrix with a Wilson term, and by Evans-function shooting.

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "halfdirac/algebra.hpp"
#include "halfdirac/linalg.hpp"

namespace halfdirac {

struct BoundaryCondition {
  Eigen::MatrixXcd gamma;  // k x k unitary
  bool sp1 = false;        // gamma = matrix(q) for a unit quaternion q

  static BoundaryCondition u1(cd omega);
  static BoundaryCondition u2(const Eigen::Matrix2cd& gamma);
  static BoundaryCondition from_quaternion(const Quaterniond& q);

  int k() const { return static_cast<int>(gamma.rows()); }
  void validate() const;
};

struct PotentialTerm {
  double c = 0;
  double alpha = 1;
  Eigen::MatrixXcd m;  // 2k x 2k Hermitian
};

/// V(z) = sum_k c_k exp(-alpha_k z) M_k.
struct PotentialSpec {
  std::vector<PotentialTerm> terms;

  bool empty() const { return terms.empty(); }
  Eigen::MatrixXcd at(double z, Eigen::Index dim) const;
  double max_alpha() const;
  /// sum_k |c_k| ||M_k||_2, the size of V at z = 0 (an upper bound).
  double strength() const;
  /// Smallest z with sum |c_k| ||M_k|| exp(-alpha_k z) <= threshold.
  double cutoff(double threshold = 1e-12) const;
  void validate(Eigen::Index dim) const;
};

struct HalfLineOperatorSpec {
  Eigen::MatrixXcd mass;  // k x k block M
  BoundaryCondition bc;
  PotentialSpec potential;
  double scale = 1.0;  // the operator is scale * H

  int k() const { return static_cast<int>(mass.rows()); }
  int components() const { return 2 * k(); }
  /// scale * sigma_min(M).
  double essential_edge() const;
  /// The constant part [[0, M], [M^dagger, 0]] (without scale).
  Eigen::MatrixXcd mass_matrix() const;
  void validate() const;
};

/// D(rho; omega): M = rho, psi(0) ~ (1, omega).
HalfLineOperatorSpec dirac_u1(double rho, cd omega, PotentialSpec v = {});
/// Quaternionic operator with boundary condition psi(0) = (u, q u), M = 1.
HalfLineOperatorSpec dirac_sp1(const Quaterniond& q, PotentialSpec v = {});
/// The same operator conjugated to a fixed domain: M = matrix(q), psi(0) = (u, u).
HalfLineOperatorSpec dirac_sp1_fixed(const Quaterniond& q, PotentialSpec v = {});
/// Weyl fiber: M = matrix(conj(q)), boundary condition Gamma.
HalfLineOperatorSpec weyl_fiber_operator(const Quaterniond& q, const Eigen::Matrix2cd& gamma,
                                         PotentialSpec v = {});

struct GridSpec {
  double L = 30;
  int N = 3000;
  double wilson_r = 0.25;

  double h() const { return L / N; }
  void validate() const;
  /// L = min(cap, log(1e8)/decay); the flag reports a capped length.
  static GridSpec for_decay(double decay, int n, double cap = 80, bool* capped = nullptr);
};

/// Block tridiagonal discretization on nodes z_j = j h, j = 0..N-1, with
/// psi_N = 0. Block 0 is compressed onto the boundary subspace (u, Gamma u).
BlockTridiagonal assemble_blocks(const HalfLineOperatorSpec& spec, const GridSpec& grid);

/// Dense form of assemble_blocks (Hermitian by construction).
Eigen::MatrixXcd assemble_matrix(const HalfLineOperatorSpec& spec, const GridSpec& grid);

/// Map coordinates of assemble_blocks to nodal values (2k per node).
Eigen::MatrixXcd expand_boundary(const HalfLineOperatorSpec& spec, const Eigen::MatrixXcd& x);

struct SampledFunction {
  std::vector<double> z;
  Eigen::MatrixXcd values;  // components x samples
};

struct MidgapState {
  double eigenvalue = 0;
  int multiplicity = 1;
  bool near_edge = false;
  SampledFunction eigenfunction;
};

struct SpectrumResult {
  double essential_edge = 0;
  std::vector<MidgapState> midgap;
  Eigen::VectorXd all_eigenvalues;  // matrix method only, within the window
  int far_end_states = 0;           // matrix method: gap states localized near z = L, dropped
};

inline constexpr double kDeltaEdge = 0.02;

struct MatrixSolveOptions {
  double delta_edge = kDeltaEdge;
  /// all_eigenvalues covers (-w, w) with w = window_factor * edge; 0 skips it.
  double window_factor = 0;
  bool eigenfunctions = true;
};

SpectrumResult solve_spectrum_matrix(const HalfLineOperatorSpec& spec, const GridSpec& grid,
                                     const MatrixSolveOptions& opt = {});

/// Orthonormal eigenframe (nodal values) of the matrix eigenvalues in (lo, hi).
struct MatrixWindow {
  Eigen::VectorXd eigenvalues;
  Frame frame;
  int far_end_states = 0;
};
MatrixWindow matrix_window(const HalfLineOperatorSpec& spec, const GridSpec& grid, double lo, double hi,
                           bool drop_far_end = true);

/// Fraction of the squared norm of a nodal vector on the far half of the grid.
double far_end_weight(const GridSpec& grid, int components, const Eigen::VectorXcd& nodal);

// --- Evans function --------------------------------------------------------

struct EvansOptions {
  double step = 1e-2;            // upper bound on the integration step
  double threshold = 1e-12;      // potential cutoff defining z_max
  double steps_per_decay = 20;   // at least this many steps per 1 / alpha of the potential

  /// Coarser stepping for sweeps over large parameter grids.
  static EvansOptions survey() { return {0.1, 1e-7, 10}; }
};

/// Precomputed data for repeated Evans evaluations of one operator.
class EvansContext {
 public:
  explicit EvansContext(const HalfLineOperatorSpec& spec, const EvansOptions& opt = {});

  const HalfLineOperatorSpec& spec() const { return spec_; }
  double essential_edge() const { return edge_; }
  double z_max() const { return zmax_; }
  double step() const { return h_; }

  /// det(Gamma - W(0)) / 2^k, where lower = W upper on decaying solutions.
  cd evans(double lambda) const;
  /// The unitary W(0) at energy lambda.
  Eigen::MatrixXcd matching_matrix(double lambda) const;
  /// Eigenphases of Gamma^dagger W(0) in (-pi, pi], ascending.
  Eigen::VectorXd eigenphases(double lambda) const;
  /// Decaying eigenfunction at an eigenvalue lambda, unit L^2 norm, phase fixed.
  /// Returns a k-column frame when the eigenvalue is degenerate.
  std::vector<SampledFunction> eigenfunctions(double lambda, int multiplicity) const;

 private:
  struct Path {
    Eigen::MatrixXcd w0;
    std::vector<Eigen::MatrixXcd> w;  // W at nodes z_j, j = 0..J
    std::vector<Eigen::MatrixXcd> t;  // renormalization T_j
  };
  double unscaled(double lambda) const;
  Eigen::MatrixXcd asymptotic_w(double e, Eigen::MatrixXcd* decaying = nullptr,
                                Eigen::VectorXcd* rates = nullptr) const;
  Path integrate(double e, bool keep) const;

  HalfLineOperatorSpec spec_;
  EvansOptions opt_;
  double edge_ = 0;
  double zmax_ = 0;
  double h_ = 0;
  int steps_ = 0;
  bool scalar_mass_ = false;  // M^dagger M = m^2 1
  Eigen::MatrixXcd s_;        // sigma_3 x 1_k
  std::vector<Eigen::Matrix4cd> c_;  // -i S (B + V(z)) at z = j h / 2, zero padded
};

cd evans_function(const HalfLineOperatorSpec& spec, double lambda, const EvansOptions& opt = {});

struct MidgapOptions {
  double resolution = 0.05;   // scan spacing for sign changes
  double root_tol = 1e-10;
  /// Restrict the search to (lo, hi) intersected with the open gap.
  std::optional<double> lo, hi;
  bool eigenfunctions = true;
  double delta_edge = 0;  // roots with |lambda| >= edge (1 - delta_edge) are dropped
};

std::vector<MidgapState> find_midgap_eigenvalues(const EvansContext& ctx, const MidgapOptions& opt = {});
std::vector<MidgapState> find_midgap_eigenvalues(const HalfLineOperatorSpec& spec, double resolution,
                                                 const EvansOptions& eopt = {});

/// The operator divided by its essential edge, and the factor used.
std::pair<HalfLineOperatorSpec, double> normalize_gap(const HalfLineOperatorSpec& spec);

struct ConjugateReport {
  std::vector<double> variable_domain;  // spectrum of the Weyl fiber
  std::vector<double> fixed_domain;     // spectrum of the conjugated form
  double max_difference = 0;
  bool pass = false;
};

/// Compare the midgap spectra of the Weyl fiber with boundary condition
/// matrix(gamma) and of dirac_sp1_fixed(conj(q) gamma).
ConjugateReport conjugate_check(const Quaterniond& q, const Quaterniond& gamma, double tol = 1e-6);

/// Phase convention shared with the exact oracles: the first component
/// of modulus above 1e-12 (scanning the boundary value) is real positive.
void fix_phase(Eigen::Ref<Eigen::MatrixXcd> values);

}  // namespace halfdirac
