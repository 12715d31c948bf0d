#pragma once

// Topological invariants of operator families: spectral flow along loops,
// lattice Berry flux of window eigenbundles over S^2, the Dixmier-Douady
// invariant of the Fermi gerbe over S^3 by clutching, gap filling and the
// gerbe cocycle checks.

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "halfdirac/algebra.hpp"
#include "halfdirac/dirac_operator.hpp"
#include "halfdirac/linalg.hpp"

namespace halfdirac {

/// Eigenvalue search used for family sweeps: Evans roots divided by the
/// essential edge, so the gap is (-1, 1).
struct SurveyOptions {
  double resolution = 0.2;  // scan spacing, in units of the edge
  double root_tol = 1e-6;
  EvansOptions evans = EvansOptions::survey();
};

std::vector<double> gap_eigenvalues(const HalfLineOperatorSpec& spec, const SurveyOptions& opt = {});
/// Gap-normalized eigenvalues in (lo, hi) only, scanned with at least four
/// subintervals.
std::vector<double> gap_eigenvalues_in(const HalfLineOperatorSpec& spec, double lo, double hi,
                                       const SurveyOptions& opt = {});

// --- spectral flow ----------------------------------------------------------

struct ParamLoop {
  std::vector<cd> samples;  // omega_0 .. omega_{M-1}; omega_M = omega_0
  std::function<HalfLineOperatorSpec(cd)> generator;

  /// omega_j = exp(2 pi i (j + offset) / m).
  static ParamLoop circle(int m, std::function<HalfLineOperatorSpec(cd)> generator, int offset = 0);
};

/// Midgap eigenvalues (operator units) at every loop sample.
struct LoopSpectrum {
  std::vector<cd> samples;
  std::vector<double> edges;
  std::vector<std::vector<double>> eigenvalues;
};

struct LoopSolveOptions {
  double resolution = 0.02;
  double root_tol = 1e-12;
  EvansOptions evans;
  int threads = 0;
};

LoopSpectrum loop_spectrum(const ParamLoop& loop, const LoopSolveOptions& opt = {});

struct FlowOptions {
  double hit_tol = 1e-9;      // eigenvalue this close to the level counts as a hit
  double level_shift = 1e-6;  // shift applied to the level after a hit
  double edge_margin = 0.1;   // unmatched eigenvalues must lie within margin * edge of the band
};

struct FlowResult {
  int flow = 0;
  double level = 0;          // level actually used
  double shift = 0;          // level - requested level
  std::vector<int> crossings;  // signed count per segment j -> j + 1
};

/// Net signed number of eigenvalues crossing `level` upward along the loop.
/// Throws ComputationError("refine_needed") when consecutive samples cannot
/// be paired unambiguously.
FlowResult spectral_flow(const LoopSpectrum& spectrum, double level, const FlowOptions& opt = {});
FlowResult spectral_flow(const ParamLoop& loop, double level, const LoopSolveOptions& solve = {},
                         const FlowOptions& opt = {});

// --- Berry flux on S^2 ------------------------------------------------------

/// Latitude x longitude grid on S^2. Row i = 0..n_lat sits at polar angle
/// pi i / n_lat measured from the south pole -e3; rows 0 and n_lat are single
/// pole nodes. Longitude phi_j = 2 pi j / n_lon runs counterclockwise seen
/// from +e3. Plaquettes are traversed (i, j) -> (i+1, j) -> (i+1, j+1) -> (i, j+1).
struct S2Grid {
  int n_lat = 24;
  int n_lon = 48;

  int nodes() const { return 2 + (n_lat - 1) * n_lon; }
  int index(int i, int j) const;
  Eigen::Vector3d point(int i, int j) const;
  Eigen::Vector3d node_point(int idx) const;
  S2Grid refined() const { return {2 * n_lat, 2 * n_lon}; }
  void validate() const;
};

struct ChernOptions {
  double flux_limit = 0.9 * M_PI;  // plaquette flux beyond this asks for refinement
  double min_overlap = 1e-6;       // |det overlap| below this asks for refinement
  double integer_tol = 1e-3;
};

struct ChernResult {
  int chern = 0;
  double raw = 0;       // sum of plaquette fluxes / 2 pi
  double residual = 0;  // |raw - chern|
  double max_flux = 0;
  int rank = 0;
};

/// Lattice Chern number of the bundle spanned by frames[node] (indexed by
/// S2Grid::index). Gauge invariant: only products of determinant overlaps
/// around plaquettes enter.
ChernResult berry_flux_chern(const S2Grid& grid, const std::vector<Frame>& frames, const ChernOptions& opt = {});

/// frames[idx] = fn(grid.node_point(idx)), evaluated in parallel.
std::vector<Frame> frames_on(const S2Grid& grid, const std::function<Frame(const Eigen::Vector3d&)>& fn,
                             int threads = 0);

// --- S^3 families -------------------------------------------------------------

/// S^3 as latitude levels y = (cos chi_l, sin chi_l n), chi_l = pi l / n_chi,
/// l = 0..n_chi, with n on an S2Grid; levels 0 and n_chi are single points.
/// Family parameters are x = left * y * right (an SO(4) frame).
struct SphereGrid {
  S2Grid s2;
  int n_chi = 24;
  Quaterniond left = Quaterniond::identity();
  Quaterniond right = Quaterniond::identity();

  int level_nodes(int l) const { return (l == 0 || l == n_chi) ? 1 : s2.nodes(); }
  int nodes() const;
  /// Grid coordinates y of node (l, idx).
  Quaterniond grid_point(int l, int idx) const;
  /// Family parameter x of node (l, idx).
  Quaterniond point(int l, int idx) const;
  SphereGrid refined() const;
  void validate() const;
  /// A fixed generic frame: no S^3 latitude is aligned with Re(x).
  static SphereGrid tilted(int n_lat, int n_lon, int n_chi);
};

using FamilyFn = std::function<HalfLineOperatorSpec(const Quaterniond&)>;

/// Gap-normalized eigenvalues (gap_eigenvalues) at every node, level by level.
std::vector<std::vector<std::vector<double>>> sphere_spectra(const SphereGrid& grid, const FamilyFn& family,
                                                            const SurveyOptions& opt = {}, int threads = 0);

struct DDOptions {
  double epsilon = 0.1;
  double band = -1;    // half-width of the clutching band in y_r; < 0 means epsilon / 2
  double margin = -1;  // required distance of eigenvalues from +-epsilon; < 0 means epsilon / 4
  int matrix_n = 1500;
  double wilson_r = GridSpec{}.wilson_r;
  SurveyOptions survey;
  ChernOptions chern;
  int threads = 0;
};

struct DDResult {
  int dd = 0;
  double residual = 0;
  double max_flux = 0;
  int window_rank = 0;
  int nodes_checked = 0;
  int frame_nodes = 0;
  double grid_length = 0;
};

/// Dixmier-Douady invariant of the Fermi gerbe of a gap-normalized family over
/// S^3 via the two-set cover. Certified on the grid: -epsilon is avoided on
/// {y_r >= -band}, +epsilon on {y_r <= band}, and the window (-epsilon,
/// epsilon) has constant rank on the band. The result is the Chern number of
/// the window eigenbundle (matrix frames) over the equator y_r = 0. Throws
/// ComputationError("cover_violation") naming the offending node.
DDResult dd_invariant(const SphereGrid& grid, const FamilyFn& family, const DDOptions& opt = {});

// --- gap filling ------------------------------------------------------------

struct GapFillResult {
  double coverage = 0;
  double max_gap = 0;
  std::size_t eigenvalue_count = 0;
  double lo = 0, hi = 0;
};

/// Fraction of (-1 + delta, 1 - delta) within resolution of some eigenvalue,
/// and the longest uncovered subinterval.
GapFillResult gap_fill_report(std::vector<double> eigenvalues, double delta, double resolution);
GapFillResult gap_fill_report(const SphereGrid& grid, const FamilyFn& family, double delta, double resolution,
                              const SurveyOptions& opt = {}, int threads = 0);

struct CoverageBin {
  double center = 0;
  int count = 0;  // eigenvalues within resolution of the bin center
};
/// Per-level coverage on bins of width resolution across (-1 + delta, 1 - delta).
std::vector<CoverageBin> coverage_profile(std::vector<double> eigenvalues, double delta, double resolution);

// --- cocycle checks -----------------------------------------------------------

struct CocycleNode {
  int rank_ln = 0, rank_lm = 0, rank_mn = 0;
  double overlap_modulus = 1;
  bool pass = false;
};

struct CocycleReport {
  std::vector<CocycleNode> nodes;
  double worst_modulus_defect = 0;
  bool pass = false;
};

struct CocycleOptions {
  int matrix_n = 1500;
  double level_tol = 1e-6;  // eigenvalue this close to a level is an error
  double modulus_tol = 1e-6;
  int threads = 0;
};

/// At each operator: count(l, n) = count(l, m) + count(m, n), and the (l, n)
/// window frame and the concatenated (l, m) + (m, n) frames span the same
/// space (|det overlap| = 1). Levels are in units of the essential edge.
CocycleReport cocycle_consistency(const std::vector<HalfLineOperatorSpec>& specs, double l, double m, double n,
                                  const CocycleOptions& opt = {});

}  // namespace halfdirac
