#pragma once

// Dense Hermitian eigensolver, frames and determinant overlaps, and a
// Sylvester-inertia eigensolver for block tridiagonal Hermitian matrices.

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace halfdirac {

using cd = std::complex<double>;

/// Column-orthonormal basis of a subspace of C^n.
using Frame = Eigen::MatrixXcd;

/// Largest block the tridiagonal solver handles; blocks live on the stack.
inline constexpr int kMaxBlock = 4;
using SmallMatrix = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxBlock, kMaxBlock>;

struct EigenDecomposition {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXcd vectors; // orthonormal columns
};

/// ||A - A^dagger||_max.
double hermiticity_defect(const Eigen::MatrixXcd& a);

/// Replace A by (A + A^dagger)/2.
void symmetrize(Eigen::MatrixXcd& a);

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending. Throws
/// ValidationError when ||A - A^dagger||_max > tol * max(1, ||A||_max).
EigenDecomposition hermitian_eig(const Eigen::MatrixXcd& a, double tol = 1e-12);

/// Orthonormal basis of the column span (thin Householder QR).
Frame orthonormalize(const Eigen::MatrixXcd& f);

/// det(F^dagger G); 1 for two empty frames. Throws on dimension or rank mismatch.
cd frame_overlap_det(const Frame& f, const Frame& g);

/// Hermitian matrix with diagonal blocks A_j and upper coupling blocks U_j
/// (block row j, block column j + 1). Block sizes may differ but are at most
/// kMaxBlock.
struct BlockTridiagonal {
  std::vector<SmallMatrix> diag;
  std::vector<SmallMatrix> upper;

  Eigen::Index blocks() const { return static_cast<Eigen::Index>(diag.size()); }
  Eigen::Index size() const;
  std::vector<Eigen::Index> offsets() const;

  Eigen::MatrixXcd to_dense() const;
  Eigen::MatrixXcd multiply(const Eigen::MatrixXcd& x) const;

  /// Structural checks: block shapes consistent, diagonal blocks Hermitian.
  void validate(double tol = 1e-12) const;
};

/// Number of eigenvalues strictly below sigma (Sylvester inertia of a block
/// LDL^dagger factorization of A - sigma).
Eigen::Index count_below(const BlockTridiagonal& a, double sigma);

/// Number of eigenvalues in the open interval (lo, hi).
Eigen::Index count_in(const BlockTridiagonal& a, double lo, double hi);

/// All eigenvalues in (lo, hi), ascending and repeated by multiplicity,
/// bisected to an interval width below tol.
Eigen::VectorXd eigenvalues_in(const BlockTridiagonal& a, double lo, double hi, double tol = 1e-12);

/// Banded LU factorization of A - sigma with partial pivoting, reusable
/// across right-hand sides.
class ShiftedSolver {
 public:
  ShiftedSolver(const BlockTridiagonal& a, double sigma);
  Eigen::MatrixXcd solve(const Eigen::MatrixXcd& b) const;

 private:
  Eigen::Index n_ = 0;
  Eigen::Index kl_ = 0;  // half bandwidth
  Eigen::MatrixXcd ab_;
  std::vector<Eigen::Index> piv_;
};

/// Solve (A - sigma) X = B. Throws ComputationError for a singular shift.
Eigen::MatrixXcd shifted_solve(const BlockTridiagonal& a, double sigma, const Eigen::MatrixXcd& b);

/// Eigenpairs for the m eigenvalues closest to sigma by block inverse
/// iteration followed by a Rayleigh-Ritz step. Start vectors are deterministic.
EigenDecomposition eigenpairs_near(const BlockTridiagonal& a, double sigma, Eigen::Index m,
                                   int iterations = 4);

/// Eigenpairs with eigenvalues in (lo, hi).
EigenDecomposition eigenpairs_in(const BlockTridiagonal& a, double lo, double hi);

}  // namespace halfdirac
