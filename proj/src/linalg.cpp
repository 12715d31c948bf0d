#include "halfdirac/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "halfdirac/error.hpp"

namespace halfdirac {

double hermiticity_defect(const Eigen::MatrixXcd& a) {
  if (a.rows() != a.cols()) throw ValidationError("matrix is not square");
  if (a.size() == 0) return 0.0;
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

void symmetrize(Eigen::MatrixXcd& a) {
  Eigen::MatrixXcd h = (a + a.adjoint()) * 0.5;
  a = std::move(h);
}

EigenDecomposition hermitian_eig(const Eigen::MatrixXcd& a, double tol) {
  const double defect = hermiticity_defect(a);
  const double scale = a.size() ? std::max(1.0, a.cwiseAbs().maxCoeff()) : 1.0;
  if (defect > tol * scale) {
    std::ostringstream os;
    os << "hermitian_eig: matrix is not Hermitian (||A - A^dagger||_max = " << defect << ")";
    throw ValidationError("not_hermitian", os.str());
  }
  EigenDecomposition out;
  if (a.rows() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a);
  if (es.info() != Eigen::Success) throw ComputationError("eig_failed", "hermitian_eig did not converge");
  out.values = es.eigenvalues();
  out.vectors = es.eigenvectors();
  return out;
}

Frame orthonormalize(const Eigen::MatrixXcd& f) {
  if (f.cols() == 0) return Frame(f.rows(), 0);
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(f);
  Frame q = qr.householderQ() * Eigen::MatrixXcd::Identity(f.rows(), f.cols());
  // Keep the orientation of the input: make diag(R) real positive.
  const Eigen::MatrixXcd& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < f.cols(); ++j) {
    const cd d = r(j, j);
    if (std::abs(d) > 0) q.col(j) *= d / std::abs(d);
  }
  return q;
}

cd frame_overlap_det(const Frame& f, const Frame& g) {
  if (f.rows() != g.rows()) throw ValidationError("dimension_mismatch", "frame_overlap_det: frames live in different spaces");
  if (f.cols() != g.cols()) {
    std::ostringstream os;
    os << "frame_overlap_det: rank mismatch (" << f.cols() << " vs " << g.cols() << ")";
    throw ValidationError("rank_mismatch", os.str());
  }
  if (f.cols() == 0) return cd(1.0, 0.0);
  const Eigen::MatrixXcd m = f.adjoint() * g;
  return m.determinant();
}

// ---------------------------------------------------------------------------

Eigen::Index BlockTridiagonal::size() const {
  Eigen::Index n = 0;
  for (const auto& d : diag) n += d.rows();
  return n;
}

std::vector<Eigen::Index> BlockTridiagonal::offsets() const {
  std::vector<Eigen::Index> off(diag.size() + 1, 0);
  for (size_t j = 0; j < diag.size(); ++j) off[j + 1] = off[j] + diag[j].rows();
  return off;
}

void BlockTridiagonal::validate(double tol) const {
  if (diag.empty()) throw ValidationError("block tridiagonal matrix has no blocks");
  if (upper.size() + 1 != diag.size()) throw ValidationError("block tridiagonal: need one coupling block per adjacent pair");
  for (size_t j = 0; j < diag.size(); ++j) {
    if (diag[j].rows() != diag[j].cols() || diag[j].rows() == 0)
      throw ValidationError("block tridiagonal: diagonal blocks must be square and nonempty");
    if ((diag[j] - diag[j].adjoint()).cwiseAbs().maxCoeff() > tol)
      throw ValidationError("not_hermitian", "block tridiagonal: diagonal block is not Hermitian");
  }
  for (size_t j = 0; j < upper.size(); ++j) {
    if (upper[j].rows() != diag[j].rows() || upper[j].cols() != diag[j + 1].rows())
      throw ValidationError("block tridiagonal: coupling block shape mismatch");
  }
}

Eigen::MatrixXcd BlockTridiagonal::to_dense() const {
  const auto off = offsets();
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(off.back(), off.back());
  for (size_t j = 0; j < diag.size(); ++j) {
    m.block(off[j], off[j], diag[j].rows(), diag[j].cols()) = diag[j];
    if (j < upper.size()) {
      m.block(off[j], off[j + 1], upper[j].rows(), upper[j].cols()) = upper[j];
      m.block(off[j + 1], off[j], upper[j].cols(), upper[j].rows()) = upper[j].adjoint();
    }
  }
  return m;
}

Eigen::MatrixXcd BlockTridiagonal::multiply(const Eigen::MatrixXcd& x) const {
  const auto off = offsets();
  if (x.rows() != off.back()) throw ValidationError("block tridiagonal multiply: size mismatch");
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const cd* xv = x.col(c).data();
    cd* yv = y.col(c).data();
    for (size_t j = 0; j < diag.size(); ++j) {
      const Eigen::Index o = off[j], nj = diag[j].rows();
      for (Eigen::Index q = 0; q < nj; ++q)
        for (Eigen::Index p = 0; p < nj; ++p) yv[o + p] += diag[j](p, q) * xv[o + q];
      if (j + 1 < diag.size()) {
        const Eigen::Index o1 = off[j + 1], n1 = diag[j + 1].rows();
        for (Eigen::Index q = 0; q < n1; ++q)
          for (Eigen::Index p = 0; p < nj; ++p) {
            const cd u = upper[j](p, q);
            yv[o + p] += u * xv[o1 + q];
            yv[o1 + q] += std::conj(u) * xv[o + p];
          }
      }
    }
  }
  return y;
}

namespace {

constexpr double kTinyPivot = 1e-290;

}  // namespace

namespace {

// Inertia of one Schur block: counts negatives and returns the inverse with
// tiny eigenvalues pushed away from zero.
template <typename M, typename Solver>
Eigen::Index block_inertia(M d, Solver& es, M* dinv) {
  d = (d + d.adjoint()).eval() * 0.5;
  es.compute(d);
  auto mu = es.eigenvalues().eval();
  Eigen::Index neg = 0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (mu(i) < 0) ++neg;
    if (std::abs(mu(i)) < kTinyPivot) mu(i) = mu(i) < 0 ? -kTinyPivot : kTinyPivot;
  }
  if (dinv) dinv->noalias() = es.eigenvectors() * mu.cwiseInverse().asDiagonal() * es.eigenvectors().adjoint();
  return neg;
}

}  // namespace

Eigen::Index count_below(const BlockTridiagonal& a, double sigma) {
  Eigen::Index negatives = 0;
  const std::size_t nb = a.diag.size();
  bool uniform = nb > 1;
  for (std::size_t j = 1; j < nb; ++j) uniform = uniform && a.diag[j].rows() == kMaxBlock;
  SmallMatrix dinv;
  Eigen::SelfAdjointEigenSolver<SmallMatrix> es;
  std::size_t j = 0;
  for (; j < (uniform ? 1 : nb); ++j) {
    SmallMatrix d = a.diag[j];
    d.diagonal().array() -= sigma;
    if (j > 0) d.noalias() -= a.upper[j - 1].adjoint() * dinv * a.upper[j - 1];
    negatives += block_inertia(d, es, j + 1 < nb ? &dinv : nullptr);
  }
  if (!uniform) return negatives;
  // Blocks 1.. are all kMaxBlock square: fixed-size arithmetic.
  using M4 = Eigen::Matrix<cd, kMaxBlock, kMaxBlock>;
  Eigen::SelfAdjointEigenSolver<M4> es4;
  M4 dinv4;
  {
    M4 d = a.diag[1];
    d.diagonal().array() -= sigma;
    d.noalias() -= a.upper[0].adjoint() * dinv * a.upper[0];
    negatives += block_inertia(d, es4, nb > 2 ? &dinv4 : nullptr);
  }
  for (j = 2; j < nb; ++j) {
    const M4 u = a.upper[j - 1];
    M4 d = a.diag[j];
    d.diagonal().array() -= sigma;
    d.noalias() -= u.adjoint() * dinv4 * u;
    negatives += block_inertia(d, es4, j + 1 < nb ? &dinv4 : nullptr);
  }
  return negatives;
}

Eigen::Index count_in(const BlockTridiagonal& a, double lo, double hi) {
  if (!(lo < hi)) return 0;
  // Eigenvalues equal to lo are excluded; an eigenvalue exactly at hi would
  // be counted only if it lay strictly below hi, so it is excluded too.
  return count_below(a, hi) - count_below(a, std::nextafter(lo, hi));
}

Eigen::VectorXd eigenvalues_in(const BlockTridiagonal& a, double lo, double hi, double tol) {
  std::vector<double> out;
  struct Piece {
    double lo, hi;
    Eigen::Index clo, chi;
  };
  if (!(lo < hi)) return Eigen::VectorXd();
  std::vector<Piece> stack{{lo, hi, count_below(a, lo), count_below(a, hi)}};
  while (!stack.empty()) {
    Piece p = stack.back();
    stack.pop_back();
    const Eigen::Index m = p.chi - p.clo;
    if (m <= 0) continue;
    if (p.hi - p.lo <= tol) {
      for (Eigen::Index i = 0; i < m; ++i) out.push_back(0.5 * (p.lo + p.hi));
      continue;
    }
    const double mid = 0.5 * (p.lo + p.hi);
    const Eigen::Index cm = count_below(a, mid);
    stack.push_back({mid, p.hi, cm, p.chi});
    stack.push_back({p.lo, mid, p.clo, cm});
  }
  std::sort(out.begin(), out.end());
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

ShiftedSolver::ShiftedSolver(const BlockTridiagonal& a, double sigma) {
  const auto off = a.offsets();
  n_ = off.back();
  for (Eigen::Index j = 0; j + 1 < a.blocks(); ++j) {
    const Eigen::Index end = j + 2 < static_cast<Eigen::Index>(off.size()) ? off[j + 2] : n_;
    kl_ = std::max(kl_, end - 1 - off[j]);
  }
  // Band storage with room for the fill-in of row interchanges:
  // A(i, c) lives at ab_(kl_ + kl_ + i - c, c).
  ab_ = Eigen::MatrixXcd::Zero(3 * kl_ + 1, n_);
  auto put = [&](Eigen::Index i, Eigen::Index c, cd v) { ab_(2 * kl_ + i - c, c) = v; };
  for (Eigen::Index j = 0; j < a.blocks(); ++j) {
    const auto& d = a.diag[j];
    for (Eigen::Index r = 0; r < d.rows(); ++r)
      for (Eigen::Index c = 0; c < d.cols(); ++c) put(off[j] + r, off[j] + c, d(r, c) - (r == c ? sigma : 0.0));
    if (j + 1 < a.blocks()) {
      const auto& u = a.upper[j];
      for (Eigen::Index r = 0; r < u.rows(); ++r)
        for (Eigen::Index c = 0; c < u.cols(); ++c) {
          put(off[j] + r, off[j + 1] + c, u(r, c));
          put(off[j + 1] + c, off[j] + r, std::conj(u(r, c)));
        }
    }
  }
  // Unblocked banded LU with partial pivoting.
  piv_.resize(n_);
  const Eigen::Index kv = 2 * kl_;
  Eigen::Index ju = 0;
  for (Eigen::Index j = 0; j < n_; ++j) {
    const Eigen::Index km = std::min(kl_, n_ - 1 - j);
    Eigen::Index p = 0;
    double best = std::abs(ab_(kv, j));
    for (Eigen::Index i = 1; i <= km; ++i)
      if (std::abs(ab_(kv + i, j)) > best) {
        best = std::abs(ab_(kv + i, j));
        p = i;
      }
    piv_[j] = j + p;
    if (best == 0) throw ComputationError("singular_pivot", "shifted solve: singular shift");
    ju = std::max(ju, std::min(j + kl_ + p, n_ - 1));
    if (p != 0)
      for (Eigen::Index c = j; c <= ju; ++c) std::swap(ab_(kv + j - c, c), ab_(kv + j + p - c, c));
    const cd inv = 1.0 / ab_(kv, j);
    for (Eigen::Index i = 1; i <= km; ++i) ab_(kv + i, j) *= inv;
    for (Eigen::Index c = j + 1; c <= ju; ++c) {
      const cd t = ab_(kv + j - c, c);
      if (t == cd(0)) continue;
      for (Eigen::Index i = 1; i <= km; ++i) ab_(kv + j + i - c, c) -= ab_(kv + i, j) * t;
    }
  }
}

Eigen::MatrixXcd ShiftedSolver::solve(const Eigen::MatrixXcd& b) const {
  if (b.rows() != n_) throw ValidationError("shifted_solve: right-hand side size mismatch");
  Eigen::MatrixXcd x = b;
  const Eigen::Index kv = 2 * kl_;
  for (Eigen::Index col = 0; col < x.cols(); ++col) {
    cd* v = x.col(col).data();
    for (Eigen::Index j = 0; j < n_; ++j) {
      if (piv_[j] != j) std::swap(v[j], v[piv_[j]]);
      const Eigen::Index km = std::min(kl_, n_ - 1 - j);
      for (Eigen::Index i = 1; i <= km; ++i) v[j + i] -= ab_(kv + i, j) * v[j];
    }
    for (Eigen::Index j = n_ - 1; j >= 0; --j) {
      v[j] /= ab_(kv, j);
      const Eigen::Index top = std::max<Eigen::Index>(0, j - kv);
      for (Eigen::Index i = top; i < j; ++i) v[i] -= ab_(kv + i - j, j) * v[j];
    }
  }
  if (!x.allFinite()) throw ComputationError("singular_pivot", "shifted solve: singular shift");
  return x;
}

Eigen::MatrixXcd shifted_solve(const BlockTridiagonal& a, double sigma, const Eigen::MatrixXcd& b) {
  return ShiftedSolver(a, sigma).solve(b);
}

namespace {

Eigen::MatrixXcd start_vectors(Eigen::Index n, Eigen::Index m) {
  std::mt19937_64 gen(0x5eed1234abcdULL);
  auto u = [&gen]() { return static_cast<double>(gen() >> 11) * 0x1.0p-53 * 2.0 - 1.0; };
  Eigen::MatrixXcd x(n, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < n; ++i) x(i, j) = cd(u(), u());
  return x;
}

EigenDecomposition rayleigh_ritz(const BlockTridiagonal& a, const Frame& q) {
  Eigen::MatrixXcd h = q.adjoint() * a.multiply(q);
  symmetrize(h);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  return {es.eigenvalues(), q * es.eigenvectors()};
}

}  // namespace

namespace {

// Twice-iterated classical Gram-Schmidt; enough for a handful of columns.
Frame gram_schmidt(Eigen::MatrixXcd q) {
  for (int pass = 0; pass < 2; ++pass) {
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      if (j > 0) {
        const Eigen::VectorXcd c = q.leftCols(j).adjoint() * q.col(j);
        q.col(j).noalias() -= q.leftCols(j) * c;
      }
      const double nrm = q.col(j).norm();
      if (!(nrm > 0) || !std::isfinite(nrm)) return orthonormalize(q);
      q.col(j) /= nrm;
    }
  }
  return q;
}

bool residual_ok(const BlockTridiagonal& a, const EigenDecomposition& e) {
  if (e.values.size() == 0) return true;
  const Eigen::MatrixXcd r = a.multiply(e.vectors) - e.vectors * e.values.asDiagonal();
  const double scale = std::max(1.0, e.values.cwiseAbs().maxCoeff());
  return r.colwise().norm().maxCoeff() <= 1e-8 * scale;
}

// Block inverse iteration at a fixed shift. After each sweep from the second
// on, the Ritz pairs are offered to accept(); iteration stops once it agrees.
template <typename Accept>
EigenDecomposition inverse_iteration(const BlockTridiagonal& a, double sigma, Eigen::Index m, int max_iterations,
                                     Accept&& accept) {
  const Eigen::Index n = a.size();
  if (m <= 0) return {Eigen::VectorXd(), Eigen::MatrixXcd(n, 0)};
  if (m > n) throw ValidationError("eigenpairs_near: more eigenpairs requested than the dimension");
  const Frame start = orthonormalize(start_vectors(n, m));
  double shift = sigma;
  for (int attempt = 0;; ++attempt) {
    try {
      const ShiftedSolver solver(a, shift);
      Frame q = start;
      EigenDecomposition e;
      for (int it = 1; it <= max_iterations; ++it) {
        q = gram_schmidt(solver.solve(q));
        if (it >= 2 || it == max_iterations) {
          e = rayleigh_ritz(a, q);
          if (it == max_iterations || accept(e)) break;
        }
      }
      return e;
    } catch (const ComputationError&) {
      if (attempt > 3) throw;
      shift = sigma + 1e-9 * std::pow(10.0, attempt) * std::max(1.0, std::abs(sigma));
    }
  }
}

}  // namespace

EigenDecomposition eigenpairs_near(const BlockTridiagonal& a, double sigma, Eigen::Index m, int iterations) {
  return inverse_iteration(a, sigma, m, std::max(1, iterations), [](const EigenDecomposition&) { return false; });
}

EigenDecomposition eigenpairs_in(const BlockTridiagonal& a, double lo, double hi) {
  const Eigen::Index n = a.size();
  const Eigen::Index m = count_in(a, lo, hi);
  if (m == 0) return {Eigen::VectorXd(), Eigen::MatrixXcd(n, 0)};
  auto select = [&](const EigenDecomposition& e) {
    std::vector<Eigen::Index> inside;
    for (Eigen::Index i = 0; i < e.values.size(); ++i)
      if (e.values(i) > lo && e.values(i) < hi) inside.push_back(i);
    EigenDecomposition out{Eigen::VectorXd(inside.size()), Eigen::MatrixXcd(n, inside.size())};
    for (size_t i = 0; i < inside.size(); ++i) {
      out.values(i) = e.values(inside[i]);
      out.vectors.col(i) = e.vectors.col(inside[i]);
    }
    return out;
  };
  // Cheap path: a block around the window centre, accepted only if exactly the
  // counted eigenvalues land inside and their Ritz residuals are small.
  const double centre = 0.5 * (lo + hi);
  const Eigen::Index guard = std::min<Eigen::Index>(n, m + 2);
  auto good = [&](const EigenDecomposition& e) {
    const EigenDecomposition s = select(e);
    return s.values.size() == m && residual_ok(a, s);
  };
  const EigenDecomposition near = inverse_iteration(a, centre, guard, 8, good);
  if (good(near)) return select(near);

  // Robust path: bisect every eigenvalue, then refine each cluster.
  const Eigen::VectorXd lam = eigenvalues_in(a, lo, hi, 1e-12 * std::max(1.0, hi - lo));
  EigenDecomposition out{Eigen::VectorXd(m), Eigen::MatrixXcd(n, m)};
  Eigen::Index col = 0;
  for (Eigen::Index i = 0; i < lam.size();) {
    Eigen::Index j = i + 1;
    while (j < lam.size() && lam(j) - lam(j - 1) <= 1e-9) ++j;
    const EigenDecomposition c =
        inverse_iteration(a, lam(i), j - i, 8, [&](const EigenDecomposition& e) { return residual_ok(a, e); });
    out.values.segment(col, j - i) = c.values;
    out.vectors.middleCols(col, j - i) = c.vectors;
    col += j - i;
    i = j;
  }
  return out;
}

}  // namespace halfdirac
