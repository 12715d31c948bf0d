#include "halfdirac/dirac_operator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "halfdirac/error.hpp"

namespace halfdirac {

namespace {

constexpr double kUnitTol = 1e-10;

Eigen::MatrixXcd sigma3_block(int k) {
  Eigen::MatrixXcd s = Eigen::MatrixXcd::Identity(2 * k, 2 * k);
  s.bottomRightCorner(k, k) *= -1.0;
  return s;
}

double spectral_norm(const Eigen::MatrixXcd& m) {
  return Eigen::JacobiSVD<Eigen::MatrixXcd>(m).singularValues()(0);
}

// Isometry onto the boundary subspace {(u, Gamma u)}.
Eigen::MatrixXcd boundary_isometry(const BoundaryCondition& bc) {
  const int k = bc.k();
  Eigen::MatrixXcd p(2 * k, k);
  p.topRows(k) = Eigen::MatrixXcd::Identity(k, k);
  p.bottomRows(k) = bc.gamma;
  return p / std::sqrt(2.0);
}

}  // namespace

// --- specs -----------------------------------------------------------------

BoundaryCondition BoundaryCondition::u1(cd omega) {
  BoundaryCondition bc;
  bc.gamma = Eigen::MatrixXcd::Constant(1, 1, omega);
  return bc;
}

BoundaryCondition BoundaryCondition::u2(const Eigen::Matrix2cd& gamma) {
  BoundaryCondition bc;
  bc.gamma = gamma;
  const Quaterniond q = Quaterniond::from_matrix(gamma);
  bc.sp1 = (q.matrix() - gamma).cwiseAbs().maxCoeff() <= kUnitTol && std::abs(q.norm() - 1) <= kUnitTol;
  return bc;
}

BoundaryCondition BoundaryCondition::from_quaternion(const Quaterniond& q) {
  if (std::abs(q.norm() - 1) > kUnitTol) throw ValidationError("boundary quaternion must be a unit quaternion");
  BoundaryCondition bc;
  bc.gamma = q.matrix();
  bc.sp1 = true;
  return bc;
}

void BoundaryCondition::validate() const {
  if (gamma.rows() != gamma.cols() || (gamma.rows() != 1 && gamma.rows() != 2))
    throw ValidationError("boundary condition must be 1x1 (U(1)) or 2x2 (U(2))");
  const double d = (gamma.adjoint() * gamma - Eigen::MatrixXcd::Identity(k(), k())).cwiseAbs().maxCoeff();
  if (d > kUnitTol) {
    std::ostringstream os;
    os << "boundary condition is not unitary (defect " << d << ")";
    throw ValidationError("non_unitary_bc", os.str());
  }
}

Eigen::MatrixXcd PotentialSpec::at(double z, Eigen::Index dim) const {
  Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(dim, dim);
  for (const auto& t : terms) v += (t.c * std::exp(-t.alpha * z)) * t.m;
  return v;
}

double PotentialSpec::max_alpha() const {
  double a = 0;
  for (const auto& t : terms) a = std::max(a, t.alpha);
  return a;
}

double PotentialSpec::strength() const {
  double s = 0;
  for (const auto& t : terms) s += std::abs(t.c) * spectral_norm(t.m);
  return s;
}

double PotentialSpec::cutoff(double threshold) const {
  auto size = [&](double z) {
    double s = 0;
    for (const auto& t : terms) s += std::abs(t.c) * spectral_norm(t.m) * std::exp(-t.alpha * z);
    return s;
  };
  if (size(0) <= threshold) return 0;
  double lo = 0, hi = 1;
  while (size(hi) > threshold) hi *= 2;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (size(mid) > threshold ? lo : hi) = mid;
  }
  return hi;
}

void PotentialSpec::validate(Eigen::Index dim) const {
  for (const auto& t : terms) {
    if (!(t.alpha > 0) || !std::isfinite(t.alpha)) throw ValidationError("potential decay rate alpha must be positive");
    if (!std::isfinite(t.c)) throw ValidationError("potential coefficient must be finite");
    if (t.m.rows() != dim || t.m.cols() != dim) {
      std::ostringstream os;
      os << "potential matrix must be " << dim << "x" << dim;
      throw ValidationError("size_mismatch", os.str());
    }
    if (hermiticity_defect(t.m) > 1e-12) throw ValidationError("not_hermitian", "potential matrix must be Hermitian");
  }
}

Eigen::MatrixXcd HalfLineOperatorSpec::mass_matrix() const {
  const int kk = k();
  Eigen::MatrixXcd b = Eigen::MatrixXcd::Zero(2 * kk, 2 * kk);
  b.topRightCorner(kk, kk) = mass;
  b.bottomLeftCorner(kk, kk) = mass.adjoint();
  return b;
}

double HalfLineOperatorSpec::essential_edge() const {
  const auto sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(mass).singularValues();
  return std::abs(scale) * sv(sv.size() - 1);
}

void HalfLineOperatorSpec::validate() const {
  if (mass.rows() != mass.cols() || (mass.rows() != 1 && mass.rows() != 2))
    throw ValidationError("mass block must be 1x1 or 2x2");
  bc.validate();
  if (bc.k() != k()) throw ValidationError("size_mismatch", "boundary condition size does not match the mass term");
  potential.validate(components());
  if (!(scale > 0) || !std::isfinite(scale)) throw ValidationError("operator scale must be positive");
  if (!(essential_edge() > 0)) throw ValidationError("gapless", "massless operator: the essential gap is empty");
}

HalfLineOperatorSpec dirac_u1(double rho, cd omega, PotentialSpec v) {
  if (!(rho > 0)) throw ValidationError("gapless", "rho must be positive");
  if (std::abs(std::abs(omega) - 1) > kUnitTol) throw ValidationError("omega must have unit modulus");
  HalfLineOperatorSpec s;
  s.mass = Eigen::MatrixXcd::Constant(1, 1, rho);
  s.bc = BoundaryCondition::u1(omega);
  s.potential = std::move(v);
  return s;
}

HalfLineOperatorSpec dirac_sp1(const Quaterniond& q, PotentialSpec v) {
  HalfLineOperatorSpec s;
  s.mass = Eigen::MatrixXcd::Identity(2, 2);
  s.bc = BoundaryCondition::from_quaternion(q);
  s.potential = std::move(v);
  return s;
}

HalfLineOperatorSpec dirac_sp1_fixed(const Quaterniond& q, PotentialSpec v) {
  if (std::abs(q.norm() - 1) > kUnitTol) throw ValidationError("mass quaternion must be a unit quaternion");
  HalfLineOperatorSpec s;
  s.mass = q.matrix();
  s.bc = BoundaryCondition::from_quaternion(Quaterniond::identity());
  s.potential = std::move(v);
  return s;
}

HalfLineOperatorSpec weyl_fiber_operator(const Quaterniond& q, const Eigen::Matrix2cd& gamma, PotentialSpec v) {
  HalfLineOperatorSpec s;
  s.mass = q.conjugate().matrix();
  s.bc = BoundaryCondition::u2(gamma);
  s.potential = std::move(v);
  return s;
}

void GridSpec::validate() const {
  if (!(L > 0) || !std::isfinite(L)) throw ValidationError("grid length L must be positive");
  if (N < 2) throw ValidationError("grid needs at least two points");
  if (!(wilson_r > 0 && wilson_r <= 1)) throw ValidationError("wilson_r must lie in (0, 1]");
}

GridSpec GridSpec::for_decay(double decay, int n, double cap, bool* capped) {
  GridSpec g;
  g.N = n;
  const double want = decay > 0 ? std::log(1e8) / decay : std::numeric_limits<double>::infinity();
  g.L = std::min(cap, want);
  if (capped) *capped = want > cap;
  return g;
}

// --- matrix method ---------------------------------------------------------

BlockTridiagonal assemble_blocks(const HalfLineOperatorSpec& spec, const GridSpec& grid) {
  spec.validate();
  grid.validate();
  const int k = spec.k();
  const int n = 2 * k;
  const double h = grid.h();
  const double r = grid.wilson_r;
  const Eigen::MatrixXcd b = spec.mass_matrix();
  // Wilson term along [[0, Gamma^dagger], [Gamma, 0]]: lattice doublers then
  // meet the boundary condition at the edge of their own gap and do not bind.
  Eigen::MatrixXcd bhat = Eigen::MatrixXcd::Zero(2 * k, 2 * k);
  bhat.topRightCorner(k, k) = spec.bc.gamma.adjoint();
  bhat.bottomLeftCorner(k, k) = spec.bc.gamma;
  const Eigen::MatrixXcd s = sigma3_block(k);
  const Eigen::MatrixXcd p = boundary_isometry(spec.bc);
  const double sc = spec.scale;

  const Eigen::MatrixXcd up = (cd(0, -1) / (2 * h)) * s - (r / (2 * h)) * bhat;
  const Eigen::MatrixXcd bulk = b + (r / h) * bhat;

  BlockTridiagonal a;
  a.diag.reserve(grid.N);
  a.upper.reserve(grid.N - 1);
  for (int j = 0; j < grid.N; ++j) {
    const double z = j * h;
    Eigen::MatrixXcd d = (j == 0 ? Eigen::MatrixXcd(b + (r / (2 * h)) * bhat) : bulk);
    if (!spec.potential.empty()) d += spec.potential.at(z, n);
    if (j == 0) {
      Eigen::MatrixXcd c = p.adjoint() * d * p;
      c = (c + c.adjoint()).eval() * 0.5;
      a.diag.emplace_back(sc * c);
      a.upper.emplace_back(sc * (p.adjoint() * up));
    } else {
      d = (d + d.adjoint()).eval() * 0.5;
      a.diag.emplace_back(sc * d);
      if (j + 1 < grid.N) a.upper.emplace_back(sc * up);
    }
  }
  return a;
}

Eigen::MatrixXcd assemble_matrix(const HalfLineOperatorSpec& spec, const GridSpec& grid) {
  Eigen::MatrixXcd m = assemble_blocks(spec, grid).to_dense();
  symmetrize(m);
  return m;
}

Eigen::MatrixXcd expand_boundary(const HalfLineOperatorSpec& spec, const Eigen::MatrixXcd& x) {
  const int k = spec.k();
  Eigen::MatrixXcd out(x.rows() + k, x.cols());
  out.topRows(2 * k) = boundary_isometry(spec.bc) * x.topRows(k);
  out.bottomRows(x.rows() - k) = x.bottomRows(x.rows() - k);
  return out;
}

void fix_phase(Eigen::Ref<Eigen::MatrixXcd> values) {
  // Column-major scan: all components at the first sample come first.
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      const cd v = values(i, j);
      if (std::abs(v) > 1e-12) {
        values *= std::conj(v) / std::abs(v);
        return;
      }
    }
  }
}

namespace {

SampledFunction nodal_function(const HalfLineOperatorSpec& spec, const GridSpec& grid, const Eigen::VectorXcd& v) {
  const int c = spec.components();
  SampledFunction f;
  f.z.resize(grid.N);
  for (int j = 0; j < grid.N; ++j) f.z[j] = j * grid.h();
  f.values = Eigen::Map<const Eigen::MatrixXcd>(v.data(), c, grid.N) / std::sqrt(grid.h());
  fix_phase(f.values);
  return f;
}

}  // namespace

double far_end_weight(const GridSpec& grid, int components, const Eigen::VectorXcd& nodal) {
  const Eigen::Index half = components * (grid.N / 2);
  return nodal.tail(nodal.size() - half).squaredNorm() / nodal.squaredNorm();
}

MatrixWindow matrix_window(const HalfLineOperatorSpec& spec, const GridSpec& grid, double lo, double hi,
                           bool drop_far_end) {
  const BlockTridiagonal a = assemble_blocks(spec, grid);
  const EigenDecomposition e = eigenpairs_in(a, lo, hi);
  const Eigen::MatrixXcd nodal = expand_boundary(spec, e.vectors);
  MatrixWindow out;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < e.values.size(); ++i) {
    if (drop_far_end && far_end_weight(grid, spec.components(), nodal.col(i)) > 0.5) {
      ++out.far_end_states;
    } else {
      keep.push_back(i);
    }
  }
  out.eigenvalues.resize(static_cast<Eigen::Index>(keep.size()));
  out.frame.resize(nodal.rows(), static_cast<Eigen::Index>(keep.size()));
  for (size_t i = 0; i < keep.size(); ++i) {
    out.eigenvalues(i) = e.values(keep[i]);
    out.frame.col(i) = nodal.col(keep[i]);
  }
  return out;
}

SpectrumResult solve_spectrum_matrix(const HalfLineOperatorSpec& spec, const GridSpec& grid,
                                     const MatrixSolveOptions& opt) {
  const BlockTridiagonal a = assemble_blocks(spec, grid);
  SpectrumResult out;
  out.essential_edge = spec.essential_edge();
  const double w = out.essential_edge * (1 - opt.delta_edge);
  const EigenDecomposition e = eigenpairs_in(a, -w, w);
  const Eigen::MatrixXcd nodal = expand_boundary(spec, e.vectors);
  const int c = spec.components();
  for (Eigen::Index i = 0; i < e.values.size();) {
    Eigen::Index j = i + 1;
    while (j < e.values.size() && e.values(j) - e.values(j - 1) <= 1e-9 * out.essential_edge) ++j;
    // States living on the far half are artifacts of the truncation at z = L.
    if (far_end_weight(grid, c, nodal.col(i)) > 0.5) {
      out.far_end_states += static_cast<int>(j - i);
      i = j;
      continue;
    }
    MidgapState m;
    m.eigenvalue = e.values(i);
    m.multiplicity = static_cast<int>(j - i);
    if (opt.eigenfunctions) m.eigenfunction = nodal_function(spec, grid, nodal.col(i));
    out.midgap.push_back(std::move(m));
    i = j;
  }
  if (opt.window_factor > 0) {
    const double ww = opt.window_factor * out.essential_edge;
    out.all_eigenvalues = eigenvalues_in(a, -ww, ww, 1e-10 * out.essential_edge);
  }
  return out;
}

// --- Evans function --------------------------------------------------------

EvansContext::EvansContext(const HalfLineOperatorSpec& spec, const EvansOptions& opt) : spec_(spec), opt_(opt) {
  spec_.validate();
  if (!(opt.step > 0)) throw ValidationError("Evans step must be positive");
  if (!(opt.threshold > 0 && opt.steps_per_decay > 0)) throw ValidationError("Evans options must be positive");
  const int k = spec_.k();
  edge_ = spec_.essential_edge();
  s_ = sigma3_block(k);
  const Eigen::MatrixXcd mm = spec_.mass.adjoint() * spec_.mass;
  scalar_mass_ = (mm - mm(0, 0).real() * Eigen::MatrixXcd::Identity(k, k)).cwiseAbs().maxCoeff() <=
                 1e-13 * std::max(1.0, mm.cwiseAbs().maxCoeff());
  zmax_ = spec_.potential.empty() ? 0.0 : spec_.potential.cutoff(opt.threshold);
  double hmax = opt.step;
  if (!spec_.potential.empty()) hmax = std::min(hmax, 1.0 / (opt.steps_per_decay * spec_.potential.max_alpha()));
  steps_ = zmax_ > 0 ? static_cast<int>(std::ceil(zmax_ / hmax)) : 0;
  h_ = steps_ > 0 ? zmax_ / steps_ : 0.0;
  const Eigen::MatrixXcd b = spec_.mass_matrix();
  const cd mi(0, -1);
  c_.reserve(2 * steps_ + 1);
  for (int i = 0; i <= 2 * steps_; ++i) {
    const double z = 0.5 * i * h_;
    Eigen::Matrix4cd c = Eigen::Matrix4cd::Zero();
    c.topLeftCorner(2 * k, 2 * k) = mi * s_ * (b + spec_.potential.at(z, 2 * k));
    c_.push_back(c);
  }
}

double EvansContext::unscaled(double lambda) const {
  if (!(std::abs(lambda) < edge_)) {
    std::ostringstream os;
    os << "Evans function needs lambda in the open gap (-" << edge_ << ", " << edge_ << "), got " << lambda;
    throw ValidationError("outside_gap", os.str());
  }
  return lambda / spec_.scale;
}

Eigen::MatrixXcd EvansContext::asymptotic_w(double e, Eigen::MatrixXcd* decaying, Eigen::VectorXcd* rates) const {
  const int k = spec_.k();
  if (scalar_mass_) {
    const double m2 = (spec_.mass.adjoint() * spec_.mass)(0, 0).real();
    const double kappa = std::sqrt(m2 - e * e);
    Eigen::MatrixXcd w = (cd(0, -1) / cd(kappa, -e)) * spec_.mass.adjoint();
    if (decaying) {
      decaying->resize(2 * k, k);
      decaying->topRows(k) = Eigen::MatrixXcd::Identity(k, k);
      decaying->bottomRows(k) = w;
    }
    if (rates) *rates = Eigen::VectorXcd::Constant(k, cd(-kappa, 0));
    return w;
  }
  const Eigen::MatrixXcd a = cd(0, 1) * s_ * (e * Eigen::MatrixXcd::Identity(2 * k, 2 * k) - spec_.mass_matrix());
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(a);
  Eigen::MatrixXcd v(2 * k, k);
  Eigen::VectorXcd mu(k);
  int col = 0;
  for (int i = 0; i < 2 * k; ++i) {
    if (es.eigenvalues()(i).real() < 0) {
      if (col == k) break;
      v.col(col) = es.eigenvectors().col(i);
      mu(col++) = es.eigenvalues()(i);
    }
  }
  if (col != k) throw ComputationError("asymptotics", "asymptotic system has the wrong number of decaying modes");
  const Eigen::MatrixXcd w = v.bottomRows(k) * v.topRows(k).inverse();
  if (decaying) *decaying = v;
  if (rates) *rates = mu;
  return w;
}

namespace {

// Backward RK4 for Y' = (i e S + C(z)) Y on fixed-size blocks, renormalized
// each step so the top k x k block is the identity.
template <int K, typename Path, typename Blowup>
Eigen::MatrixXcd integrate_fixed(const std::vector<Eigen::Matrix4cd>& c, double e, double h, int steps,
                                 const Eigen::MatrixXcd& w_inf, Path* path, Blowup&& blowup) {
  constexpr int N = 2 * K;
  using Mat = Eigen::Matrix<cd, N, N>;
  using Blk = Eigen::Matrix<cd, N, K>;
  using Sq = Eigen::Matrix<cd, K, K>;
  Mat ies = Mat::Zero();
  for (int i = 0; i < N; ++i) ies(i, i) = cd(0, i < K ? e : -e);
  Blk y;
  y.template topRows<K>().setIdentity();
  y.template bottomRows<K>() = w_inf;
  Blk k1, k2, k3, k4;
  for (int j = steps - 1; j >= 0; --j) {
    const Mat a1 = ies + c[2 * j + 2].template topLeftCorner<N, N>();
    const Mat a2 = ies + c[2 * j + 1].template topLeftCorner<N, N>();
    const Mat a4 = ies + c[2 * j].template topLeftCorner<N, N>();
    k1.noalias() = a1 * y;
    k2.noalias() = a2 * (y - (0.5 * h) * k1);
    k3.noalias() = a2 * (y - (0.5 * h) * k2);
    k4.noalias() = a4 * (y - h * k3);
    y -= (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const Sq t = y.template topRows<K>();
    const Sq tinv = t.inverse();
    if (!tinv.allFinite() || !y.allFinite()) blowup(j);
    const Sq lower = y.template bottomRows<K>() * tinv;
    y.template bottomRows<K>() = lower;
    y.template topRows<K>().setIdentity();
    if (path) {
      path->t[j] = t;
      path->w[j] = lower;
    }
  }
  return y.template bottomRows<K>();
}

}  // namespace

EvansContext::Path EvansContext::integrate(double e, bool keep) const {
  const int k = spec_.k();
  Path path;
  Eigen::MatrixXcd w = asymptotic_w(e);
  if (keep) {
    path.w.resize(steps_ + 1);
    path.t.resize(steps_);
    path.w[steps_] = w;
  }
  if (steps_ == 0) {
    path.w0 = w;
    return path;
  }
  const auto blowup = [&](int j) {
    std::ostringstream os;
    os << "Evans integration blew up at z = " << j * h_ << " (lambda = " << e * spec_.scale << ")";
    throw ComputationError("integration_blowup", os.str());
  };
  if (k == 1) {
    path.w0 = integrate_fixed<1>(c_, e, h_, steps_, w, keep ? &path : nullptr, blowup);
  } else {
    path.w0 = integrate_fixed<2>(c_, e, h_, steps_, w, keep ? &path : nullptr, blowup);
  }
  return path;
}

Eigen::MatrixXcd EvansContext::matching_matrix(double lambda) const {
  return integrate(unscaled(lambda), false).w0;
}

cd EvansContext::evans(double lambda) const {
  const Eigen::MatrixXcd w = matching_matrix(lambda);
  const int k = spec_.k();
  return (spec_.bc.gamma - w).determinant() / std::pow(2.0, k);
}

Eigen::VectorXd EvansContext::eigenphases(double lambda) const {
  const Eigen::MatrixXcd u = spec_.bc.gamma.adjoint() * matching_matrix(lambda);
  Eigen::VectorXd ph(u.rows());
  if (u.rows() == 1) {
    ph(0) = std::arg(u(0, 0));
  } else {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(u, false);
    for (Eigen::Index i = 0; i < u.rows(); ++i) ph(i) = std::arg(es.eigenvalues()(i));
    std::sort(ph.data(), ph.data() + ph.size());
  }
  return ph;
}

namespace {

// Composite Simpson weights on n + 1 equispaced nodes (trapezoid on a final
// odd interval).
std::vector<double> quadrature_weights(int n, double h) {
  std::vector<double> wts(n + 1, 0.0);
  if (n == 0) return wts;
  const int even = n - (n % 2);
  for (int i = 0; i < even; i += 2) {
    wts[i] += h / 3;
    wts[i + 1] += 4 * h / 3;
    wts[i + 2] += h / 3;
  }
  if (even < n) {
    wts[n - 1] += h / 2;
    wts[n] += h / 2;
  }
  return wts;
}

}  // namespace

std::vector<SampledFunction> EvansContext::eigenfunctions(double lambda, int multiplicity) const {
  const int k = spec_.k();
  const int n = 2 * k;
  const double e = unscaled(lambda);
  const Path path = integrate(e, true);
  const int m = std::max(1, std::min(multiplicity, k));

  // Boundary data: kernel of Gamma - W(0).
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(spec_.bc.gamma - path.w0, Eigen::ComputeFullV);
  const Eigen::MatrixXcd c0 = svd.matrixV().rightCols(m);

  // Nodes on [0, z_max].
  const int jn = steps_;
  std::vector<Eigen::MatrixXcd> psi(jn + 1);
  Eigen::MatrixXcd c = c0;
  for (int j = 0; j <= jn; ++j) {
    const Eigen::MatrixXcd& w = (jn == 0 ? path.w0 : path.w[j]);
    psi[j].resize(n, m);
    psi[j].topRows(k) = c;
    psi[j].bottomRows(k) = w * c;
    if (j < jn) c = path.t[j].lu().solve(c);
  }

  // Tail beyond z_max from the constant-coefficient decaying modes.
  Eigen::MatrixXcd vd;
  Eigen::VectorXcd mu;
  asymptotic_w(e, &vd, &mu);
  const Eigen::MatrixXcd amp = vd.colPivHouseholderQr().solve(psi[jn]);  // k x m

  Eigen::MatrixXcd gram = Eigen::MatrixXcd::Zero(m, m);
  const auto wts = quadrature_weights(jn, h_);
  for (int j = 0; j <= jn && jn > 0; ++j) gram += wts[j] * psi[j].adjoint() * psi[j];
  const Eigen::MatrixXcd vv = vd.adjoint() * vd;
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) {
      const cd factor = vv(a, b) / (-(std::conj(mu(a)) + mu(b)));
      gram += factor * amp.row(a).adjoint() * amp.row(b);
    }
  gram = (gram + gram.adjoint()).eval() * 0.5;
  // Orthonormalize: X -> X L^{-dagger} with gram = L L^dagger.
  const Eigen::MatrixXcd linv = Eigen::MatrixXcd(gram.llt().matrixL()).inverse().adjoint();

  // Output samples: integration nodes, then the analytic tail until it has
  // decayed below 1e-10, at most 4000 extra samples.
  double slowest = std::numeric_limits<double>::infinity();
  for (int a = 0; a < k; ++a) slowest = std::min(slowest, -mu(a).real());
  const double tail_len = std::log(1e10) / slowest;
  const double base_h = jn > 0 ? h_ : opt_.step;
  const int tail_n = std::min(4000, std::max(1, static_cast<int>(std::ceil(tail_len / base_h))));
  const double tail_h = tail_len / tail_n;

  std::vector<SampledFunction> out(m);
  for (int col = 0; col < m; ++col) {
    SampledFunction& f = out[col];
    f.z.reserve(jn + 1 + tail_n);
    f.values.resize(n, jn + 1 + tail_n);
    for (int j = 0; j <= jn; ++j) {
      f.z.push_back(j * h_);
      f.values.col(j) = psi[j] * linv.col(col);
    }
    const Eigen::VectorXcd a = amp * linv.col(col);
    for (int t = 1; t <= tail_n; ++t) {
      const double dz = t * tail_h;
      Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n);
      for (int i = 0; i < k; ++i) v += vd.col(i) * (a(i) * std::exp(mu(i) * dz));
      f.z.push_back(zmax_ + dz);
      f.values.col(jn + t) = v;
    }
    fix_phase(f.values);
  }
  return out;
}

cd evans_function(const HalfLineOperatorSpec& spec, double lambda, const EvansOptions& opt) {
  return EvansContext(spec, opt).evans(lambda);
}

namespace {

// With U = Gamma^dagger W(lambda) and phi a continuous branch of arg det U,
// det(1 - U) exp(-i phi / 2) / (-2i)^k = prod_j sin(theta_j / 2) is real and
// changes sign exactly when an eigenphase theta_j crosses a multiple of 2 pi.
struct PhaseSample {
  double lambda = 0;
  double arg = 0;  // arg det U in (-pi, pi]
  cd d1;           // det(1 - U)
};

PhaseSample phase_sample(const EvansContext& ctx, double lambda) {
  const Eigen::MatrixXcd& gamma = ctx.spec().bc.gamma;
  const Eigen::MatrixXcd u = gamma.adjoint() * ctx.matching_matrix(lambda);
  PhaseSample s;
  s.lambda = lambda;
  if (u.rows() == 1) {
    s.arg = std::arg(u(0, 0));
    s.d1 = 1.0 - u(0, 0);
  } else {
    s.arg = std::arg(u(0, 0) * u(1, 1) - u(0, 1) * u(1, 0));
    s.d1 = (1.0 - u(0, 0)) * (1.0 - u(1, 1)) - u(0, 1) * u(1, 0);
  }
  return s;
}

double wrap_angle(double a) { return std::remainder(a, 2 * M_PI); }

double half_angle_product(const PhaseSample& s, double phi, int k) {
  const cd norm = k == 1 ? cd(0, -2) : cd(-4, 0);
  return (s.d1 * std::polar(1.0, -0.5 * phi) / norm).real();
}

// Safeguarded secant (Illinois) on a bracket with f(a) f(b) < 0.
template <typename F>
double bracket_root(F&& f, double a, double b, double fa, double fb, double tol) {
  int side = 0;
  double w3 = b - a;  // width three iterations ago
  for (int it = 0; it < 200 && b - a > tol; ++it) {
    if (it % 3 == 0) w3 = b - a;
    double c = (a * fb - b * fa) / (fb - fa);
    const double w = b - a;
    if (!(c > a + 0.01 * w && c < b - 0.01 * w)) c = 0.5 * (a + b);
    const double fc = f(c);
    if (fc == 0) return c;
    if ((fc < 0) == (fa < 0)) {
      a = c;
      fa = fc;
      if (side == -1) fb *= 0.5;
      side = -1;
    } else {
      b = c;
      fb = fc;
      if (side == 1) fa *= 0.5;
      side = 1;
    }
    // Plain bisection step when the secant stalls.
    if (it % 3 == 2 && b - a > 0.5 * w3) {
      const double m = 0.5 * (a + b);
      const double fm = f(m);
      if (fm == 0) return m;
      if ((fm < 0) == (fa < 0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
        fb = fm;
      }
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

std::vector<MidgapState> find_midgap_eigenvalues(const EvansContext& ctx, const MidgapOptions& opt) {
  if (!(opt.resolution > 0)) throw ValidationError("scan resolution must be positive");
  const double edge = ctx.essential_edge();
  const double inset = 1e-9 * edge;
  double lo = -edge + inset, hi = edge - inset;
  if (opt.lo) lo = std::max(lo, *opt.lo);
  if (opt.hi) hi = std::min(hi, *opt.hi);
  std::vector<MidgapState> out;
  if (!(lo < hi)) return out;

  const int n = std::max(1, static_cast<int>(std::ceil((hi - lo) / opt.resolution)));
  const int k = ctx.spec().k();
  // Scan nodes, refined wherever arg det U moves by more than 3 pi / 4 so the
  // branch phi can be continued unambiguously.
  std::vector<PhaseSample> nodes;
  std::vector<double> phi;
  nodes.push_back(phase_sample(ctx, lo));
  phi.push_back(nodes[0].arg);
  for (int i = 1; i <= n; ++i) {
    std::vector<double> pending{lo + (hi - lo) * i / n};
    while (!pending.empty()) {
      const double x = pending.back();
      const PhaseSample s = phase_sample(ctx, x);
      const double step = wrap_angle(s.arg - nodes.back().arg);
      if (std::abs(step) > 0.75 * M_PI && x - nodes.back().lambda > 1e-6 * edge) {
        pending.push_back(0.5 * (nodes.back().lambda + x));
        continue;
      }
      pending.pop_back();
      nodes.push_back(s);
      phi.push_back(phi.back() + step);
    }
  }
  std::vector<double> g(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) g[i] = half_angle_product(nodes[i], phi[i], k);

  std::vector<double> roots;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (g[i] == 0) {
      roots.push_back(nodes[i].lambda);
      continue;
    }
    if (i + 1 == nodes.size() || g[i + 1] == 0 || (g[i] < 0) == (g[i + 1] < 0)) continue;
    const double phi0 = phi[i], arg0 = nodes[i].arg;
    auto fn = [&](double x) {
      const PhaseSample s = phase_sample(ctx, x);
      return half_angle_product(s, phi0 + wrap_angle(s.arg - arg0), k);
    };
    roots.push_back(bracket_root(fn, nodes[i].lambda, nodes[i + 1].lambda, g[i], g[i + 1], opt.root_tol));
  }
  std::sort(roots.begin(), roots.end());
  std::vector<double> uniq;
  for (double r : roots)
    if (uniq.empty() || r - uniq.back() > std::max(1e-8 * edge, 10 * opt.root_tol)) uniq.push_back(r);

  for (double r : uniq) {
    if (opt.delta_edge > 0 && std::abs(r) >= edge * (1 - opt.delta_edge)) continue;
    MidgapState s;
    s.eigenvalue = r;
    const Eigen::VectorXd ph = ctx.eigenphases(r);
    s.multiplicity = 0;
    for (Eigen::Index i = 0; i < ph.size(); ++i)
      if (std::abs(ph(i)) < 1e-5) ++s.multiplicity;
    s.multiplicity = std::max(1, s.multiplicity);
    s.near_edge = std::abs(r) > edge - opt.resolution;
    if (opt.eigenfunctions) s.eigenfunction = ctx.eigenfunctions(r, s.multiplicity).front();
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<MidgapState> find_midgap_eigenvalues(const HalfLineOperatorSpec& spec, double resolution,
                                                 const EvansOptions& eopt) {
  MidgapOptions o;
  o.resolution = resolution;
  return find_midgap_eigenvalues(EvansContext(spec, eopt), o);
}

std::pair<HalfLineOperatorSpec, double> normalize_gap(const HalfLineOperatorSpec& spec) {
  spec.validate();
  const double edge = spec.essential_edge();
  HalfLineOperatorSpec out = spec;
  out.scale = spec.scale / edge;
  return {out, 1.0 / edge};
}

ConjugateReport conjugate_check(const Quaterniond& q, const Quaterniond& gamma, double tol) {
  ConjugateReport rep;
  MidgapOptions o;
  o.resolution = 0.02;
  o.eigenfunctions = false;
  const auto a = find_midgap_eigenvalues(EvansContext(weyl_fiber_operator(q, gamma.matrix())), o);
  const auto b = find_midgap_eigenvalues(EvansContext(dirac_sp1_fixed(q.conjugate() * gamma)), o);
  for (const auto& s : a) rep.variable_domain.push_back(s.eigenvalue);
  for (const auto& s : b) rep.fixed_domain.push_back(s.eigenvalue);
  rep.pass = rep.variable_domain.size() == rep.fixed_domain.size();
  for (size_t i = 0; rep.pass && i < a.size(); ++i)
    rep.max_difference = std::max(rep.max_difference, std::abs(rep.variable_domain[i] - rep.fixed_domain[i]));
  rep.pass = rep.pass && rep.max_difference <= tol;
  return rep;
}

}  // namespace halfdirac
