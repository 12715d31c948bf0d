#include "halfdirac/topology.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <tuple>

#include "halfdirac/error.hpp"
#include "halfdirac/parallel.hpp"

namespace halfdirac {

namespace {

std::vector<double> survey_roots(const HalfLineOperatorSpec& spec, const SurveyOptions& opt, std::optional<double> lo,
                                 std::optional<double> hi) {
  const EvansContext ctx(spec, opt.evans);
  const double edge = ctx.essential_edge();
  MidgapOptions o;
  o.resolution = opt.resolution * edge;
  if (lo && hi) o.resolution = std::min(o.resolution, (*hi - *lo) * edge / 4);
  o.root_tol = opt.root_tol * edge;
  o.eigenfunctions = false;
  if (lo) o.lo = *lo * edge;
  if (hi) o.hi = *hi * edge;
  std::vector<double> out;
  for (const auto& s : find_midgap_eigenvalues(ctx, o))
    for (int m = 0; m < s.multiplicity; ++m) out.push_back(s.eigenvalue / edge);
  return out;
}

}  // namespace

std::vector<double> gap_eigenvalues(const HalfLineOperatorSpec& spec, const SurveyOptions& opt) {
  return survey_roots(spec, opt, std::nullopt, std::nullopt);
}

std::vector<double> gap_eigenvalues_in(const HalfLineOperatorSpec& spec, double lo, double hi,
                                       const SurveyOptions& opt) {
  if (!(lo < hi)) throw ValidationError("eigenvalue window needs lo < hi");
  return survey_roots(spec, opt, lo, hi);
}

// --- spectral flow ----------------------------------------------------------

ParamLoop ParamLoop::circle(int m, std::function<HalfLineOperatorSpec(cd)> generator, int offset) {
  if (m < 3) throw ValidationError("a loop needs at least 3 samples");
  ParamLoop loop;
  loop.generator = std::move(generator);
  for (int j = 0; j < m; ++j) loop.samples.push_back(std::polar(1.0, 2 * M_PI * (j + offset) / m));
  return loop;
}

LoopSpectrum loop_spectrum(const ParamLoop& loop, const LoopSolveOptions& opt) {
  if (!loop.generator) throw ValidationError("loop has no operator generator");
  const std::size_t m = loop.samples.size();
  LoopSpectrum out;
  out.samples = loop.samples;
  out.edges.resize(m);
  out.eigenvalues.resize(m);
  parallel_for(
      m,
      [&](std::size_t j) {
        const EvansContext ctx(loop.generator(loop.samples[j]), opt.evans);
        MidgapOptions o;
        o.resolution = opt.resolution * ctx.essential_edge();
        o.root_tol = opt.root_tol * ctx.essential_edge();
        o.eigenfunctions = false;
        out.edges[j] = ctx.essential_edge();
        for (const auto& s : find_midgap_eigenvalues(ctx, o))
          for (int k = 0; k < s.multiplicity; ++k) out.eigenvalues[j].push_back(s.eigenvalue);
      },
      opt.threads);
  return out;
}

namespace {

std::string list_string(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(12);
  os << "[";
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << "]";
  return os.str();
}

double min_spacing(const std::vector<double>& v) {
  double s = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < v.size(); ++i) s = std::min(s, v[i] - v[i - 1]);
  return s;
}

}  // namespace

FlowResult spectral_flow(const LoopSpectrum& sp, double level, const FlowOptions& opt) {
  const std::size_t m = sp.eigenvalues.size();
  if (m < 2 || sp.edges.size() != m) throw ValidationError("loop spectrum needs at least 2 samples");
  const double edge = *std::min_element(sp.edges.begin(), sp.edges.end());
  if (!(std::abs(level) < edge * (1 - opt.edge_margin)))
    throw ValidationError("flow level must lie inside the gap, away from the band edges");

  FlowResult res;
  res.level = level;
  auto hit = [&](double lv) {
    for (const auto& ev : sp.eigenvalues)
      for (double x : ev)
        if (std::abs(x - lv) <= opt.hit_tol) return true;
    return false;
  };
  if (hit(level)) {
    res.level = level + opt.level_shift;
    res.shift = opt.level_shift;
    if (hit(res.level)) throw ComputationError("level_hit", "flow level hits an eigenvalue even after shifting");
  }
  const double lv = res.level;

  res.crossings.assign(m, 0);
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<double> a = sp.eigenvalues[j], b = sp.eigenvalues[(j + 1) % m];
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double seg_edge = std::min(sp.edges[j], sp.edges[(j + 1) % m]);
    const double spacing = std::min({min_spacing(a), min_spacing(b), 2 * seg_edge});

    std::vector<std::tuple<double, std::size_t, std::size_t>> cand;
    for (std::size_t p = 0; p < a.size(); ++p)
      for (std::size_t q = 0; q < b.size(); ++q) cand.emplace_back(std::abs(a[p] - b[q]), p, q);
    std::sort(cand.begin(), cand.end());
    std::vector<char> ua(a.size(), 0), ub(b.size(), 0);
    std::ostringstream where;
    where << "segment " << j << " -> " << (j + 1) % m << ": " << list_string(a) << " vs " << list_string(b);
    for (const auto& [d, p, q] : cand) {
      if (ua[p] || ub[q]) continue;
      if (d >= 0.5 * spacing) continue;
      ua[p] = ub[q] = 1;
      if (a[p] < lv && b[q] > lv) ++res.crossings[j];
      if (a[p] > lv && b[q] < lv) --res.crossings[j];
    }
    auto check_unmatched = [&](const std::vector<double>& v, const std::vector<char>& used) {
      for (std::size_t p = 0; p < v.size(); ++p)
        if (!used[p] && std::abs(v[p]) < seg_edge * (1 - opt.edge_margin))
          throw ComputationError("refine_needed", "eigenvalues cannot be paired along " + where.str());
    };
    check_unmatched(a, ua);
    check_unmatched(b, ub);
    res.flow += res.crossings[j];
  }
  return res;
}

FlowResult spectral_flow(const ParamLoop& loop, double level, const LoopSolveOptions& solve, const FlowOptions& opt) {
  return spectral_flow(loop_spectrum(loop, solve), level, opt);
}

// --- Berry flux ---------------------------------------------------------------

void S2Grid::validate() const {
  if (n_lat < 2 || n_lon < 3) throw ValidationError("S^2 grid needs n_lat >= 2 and n_lon >= 3");
}

int S2Grid::index(int i, int j) const {
  if (i <= 0) return 0;
  if (i >= n_lat) return nodes() - 1;
  j %= n_lon;
  if (j < 0) j += n_lon;
  return 1 + (i - 1) * n_lon + j;
}

Eigen::Vector3d S2Grid::point(int i, int j) const {
  const double th = M_PI * i / n_lat;
  const double ph = 2 * M_PI * j / n_lon;
  if (i <= 0) return Eigen::Vector3d(0, 0, -1);
  if (i >= n_lat) return Eigen::Vector3d(0, 0, 1);
  return Eigen::Vector3d(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), -std::cos(th));
}

Eigen::Vector3d S2Grid::node_point(int idx) const {
  if (idx == 0) return point(0, 0);
  if (idx == nodes() - 1) return point(n_lat, 0);
  return point(1 + (idx - 1) / n_lon, (idx - 1) % n_lon);
}

ChernResult berry_flux_chern(const S2Grid& grid, const std::vector<Frame>& frames, const ChernOptions& opt) {
  grid.validate();
  if (static_cast<int>(frames.size()) != grid.nodes())
    throw ValidationError("berry_flux_chern: one frame per grid node required");
  ChernResult res;
  res.rank = static_cast<int>(frames[0].cols());
  for (int idx = 0; idx < grid.nodes(); ++idx) {
    if (frames[idx].cols() != res.rank || frames[idx].rows() != frames[0].rows()) {
      std::ostringstream os;
      os << "window rank changes across the sphere: node " << idx << " has rank " << frames[idx].cols()
         << ", node 0 has rank " << res.rank;
      throw ComputationError("cover_violation", os.str());
    }
  }
  double total = 0;
  for (int i = 0; i < grid.n_lat; ++i) {
    for (int j = 0; j < grid.n_lon; ++j) {
      const int c[4] = {grid.index(i, j), grid.index(i + 1, j), grid.index(i + 1, j + 1), grid.index(i, j + 1)};
      cd prod = 1;
      for (int e = 0; e < 4; ++e) prod *= frame_overlap_det(frames[c[e]], frames[c[(e + 1) % 4]]);
      std::ostringstream os;
      if (std::abs(prod) < opt.min_overlap) {
        os << "frames nearly orthogonal around plaquette (" << i << ", " << j << ")";
        throw ComputationError("refine_needed", os.str());
      }
      const double flux = std::arg(prod);
      if (std::abs(flux) > opt.flux_limit) {
        os << "plaquette (" << i << ", " << j << ") carries flux " << flux << "; refine the grid";
        throw ComputationError("refine_needed", os.str());
      }
      res.max_flux = std::max(res.max_flux, std::abs(flux));
      total += flux;
    }
  }
  res.raw = total / (2 * M_PI);
  res.chern = static_cast<int>(std::lround(res.raw));
  res.residual = std::abs(res.raw - res.chern);
  if (res.residual > opt.integer_tol) {
    std::ostringstream os;
    os << "Berry flux " << res.raw << " is not within " << opt.integer_tol << " of an integer";
    throw ComputationError("non_integer", os.str());
  }
  return res;
}

std::vector<Frame> frames_on(const S2Grid& grid, const std::function<Frame(const Eigen::Vector3d&)>& fn, int threads) {
  grid.validate();
  std::vector<Frame> out(grid.nodes());
  parallel_for(out.size(), [&](std::size_t i) { out[i] = fn(grid.node_point(static_cast<int>(i))); }, threads);
  return out;
}

// --- S^3 grids ------------------------------------------------------------------

int SphereGrid::nodes() const { return 2 + (n_chi - 1) * s2.nodes(); }

void SphereGrid::validate() const {
  s2.validate();
  if (n_chi < 2) throw ValidationError("S^3 grid needs n_chi >= 2");
  if (std::abs(left.norm() - 1) > 1e-12 || std::abs(right.norm() - 1) > 1e-12)
    throw ValidationError("S^3 grid frame quaternions must be unit");
}

Quaterniond SphereGrid::grid_point(int l, int idx) const {
  const double chi = M_PI * l / n_chi;
  if (l <= 0) return Quaterniond::identity();
  if (l >= n_chi) return -Quaterniond::identity();
  return Quaterniond(std::cos(chi), std::sin(chi) * s2.node_point(idx));
}

Quaterniond SphereGrid::point(int l, int idx) const { return left * grid_point(l, idx) * right; }

SphereGrid SphereGrid::refined() const {
  SphereGrid g = *this;
  g.s2 = s2.refined();
  g.n_chi = 2 * n_chi;
  return g;
}

SphereGrid SphereGrid::tilted(int n_lat, int n_lon, int n_chi) {
  SphereGrid g;
  g.s2 = {n_lat, n_lon};
  g.n_chi = n_chi;
  g.left = Quaterniond(0.83, 0.31, -0.42, 0.19).normalized();
  g.right = Quaterniond(0.91, -0.22, 0.27, 0.23).normalized();
  return g;
}

namespace {

struct NodeRef {
  int l;
  int idx;
};

std::vector<NodeRef> all_nodes(const SphereGrid& g) {
  std::vector<NodeRef> out;
  out.reserve(g.nodes());
  for (int l = 0; l <= g.n_chi; ++l)
    for (int i = 0; i < g.level_nodes(l); ++i) out.push_back({l, i});
  return out;
}

std::string node_string(const SphereGrid& g, int l, int idx) {
  const Quaterniond x = g.point(l, idx);
  std::ostringstream os;
  os.precision(6);
  os << "node (level " << l << ", index " << idx << ") at x = (" << x.real() << ", " << x.vec()(0) << ", "
     << x.vec()(1) << ", " << x.vec()(2) << ")";
  return os.str();
}

}  // namespace

std::vector<std::vector<std::vector<double>>> sphere_spectra(const SphereGrid& grid, const FamilyFn& family,
                                                            const SurveyOptions& opt, int threads) {
  grid.validate();
  const auto nodes = all_nodes(grid);
  std::vector<std::vector<double>> flat(nodes.size());
  parallel_for(
      nodes.size(), [&](std::size_t i) { flat[i] = gap_eigenvalues(family(grid.point(nodes[i].l, nodes[i].idx)), opt); },
      threads);
  std::vector<std::vector<std::vector<double>>> out(grid.n_chi + 1);
  for (std::size_t i = 0; i < nodes.size(); ++i) out[nodes[i].l].push_back(std::move(flat[i]));
  return out;
}

DDResult dd_invariant(const SphereGrid& grid, const FamilyFn& family, const DDOptions& opt) {
  grid.validate();
  if (grid.n_chi % 2) throw ValidationError("dd_invariant needs an even number of S^3 latitude steps");
  const double eps = opt.epsilon;
  if (!(eps > 0 && eps < 1)) throw ValidationError("epsilon must lie in (0, 1)");
  const double band = opt.band < 0 ? eps / 2 : opt.band;
  const double margin = opt.margin < 0 ? eps / 4 : opt.margin;

  DDResult res;
  // Only eigenvalues near the levels that must be avoided, or inside the
  // window on the band, enter the certificate.
  const auto nodes = all_nodes(grid);
  std::vector<std::vector<double>> flat(nodes.size());
  parallel_for(
      nodes.size(),
      [&](std::size_t i) {
        const double yr = grid.grid_point(nodes[i].l, nodes[i].idx).real();
        const double lo = yr > band ? -eps - margin : yr < -band ? eps - margin : -eps - margin;
        const double hi = yr > band ? -eps + margin : yr < -band ? eps + margin : eps + margin;
        flat[i] = gap_eigenvalues_in(family(grid.point(nodes[i].l, nodes[i].idx)), lo, hi, opt.survey);
      },
      opt.threads);
  bool have_rank = false;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const int l = nodes[i].l, idx = nodes[i].idx;
    const double yr = grid.grid_point(l, idx).real();
    const auto& ev = flat[i];
    ++res.nodes_checked;
    auto fail = [&](const std::string& why) {
      throw ComputationError("cover_violation",
                             "cover condition fails at " + node_string(grid, l, idx) + ": " + why +
                                 "; eigenvalues near the window " + list_string(ev));
    };
    for (double x : ev) {
      if (yr >= -band && std::abs(x + eps) < margin) fail("-epsilon is not avoided on the northern set");
      if (yr <= band && std::abs(x - eps) < margin) fail("+epsilon is not avoided on the southern set");
    }
    if (std::abs(yr) <= band) {
      const int k = static_cast<int>(std::count_if(ev.begin(), ev.end(), [&](double x) { return std::abs(x) < eps; }));
      if (!have_rank) {
        res.window_rank = k;
        have_rank = true;
      } else if (k != res.window_rank) {
        std::ostringstream os;
        os << "window rank " << k << " differs from " << res.window_rank << " elsewhere on the band";
        fail(os.str());
      }
    }
  }

  const int eq = grid.n_chi / 2;
  const int m = grid.s2.nodes();
  std::vector<HalfLineOperatorSpec> specs(m);
  double decay = std::numeric_limits<double>::infinity();
  for (int idx = 0; idx < m; ++idx) {
    specs[idx] = family(grid.point(eq, idx));
    specs[idx].validate();
    const double mass = specs[idx].essential_edge() / specs[idx].scale;
    decay = std::min(decay, mass * std::sqrt(1 - eps * eps));
  }
  GridSpec g = GridSpec::for_decay(decay, opt.matrix_n);
  g.wilson_r = opt.wilson_r;
  res.grid_length = g.L;
  res.frame_nodes = m;

  std::vector<Frame> frames(m);
  parallel_for(
      m,
      [&](std::size_t idx) {
        const double edge = specs[idx].essential_edge();
        MatrixWindow w = matrix_window(specs[idx], g, -eps * edge, eps * edge);
        if (w.eigenvalues.size() != static_cast<Eigen::Index>(res.window_rank)) {
          std::ostringstream os;
          os << "matrix window rank " << w.eigenvalues.size() << " differs from the Evans rank " << res.window_rank
             << " at " << node_string(grid, eq, static_cast<int>(idx));
          throw ComputationError("cover_violation", os.str());
        }
        frames[idx] = std::move(w.frame);
      },
      opt.threads);
  const ChernResult c = berry_flux_chern(grid.s2, frames, opt.chern);
  res.dd = c.chern;
  res.residual = c.residual;
  res.max_flux = c.max_flux;
  return res;
}

// --- gap filling ------------------------------------------------------------------

GapFillResult gap_fill_report(std::vector<double> ev, double delta, double resolution) {
  if (!(delta >= 0 && delta < 1)) throw ValidationError("delta must lie in [0, 1)");
  if (!(resolution > 0)) throw ValidationError("resolution must be positive");
  GapFillResult r;
  r.lo = -1 + delta;
  r.hi = 1 - delta;
  r.eigenvalue_count = ev.size();
  std::sort(ev.begin(), ev.end());
  double reached = r.lo;  // everything below is covered or already counted
  double gaps = 0;
  for (double x : ev) {
    const double a = std::max(r.lo, x - resolution), b = std::min(r.hi, x + resolution);
    if (a >= b) continue;
    if (a > reached) {
      gaps += a - reached;
      r.max_gap = std::max(r.max_gap, a - reached);
    }
    reached = std::max(reached, b);
  }
  if (reached < r.hi) {
    gaps += r.hi - reached;
    r.max_gap = std::max(r.max_gap, r.hi - reached);
  }
  r.coverage = 1 - gaps / (r.hi - r.lo);
  return r;
}

GapFillResult gap_fill_report(const SphereGrid& grid, const FamilyFn& family, double delta, double resolution,
                              const SurveyOptions& opt, int threads) {
  std::vector<double> all;
  for (const auto& level : sphere_spectra(grid, family, opt, threads))
    for (const auto& node : level) all.insert(all.end(), node.begin(), node.end());
  return gap_fill_report(std::move(all), delta, resolution);
}

std::vector<CoverageBin> coverage_profile(std::vector<double> ev, double delta, double resolution) {
  if (!(resolution > 0)) throw ValidationError("resolution must be positive");
  std::sort(ev.begin(), ev.end());
  const double lo = -1 + delta, hi = 1 - delta;
  const int n = std::max(1, static_cast<int>(std::ceil((hi - lo) / resolution - 1e-9)));
  std::vector<CoverageBin> out(n);
  for (int b = 0; b < n; ++b) {
    const double c = std::min(hi, lo + resolution * (b + 0.5));
    out[b].center = c;
    out[b].count = static_cast<int>(std::upper_bound(ev.begin(), ev.end(), c + resolution) -
                                    std::lower_bound(ev.begin(), ev.end(), c - resolution));
  }
  return out;
}

// --- cocycles -------------------------------------------------------------------

CocycleReport cocycle_consistency(const std::vector<HalfLineOperatorSpec>& specs, double l, double m, double n,
                                  const CocycleOptions& opt) {
  if (!(l < m && m < n)) throw ValidationError("cocycle levels must satisfy l < m < n");
  if (!(l > -1 && n < 1)) throw ValidationError("cocycle levels must lie in the gap (-1, 1)");
  CocycleReport rep;
  rep.nodes.resize(specs.size());
  parallel_for(
      specs.size(),
      [&](std::size_t i) {
        const auto& s = specs[i];
        const double edge = s.essential_edge();
        const double mass = edge / s.scale;
        const double worst = std::max(std::abs(l), std::abs(n));
        const GridSpec g = GridSpec::for_decay(mass * std::sqrt(1 - worst * worst), opt.matrix_n);
        const BlockTridiagonal a = assemble_blocks(s, g);
        for (double lv : {l, m, n})
          if (count_in(a, (lv - opt.level_tol) * edge, (lv + opt.level_tol) * edge) > 0) {
            std::ostringstream os;
            os << "level " << lv << " hits an eigenvalue at node " << i;
            throw ComputationError("level_hit", os.str());
          }
        const MatrixWindow ln = matrix_window(s, g, l * edge, n * edge);
        const MatrixWindow lm = matrix_window(s, g, l * edge, m * edge);
        const MatrixWindow mn = matrix_window(s, g, m * edge, n * edge);
        CocycleNode& out = rep.nodes[i];
        out.rank_ln = static_cast<int>(ln.frame.cols());
        out.rank_lm = static_cast<int>(lm.frame.cols());
        out.rank_mn = static_cast<int>(mn.frame.cols());
        if (out.rank_ln != out.rank_lm + out.rank_mn) {
          out.overlap_modulus = 0;
          out.pass = false;
          return;
        }
        Frame joined(ln.frame.rows(), out.rank_ln);
        joined.leftCols(out.rank_lm) = lm.frame;
        joined.rightCols(out.rank_mn) = mn.frame;
        out.overlap_modulus = std::abs(frame_overlap_det(ln.frame, joined));
        out.pass = std::abs(out.overlap_modulus - 1) <= opt.modulus_tol;
      },
      opt.threads);
  rep.pass = true;
  for (const auto& nd : rep.nodes) {
    rep.worst_modulus_defect = std::max(rep.worst_modulus_defect, std::abs(nd.overlap_modulus - 1));
    rep.pass = rep.pass && nd.pass;
  }
  return rep;
}

}  // namespace halfdirac
