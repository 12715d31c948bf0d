#include "halfdirac/weyl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "halfdirac/error.hpp"
#include "halfdirac/parallel.hpp"

namespace halfdirac {

WeylFamilySpec WeylFamilySpec::sp1(const Quaterniond& gamma, double mu, PotentialSpec v) {
  WeylFamilySpec s;
  s.bc = BoundaryCondition::from_quaternion(gamma);
  s.potential = std::move(v);
  s.fermi_level = mu;
  return s;
}

WeylFamilySpec WeylFamilySpec::u2(const Eigen::Matrix2cd& gamma, double mu, PotentialSpec v) {
  WeylFamilySpec s;
  s.bc = BoundaryCondition::u2(gamma);
  s.potential = std::move(v);
  s.fermi_level = mu;
  return s;
}

void WeylFamilySpec::validate() const {
  bc.validate();
  if (bc.k() != 2) throw ValidationError("size_mismatch", "Weyl boundary condition must be 2x2");
  potential.validate(4);
  if (!(std::abs(fermi_level) < 1)) throw ValidationError("Fermi level must lie in (-1, 1)");
}

bool gapless_fiber(const Eigen::Vector4d& p) { return !(p.norm() > 0); }

HalfLineOperatorSpec fiber_operator(const WeylFamilySpec& spec, const Eigen::Vector4d& p) {
  HalfLineOperatorSpec s;
  s.mass = momentum_to_quaternion(p).conjugate().matrix();
  s.bc = spec.bc;
  s.potential = spec.potential;
  return s;
}

SphereFamily sphere_family(const WeylFamilySpec& spec, double rho, const SphereGrid& grid) {
  spec.validate();
  if (!(rho > 0) || !std::isfinite(rho)) throw ValidationError("sphere radius must be positive");
  grid.validate();
  SphereFamily out;
  out.grid = grid;
  out.rho = rho;
  out.family = [spec, rho](const Quaterniond& x) {
    HalfLineOperatorSpec s;
    s.mass = (x * rho).conjugate().matrix();
    s.bc = spec.bc;
    s.potential = spec.potential;
    return normalize_gap(s).first;
  };
  return out;
}

// --- Fermi surface --------------------------------------------------------------

bool FermiSurfaceCloud::nonempty_at_every_radius() const {
  if (per_radius.empty()) return false;
  return std::all_of(per_radius.begin(), per_radius.end(), [](int c) { return c > 0; });
}

namespace {

struct FiberSample {
  int below = 0;             // eigenvalues < mu
  double nearest = 0;        // eigenvalue closest to mu
  double residual = std::numeric_limits<double>::infinity();
};

FiberSample sample_fiber(const WeylFamilySpec& spec, const Eigen::Vector4d& p, const SurveyOptions& survey) {
  const HalfLineOperatorSpec op = fiber_operator(spec, p);
  const double edge = p.norm();
  FiberSample s;
  for (double e : gap_eigenvalues(op, survey)) {
    const double lambda = e * edge;
    if (lambda < spec.fermi_level) ++s.below;
    const double r = std::abs(lambda - spec.fermi_level);
    if (r < s.residual) {
      s.residual = r;
      s.nearest = lambda;
    }
  }
  return s;
}

Eigen::Vector4d meridian_point(double r, double chi, const Eigen::Vector3d& n) {
  Eigen::Vector4d p;
  p(0) = r * std::cos(chi);
  p.tail<3>() = r * std::sin(chi) * n;
  return p;
}

}  // namespace

FermiSurfaceCloud fermi_surface_scan(const WeylFamilySpec& spec, const FermiScanOptions& opt) {
  spec.validate();
  const double mu = spec.fermi_level;
  if (!(opt.r0 > std::abs(mu))) throw ValidationError("scan radius r0 must exceed |mu|");
  if (!(opt.r1 >= opt.r0) || !std::isfinite(opt.r1)) throw ValidationError("scan needs r0 <= r1");
  if (opt.n_radial < 1) throw ValidationError("scan needs at least one radius");
  if (opt.n_chi < 2) throw ValidationError("scan needs at least two polar steps");
  if (!(opt.tol_fs > 0)) throw ValidationError("tol_fs must be positive");
  const S2Grid s2{opt.n_lat, opt.n_lon};
  s2.validate();

  FermiSurfaceCloud cloud;
  cloud.tol_fs = opt.tol_fs;
  cloud.angular_step = M_PI / opt.n_chi;
  for (int i = 0; i < opt.n_radial; ++i)
    cloud.radii.push_back(opt.n_radial == 1 ? opt.r0 : opt.r0 + (opt.r1 - opt.r0) * i / (opt.n_radial - 1));

  const int dirs = s2.nodes();
  const int nc = opt.n_chi;
  const std::size_t nr = cloud.radii.size();
  // Slot layout per radius: the two poles, then every meridian.
  std::vector<std::vector<FermiPoint>> found(nr * (2 + dirs));
  const double stop = opt.bisect_tol * opt.tol_fs;

  parallel_for(
      nr * (2 + dirs),
      [&](std::size_t slot) {
        const int ri = static_cast<int>(slot / (2 + dirs));
        const int local = static_cast<int>(slot % (2 + dirs));
        const double r = cloud.radii[ri];
        auto& out = found[slot];
        auto keep = [&](const Eigen::Vector4d& p, const FiberSample& s) {
          if (s.residual <= opt.tol_fs) out.push_back({p, s.nearest, s.residual, ri});
        };
        if (local < 2) {
          const Eigen::Vector4d p = meridian_point(r, local == 0 ? 0.0 : M_PI, Eigen::Vector3d::UnitX());
          keep(p, sample_fiber(spec, p, opt.survey));
          return;
        }
        const Eigen::Vector3d n = s2.node_point(local - 2);
        std::vector<double> chi(nc + 1);
        std::vector<FiberSample> samples(nc + 1);
        for (int l = 0; l <= nc; ++l) {
          chi[l] = M_PI * l / nc;
          samples[l] = sample_fiber(spec, meridian_point(r, chi[l], n), opt.survey);
          if (l > 0 && l < nc) keep(meridian_point(r, chi[l], n), samples[l]);
        }
        for (int l = 0; l < nc; ++l) {
          if (samples[l].below == samples[l + 1].below) continue;
          double a = chi[l], b = chi[l + 1];
          FiberSample sa = samples[l], sb = samples[l + 1];
          for (int it = 0; it < 60 && std::min(sa.residual, sb.residual) > stop && b - a > 1e-14; ++it) {
            const double m = 0.5 * (a + b);
            const FiberSample sm = sample_fiber(spec, meridian_point(r, m, n), opt.survey);
            if (sm.below != sa.below) {
              b = m;
              sb = sm;
            } else {
              a = m;
              sa = sm;
            }
          }
          const bool left = sa.residual <= sb.residual;
          const double c = left ? a : b;
          // Mesh samples were kept above; skip a bisection that ended on one.
          if (c == chi[l] || c == chi[l + 1]) continue;
          keep(meridian_point(r, c, n), left ? sa : sb);
        }
      },
      opt.threads);

  cloud.per_radius.assign(nr, 0);
  for (const auto& slot : found)
    for (const auto& pt : slot) {
      cloud.points.push_back(pt);
      ++cloud.per_radius[pt.radius_index];
    }
  return cloud;
}

// --- perturbations ----------------------------------------------------------------

std::vector<PerturbationRow> perturbation_experiment(const WeylFamilySpec& spec, const std::vector<double>& strengths,
                                                     const PerturbationOptions& opt) {
  spec.validate();
  if (opt.matrix.rows() != 4 || opt.matrix.cols() != 4)
    throw ValidationError("perturbation matrix must be 4x4");
  std::vector<PerturbationRow> rows;
  for (double c : strengths) {
    if (!std::isfinite(c)) throw ValidationError("perturbation strength must be finite");
    WeylFamilySpec s = spec;
    if (c != 0) s.potential.terms.push_back({c, opt.alpha, opt.matrix});
    s.validate();

    PerturbationRow row;
    row.strength = c;
    const SphereFamily fam = sphere_family(s, 1.0, opt.dd_grid);
    try {
      const DDResult dd = dd_invariant(fam.grid, fam.family, opt.dd);
      row.dd = dd.dd;
      row.dd_status = "certified";
    } catch (const ComputationError& e) {
      if (e.code() != "cover_violation") throw;
      row.dd_status = std::string("beyond certified range: ") + e.what();
    }

    const SphereFamily gap = sphere_family(s, 1.0, opt.gap_grid);
    const GapFillResult g =
        gap_fill_report(gap.grid, gap.family, opt.gap_delta, opt.gap_resolution, opt.fermi.survey, opt.fermi.threads);
    row.coverage = g.coverage;
    row.max_gap = g.max_gap;

    const FermiSurfaceCloud cloud = fermi_surface_scan(s, opt.fermi);
    row.fermi_points = cloud.points.size();
    row.fermi_nonempty = cloud.nonempty_at_every_radius();
    for (const auto& pt : cloud.points)
      row.max_displacement = std::max(row.max_displacement, std::abs(pt.p(0) - s.fermi_level));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace halfdirac
