#include "cli.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <variant>

#include "CLI11.hpp"
#include "halfdirac/algebra.hpp"
#include "halfdirac/dirac_operator.hpp"
#include "halfdirac/error.hpp"
#include "halfdirac/exact.hpp"
#include "halfdirac/parallel.hpp"
#include "halfdirac/topology.hpp"
#include "halfdirac/version.hpp"
#include "halfdirac/weyl.hpp"

namespace halfdirac::cli {

namespace {

// --- config access ----------------------------------------------------------------

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ValidationError("config_type", where + " must be a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items())
    if (!ok.count(key)) throw ValidationError("unknown_key", "unknown key '" + key + "' in " + where);
}

const json& empty_object() {
  static const json e = json::object();
  return e;
}

const json& sub(const json& obj, const char* key) { return obj.contains(key) ? obj.at(key) : empty_object(); }

double get_number(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ValidationError("config_type", std::string("'") + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ValidationError("config_type", std::string("'") + key + "' must be finite");
  return x;
}

int get_int(const json& obj, const char* key, int fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ValidationError("config_type", std::string("'") + key + "' must be an integer");
  return v.get<int>();
}

bool get_bool(const json& obj, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) throw ValidationError("config_type", std::string("'") + key + "' must be true or false");
  return v.get<bool>();
}

std::string get_string(const json& obj, const char* key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) throw ValidationError("config_type", std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

int positive_int(const json& obj, const char* key, int fallback) {
  const int v = get_int(obj, key, fallback);
  if (v < 1) throw ValidationError("config_range", std::string("'") + key + "' must be positive");
  return v;
}

cd parse_complex(const json& v, const std::string& what) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return {v[0].get<double>(), v[1].get<double>()};
  throw ValidationError("config_type", what + " must be a number or a [re, im] pair");
}

Quaterniond parse_quaternion(const json& v, const std::string& what) {
  if (!(v.is_array() && v.size() == 4))
    throw ValidationError("config_type", what + " must be a quaternion [q_r, q1, q2, q3]");
  for (const auto& x : v)
    if (!x.is_number()) throw ValidationError("config_type", what + " entries must be numbers");
  return Quaterniond(v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>());
}

Eigen::Vector4d parse_vector4(const json& v, const std::string& what) {
  if (!(v.is_array() && v.size() == 4)) throw ValidationError("config_type", what + " must be a 4-vector");
  Eigen::Vector4d p;
  for (int i = 0; i < 4; ++i) {
    if (!v[i].is_number()) throw ValidationError("config_type", what + " entries must be numbers");
    p(i) = v[i].get<double>();
  }
  return p;
}

Eigen::MatrixXcd parse_matrix(const json& v, int n, const std::string& what) {
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "identity") return Eigen::MatrixXcd::Identity(n, n);
    if (n == 4 && s.size() == 6 && s.rfind("gamma", 0) == 0 && s[5] >= '1' && s[5] <= '5')
      return dirac_set().gamma[s[5] - '1'];
    throw ValidationError("config_value", what + ": unknown matrix name '" + s + "'");
  }
  if (!(v.is_array() && static_cast<int>(v.size()) == n))
    throw ValidationError("config_type", what + " must be a name or a " + std::to_string(n) + "x" +
                                             std::to_string(n) + " array of [re, im] entries");
  Eigen::MatrixXcd m(n, n);
  for (int i = 0; i < n; ++i) {
    if (!(v[i].is_array() && static_cast<int>(v[i].size()) == n))
      throw ValidationError("config_type", what + " rows must have " + std::to_string(n) + " entries");
    for (int j = 0; j < n; ++j) m(i, j) = parse_complex(v[i][j], what);
  }
  return m;
}

PotentialSpec parse_potential(const json& cfg, int dim) {
  PotentialSpec v;
  if (!cfg.contains("potential")) return v;
  const json& list = cfg.at("potential");
  if (!list.is_array()) throw ValidationError("config_type", "'potential' must be a list of terms");
  for (const auto& t : list) {
    check_keys(t, "potential term", {"c", "alpha", "matrix"});
    PotentialTerm term;
    term.c = get_number(t, "c", 0.0);
    term.alpha = get_number(t, "alpha", 1.0);
    term.m = t.contains("matrix") ? parse_matrix(t.at("matrix"), dim, "potential matrix")
                                  : Eigen::MatrixXcd::Identity(dim, dim);
    if (term.c != 0) v.terms.push_back(term);
  }
  v.validate(dim);
  return v;
}

/// Boundary condition of a Weyl family: "gamma" as a quaternion or
/// "gamma_matrix" as a 2x2 unitary; default Gamma = 1.
BoundaryCondition parse_weyl_bc(const json& cfg) {
  if (cfg.contains("gamma") && cfg.contains("gamma_matrix"))
    throw ValidationError("config_value", "give either 'gamma' or 'gamma_matrix', not both");
  if (cfg.contains("gamma_matrix")) {
    const Eigen::MatrixXcd g = parse_matrix(cfg.at("gamma_matrix"), 2, "gamma_matrix");
    return BoundaryCondition::u2(g);
  }
  const Quaterniond g = cfg.contains("gamma") ? parse_quaternion(cfg.at("gamma"), "gamma") : Quaterniond::identity();
  return BoundaryCondition::from_quaternion(g);
}

SurveyOptions parse_survey(const json& cfg) {
  const json& s = sub(cfg, "survey");
  check_keys(s, "survey", {"resolution", "root_tol", "step", "threshold", "steps_per_decay"});
  SurveyOptions o;
  o.resolution = get_number(s, "resolution", o.resolution);
  o.root_tol = get_number(s, "root_tol", o.root_tol);
  o.evans.step = get_number(s, "step", o.evans.step);
  o.evans.threshold = get_number(s, "threshold", o.evans.threshold);
  o.evans.steps_per_decay = get_number(s, "steps_per_decay", o.evans.steps_per_decay);
  if (!(o.resolution > 0 && o.root_tol > 0 && o.evans.step > 0 && o.evans.threshold > 0 &&
        o.evans.steps_per_decay > 0))
    throw ValidationError("config_range", "survey settings must be positive");
  return o;
}

SphereGrid parse_sphere_grid(const json& cfg, bool tilted_default) {
  const json& g = sub(cfg, "grid");
  check_keys(g, "grid", {"n_lat", "n_lon", "n_chi", "tilted"});
  const int n_lat = positive_int(g, "n_lat", 24), n_lon = positive_int(g, "n_lon", 48);
  const int n_chi = positive_int(g, "n_chi", 24);
  SphereGrid grid = get_bool(g, "tilted", tilted_default) ? SphereGrid::tilted(n_lat, n_lon, n_chi) : SphereGrid{};
  grid.s2 = {n_lat, n_lon};
  grid.n_chi = n_chi;
  grid.validate();
  return grid;
}

// Portable draws from a seeded mt19937_64 (the standard distributions are
// implementation defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double normal() {
    const double u = 1.0 - uniform(), v = uniform();
    return std::sqrt(-2 * std::log(u)) * std::cos(2 * M_PI * v);
  }
  Quaterniond unit_quaternion() {
    Quaterniond q(normal(), normal(), normal(), normal());
    return q.normalized();
  }

 private:
  std::mt19937_64 gen_;
};

// --- output -------------------------------------------------------------------------

using Cell = std::variant<long long, double, std::string>;
using Row = std::vector<Cell>;

class Output {
 public:
  Output(std::string command, const json& config) : command_(std::move(command)), config_(config) {
    dir_ = get_string(config, "out", "halfdirac-out");
    if (dir_.empty()) throw ValidationError("config_value", "'out' must not be empty");
  }

  void prepare() const {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ValidationError("output", "cannot create output directory '" + dir_ + "': " + ec.message());
  }

  void csv(const std::string& name, const std::vector<std::string>& columns, const std::vector<Row>& rows) const {
    std::ostringstream os;
    os << "# halfdirac " << kVersion << "\n";
    os << "# command: " << command_ << "\n";
    os << "# config: " << config_.dump() << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
    os << "\n";
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ",";
        std::visit(
            [&](const auto& v) {
              using T = std::decay_t<decltype(v)>;
              if constexpr (std::is_same_v<T, double>)
                os << format_number(v);
              else
                os << v;
            },
            row[i]);
      }
      os << "\n";
    }
    write(name, os.str());
  }

  /// JSON document whose first member "header" records toolkit, version,
  /// command and config.
  void summary(const std::string& name, const json& body) const {
    json doc;
    doc["header"] = {{"toolkit", "halfdirac"}, {"version", kVersion}, {"command", command_}, {"config", config_}};
    for (const auto& [k, v] : body.items()) doc[k] = v;
    write(name, doc.dump(2) + "\n");
  }

 private:
  void write(const std::string& name, const std::string& text) const {
    const std::filesystem::path path = std::filesystem::path(dir_) / name;
    std::ofstream f(path, std::ios::binary);
    f << text;
    f.close();
    if (!f) throw ComputationError("output", "cannot write " + path.string());
  }

  std::string command_;
  json config_;
  std::string dir_;
};

double rounded(double x) { return std::stod(format_number(x)); }

json rounded_json(double x) { return rounded(x); }

// --- spectrum -----------------------------------------------------------------------

/// Matrix-method rows: eigenpairs of the discretization in the window, states
/// living on the far half of the grid dropped, residual ||A v - lambda v||.
std::vector<Row> matrix_rows(const HalfLineOperatorSpec& spec, const GridSpec& g) {
  const double edge = spec.essential_edge();
  const double w = edge * (1 - kDeltaEdge);
  const BlockTridiagonal a = assemble_blocks(spec, g);
  const EigenDecomposition e = eigenpairs_in(a, -w, w);
  const Eigen::MatrixXcd av = a.multiply(e.vectors);
  const Eigen::MatrixXcd nodal = expand_boundary(spec, e.vectors);
  std::vector<Row> rows;
  for (Eigen::Index i = 0; i < e.values.size(); ++i) {
    if (far_end_weight(g, spec.components(), nodal.col(i)) > 0.5) continue;
    const double lam = e.values(i);
    const double res = (av.col(i) - lam * e.vectors.col(i)).norm();
    rows.push_back({std::string("matrix"), lam, 1LL, std::sqrt(std::max(0.0, edge * edge - lam * lam)), res});
  }
  return rows;
}

void run_spectrum(const json& cfg, const Output& out) {
  check_keys(cfg, "spectrum config",
             {"out", "threads", "seed", "subcommand", "operator", "potential", "methods", "evans", "matrix"});
  const json& op = sub(cfg, "operator");
  check_keys(op, "operator", {"type", "rho", "omega", "q", "p", "gamma", "gamma_matrix"});
  const std::string type = get_string(op, "type", "sp1");

  HalfLineOperatorSpec spec;
  std::optional<ExactSpectrum> exact;
  if (type == "u1") {
    const double rho = get_number(op, "rho", 1.0);
    const cd omega = op.contains("omega") ? parse_complex(op.at("omega"), "omega") : cd(0, -1);
    spec = dirac_u1(rho, omega, parse_potential(cfg, 2));
    if (spec.potential.empty()) exact = u1_spectrum(rho, omega);
  } else if (type == "sp1" || type == "sp1_fixed") {
    const Quaterniond q = op.contains("q") ? parse_quaternion(op.at("q"), "q") : Quaterniond::identity();
    spec = type == "sp1" ? dirac_sp1(q, parse_potential(cfg, 4)) : dirac_sp1_fixed(q, parse_potential(cfg, 4));
    if (spec.potential.empty()) exact = sp1_spectrum(q);
  } else if (type == "weyl") {
    const Eigen::Vector4d p = op.contains("p") ? parse_vector4(op.at("p"), "p") : Eigen::Vector4d::UnitX();
    WeylFamilySpec w;
    w.bc = parse_weyl_bc(op);
    w.potential = parse_potential(cfg, 4);
    if (gapless_fiber(p)) throw ValidationError("gapless", "the fiber at p = 0 has no spectral gap");
    spec = fiber_operator(w, p);
    if (w.potential.empty() && w.bc.sp1)
      exact = weyl_fiber_spectrum(momentum_to_quaternion(p), Quaterniond::from_matrix(w.bc.gamma));
  } else {
    throw ValidationError("config_value", "operator type must be u1, sp1, sp1_fixed or weyl");
  }
  spec.validate();

  std::vector<std::string> methods{"exact", "matrix", "evans"};
  if (cfg.contains("methods")) {
    methods.clear();
    if (!cfg.at("methods").is_array()) throw ValidationError("config_type", "'methods' must be a list");
    for (const auto& m : cfg.at("methods")) {
      if (!m.is_string() || (m != "exact" && m != "matrix" && m != "evans"))
        throw ValidationError("config_value", "methods are exact, matrix and evans");
      methods.push_back(m.get<std::string>());
    }
  }
  auto wants = [&](const char* m) { return std::find(methods.begin(), methods.end(), m) != methods.end(); };

  const json& ev = sub(cfg, "evans");
  check_keys(ev, "evans", {"resolution", "root_tol", "step"});
  const double edge = spec.essential_edge();
  MidgapOptions mo;
  mo.resolution = get_number(ev, "resolution", 0.01) * edge;
  mo.root_tol = get_number(ev, "root_tol", 1e-12) * edge;
  mo.eigenfunctions = false;
  EvansOptions eo;
  eo.step = get_number(ev, "step", eo.step);

  const json& mx = sub(cfg, "matrix");
  check_keys(mx, "matrix", {"N", "L", "wilson_r", "cap"});
  const int n = positive_int(mx, "N", 3000);
  const double wilson = get_number(mx, "wilson_r", GridSpec{}.wilson_r);
  const double cap = get_number(mx, "cap", 80);

  out.prepare();
  auto decay = [&](double lambda) { return std::sqrt(std::max(0.0, edge * edge - lambda * lambda)); };
  std::vector<Row> rows;
  if (wants("exact") && exact)
    for (const auto& d : exact->discrete)
      rows.push_back({std::string("exact"), d.value, static_cast<long long>(d.multiplicity),
                      exact->bound_state ? exact->bound_state->decay_rate : decay(d.value), 0.0});

  std::vector<MidgapState> evans;
  if (wants("evans") || (wants("matrix") && !mx.contains("L"))) {
    const EvansContext ctx(spec, eo);
    evans = find_midgap_eigenvalues(ctx, mo);
    if (wants("matrix")) {
      GridSpec g;
      if (mx.contains("L")) {
        g.L = get_number(mx, "L", 30);
      } else {
        double slowest = edge;
        for (const auto& s : evans) slowest = std::min(slowest, decay(s.eigenvalue));
        g = GridSpec::for_decay(slowest, n, cap);
      }
      g.N = n;
      g.wilson_r = wilson;
      g.validate();
      const auto m = matrix_rows(spec, g);
      rows.insert(rows.end(), m.begin(), m.end());
    }
    if (wants("evans"))
      for (const auto& s : evans)
        rows.push_back({std::string("evans"), s.eigenvalue, static_cast<long long>(s.multiplicity),
                        decay(s.eigenvalue), std::abs(ctx.evans(s.eigenvalue))});
  } else if (wants("matrix")) {
    GridSpec g;
    g.L = get_number(mx, "L", 30);
    g.N = n;
    g.wilson_r = wilson;
    g.validate();
    const auto m = matrix_rows(spec, g);
    rows.insert(rows.end(), m.begin(), m.end());
  }
  out.csv("spectrum.csv", {"method", "eigenvalue", "multiplicity", "decay_rate", "residual"}, rows);
}

// --- flow -------------------------------------------------------------------------------

void run_flow(const json& cfg, const Output& out) {
  check_keys(cfg, "flow config",
             {"out", "threads", "seed", "subcommand", "rho", "samples", "offset", "level", "evans", "potential"});
  const double rho = get_number(cfg, "rho", 1.0);
  const int m = positive_int(cfg, "samples", 64);
  const int offset = get_int(cfg, "offset", 0);
  const double level = get_number(cfg, "level", 0.0);
  const PotentialSpec v = parse_potential(cfg, 2);
  const json& ev = sub(cfg, "evans");
  check_keys(ev, "evans", {"resolution", "root_tol", "step"});
  LoopSolveOptions so;
  so.resolution = get_number(ev, "resolution", 0.02);
  so.root_tol = get_number(ev, "root_tol", 1e-12);
  so.evans.step = get_number(ev, "step", so.evans.step);
  dirac_u1(rho, 1.0, v).validate();
  const ParamLoop loop = ParamLoop::circle(m, [rho, v](cd w) { return dirac_u1(rho, w, v); }, offset);

  out.prepare();
  const LoopSpectrum spec = loop_spectrum(loop, so);
  const FlowResult flow = spectral_flow(spec, level);

  std::vector<Row> rows;
  double curve_error = 0;
  for (std::size_t j = 0; j < spec.samples.size(); ++j) {
    const double arg = std::arg(spec.samples[j]);
    Row row{static_cast<long long>(j), arg};
    for (double e : spec.eigenvalues[j]) row.push_back(e);
    rows.push_back(row);
    if (v.empty() && spec.samples[j].imag() < 0 && !spec.eigenvalues[j].empty())
      curve_error = std::max(curve_error, std::abs(spec.eigenvalues[j].front() - rho * std::cos(arg)));
  }
  out.csv("flow.csv", {"sample", "arg_omega", "eigenvalues"}, rows);
  json body;
  body["flow"] = flow.flow;
  body["level"] = rounded_json(flow.level);
  body["samples"] = m;
  if (v.empty()) body["max_curve_error"] = rounded_json(curve_error);
  out.summary("flow.json", body);
}

// --- chern --------------------------------------------------------------------------------

void run_chern(const json& cfg, const Output& out) {
  check_keys(cfg, "chern config",
             {"out", "threads", "seed", "subcommand", "family", "grid", "q_r", "window", "matrix_n", "gauge"});
  const std::string family = get_string(cfg, "family", "sp1_window");
  const json& g = sub(cfg, "grid");
  check_keys(g, "grid", {"n_lat", "n_lon"});
  const S2Grid grid{positive_int(g, "n_lat", 24), positive_int(g, "n_lon", 48)};
  grid.validate();
  const double qr = get_number(cfg, "q_r", 0.0);
  const double window = get_number(cfg, "window", 0.1);
  const int matrix_n = positive_int(cfg, "matrix_n", 1500);
  const bool gauge = get_bool(cfg, "gauge", false);
  const std::uint64_t seed = static_cast<std::uint64_t>(get_int(cfg, "seed", 0));
  if (!(std::abs(qr) < 1)) throw ValidationError("config_range", "'q_r' must lie in (-1, 1)");
  if (!(window > 0)) throw ValidationError("config_range", "'window' must be positive");

  std::function<Frame(const Eigen::Vector3d&)> fn;
  if (family == "hopf") {
    fn = [](const Eigen::Vector3d& n) { return Frame(negative_spinor(n)); };
  } else if (family == "trivial_rank2") {
    fn = [](const Eigen::Vector3d& n) {
      Frame f(2, 2);
      f.col(0) = negative_spinor(n);
      f.col(1) = negative_spinor(-n);
      return f;
    };
  } else if (family == "sp1_window") {
    const double s = std::sqrt(1 - qr * qr);
    const GridSpec gs = GridSpec::for_decay(s, matrix_n);
    fn = [qr, s, window, gs](const Eigen::Vector3d& n) {
      const HalfLineOperatorSpec op = dirac_sp1(Quaterniond(qr, s * n));
      return matrix_window(op, gs, qr - window, qr + window).frame;
    };
  } else {
    throw ValidationError("config_value", "chern family must be hopf, trivial_rank2 or sp1_window");
  }

  out.prepare();
  std::vector<Frame> frames = frames_on(grid, fn);
  if (gauge) {
    // Random U(rank) gauge per node; the Chern number must not change.
    Rng rng(seed);
    for (auto& f : frames) {
      Eigen::MatrixXcd u(f.cols(), f.cols());
      for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = cd(rng.normal(), rng.normal());
      f = f * Eigen::HouseholderQR<Eigen::MatrixXcd>(u).householderQ() * Eigen::MatrixXcd::Identity(f.cols(), f.cols());
    }
  }
  const ChernResult r = berry_flux_chern(grid, frames);
  json body;
  body["chern"] = r.chern;
  body["residual"] = rounded_json(r.residual);
  body["raw"] = rounded_json(r.raw);
  body["max_flux"] = rounded_json(r.max_flux);
  body["rank"] = r.rank;
  body["grid"] = {grid.n_lat, grid.n_lon};
  out.summary("chern.json", body);
}

// --- sphere families ---------------------------------------------------------------------

/// Family over S^3 selected by cfg["family"]: "weyl" (sphere_family of a Weyl
/// spec at radius rho), "sp1" (x -> D(x)), "reparametrized" (x -> D(conj(x) g)),
/// "constant" (x -> D(q)).
FamilyFn parse_family(const json& cfg) {
  const std::string family = get_string(cfg, "family", "weyl");
  const PotentialSpec v = parse_potential(cfg, 4);
  if (family == "weyl") {
    WeylFamilySpec w;
    w.bc = parse_weyl_bc(cfg);
    w.potential = v;
    const double rho = get_number(cfg, "rho", 1.0);
    return sphere_family(w, rho).family;
  }
  if (family == "sp1") return [v](const Quaterniond& x) { return dirac_sp1(x, v); };
  if (family == "reparametrized") {
    const Quaterniond g = cfg.contains("gamma") ? parse_quaternion(cfg.at("gamma"), "gamma") : Quaterniond::identity();
    if (std::abs(g.norm() - 1) > 1e-10) throw ValidationError("config_range", "'gamma' must be a unit quaternion");
    return [v, g](const Quaterniond& x) { return dirac_sp1(x.conjugate() * g, v); };
  }
  if (family == "constant") {
    const Quaterniond q = cfg.contains("q") ? parse_quaternion(cfg.at("q"), "q") : Quaterniond(0.6, 0.8, 0, 0);
    dirac_sp1(q, v).validate();
    return [v, q](const Quaterniond&) { return dirac_sp1(q, v); };
  }
  throw ValidationError("config_value", "family must be weyl, sp1, reparametrized or constant");
}

void run_dd(const json& cfg, const Output& out) {
  check_keys(cfg, "dd config",
             {"out", "threads", "seed", "subcommand", "family", "rho", "gamma", "gamma_matrix", "q", "potential", "grid",
              "epsilon", "band", "margin", "matrix_n", "survey"});
  const FamilyFn family = parse_family(cfg);
  SphereGrid grid = parse_sphere_grid(cfg, false);
  if (get_string(cfg, "family", "weyl") == "reparametrized" && cfg.contains("gamma"))
    grid.left = parse_quaternion(cfg.at("gamma"), "gamma");
  DDOptions o;
  o.epsilon = get_number(cfg, "epsilon", 0.1);
  o.band = get_number(cfg, "band", -1);
  o.margin = get_number(cfg, "margin", -1);
  o.matrix_n = positive_int(cfg, "matrix_n", 1500);
  o.survey = parse_survey(cfg);

  out.prepare();
  const DDResult r = dd_invariant(grid, family, o);
  json body;
  body["dd"] = r.dd;
  body["residual"] = rounded_json(r.residual);
  body["max_flux"] = rounded_json(r.max_flux);
  body["window_rank"] = r.window_rank;
  body["grid"] = {grid.s2.n_lat, grid.s2.n_lon, grid.n_chi};
  body["grid_length"] = rounded_json(r.grid_length);
  body["nodes_checked"] = r.nodes_checked;
  body["frame_nodes"] = r.frame_nodes;
  out.summary("dd.json", body);
}

void run_gapfill(const json& cfg, const Output& out) {
  check_keys(cfg, "gapfill config",
             {"out", "threads", "seed", "subcommand", "family", "rho", "gamma", "gamma_matrix", "q", "potential", "grid",
              "delta", "resolution", "survey"});
  const FamilyFn family = parse_family(cfg);
  const SphereGrid grid = parse_sphere_grid(cfg, true);
  const double delta = get_number(cfg, "delta", 0.05);
  const double res = get_number(cfg, "resolution", 0.01);
  const SurveyOptions so = parse_survey(cfg);
  if (!(delta >= 0 && delta < 1)) throw ValidationError("config_range", "'delta' must lie in [0, 1)");
  if (!(res > 0)) throw ValidationError("config_range", "'resolution' must be positive");

  out.prepare();
  std::vector<double> all;
  for (const auto& level : sphere_spectra(grid, family, so))
    for (const auto& node : level) all.insert(all.end(), node.begin(), node.end());
  const GapFillResult r = gap_fill_report(all, delta, res);
  std::vector<Row> rows;
  for (const auto& b : coverage_profile(all, delta, res)) rows.push_back({b.center, static_cast<long long>(b.count)});
  out.csv("gapfill.csv", {"lambda", "count"}, rows);
  json body;
  body["coverage"] = rounded_json(r.coverage);
  body["max_gap"] = rounded_json(r.max_gap);
  body["eigenvalue_count"] = r.eigenvalue_count;
  body["interval"] = {rounded(r.lo), rounded(r.hi)};
  body["grid"] = {grid.s2.n_lat, grid.s2.n_lon, grid.n_chi};
  out.summary("gapfill.json", body);
}

// --- fermi ---------------------------------------------------------------------------------

void run_fermi(const json& cfg, const Output& out) {
  check_keys(cfg, "fermi config",
             {"out", "threads", "seed", "subcommand", "gamma", "gamma_matrix", "mu", "potential", "r0", "r1",
              "n_radial", "n_lat", "n_lon", "n_chi", "tol_fs", "survey"});
  WeylFamilySpec w;
  w.bc = parse_weyl_bc(cfg);
  w.potential = parse_potential(cfg, 4);
  w.fermi_level = get_number(cfg, "mu", 0.0);
  w.validate();
  FermiScanOptions o;
  o.r0 = get_number(cfg, "r0", std::abs(w.fermi_level) + 0.1);
  o.r1 = get_number(cfg, "r1", 2.0);
  o.n_radial = positive_int(cfg, "n_radial", 10);
  o.n_lat = positive_int(cfg, "n_lat", 8);
  o.n_lon = positive_int(cfg, "n_lon", 16);
  o.n_chi = positive_int(cfg, "n_chi", 24);
  o.tol_fs = get_number(cfg, "tol_fs", 0.02);
  o.survey = parse_survey(cfg);

  out.prepare();
  const FermiSurfaceCloud c = fermi_surface_scan(w, o);
  std::vector<Row> rows;
  double disp = 0;
  for (const auto& p : c.points) {
    rows.push_back({p.p(0), p.p(1), p.p(2), p.p(3), p.eigenvalue, p.residual});
    disp = std::max(disp, std::abs(p.p(0) - w.fermi_level));
  }
  out.csv("fermi.csv", {"p1", "p2", "p3", "p4", "nearest_eigenvalue", "residual"}, rows);
  json body;
  body["points"] = c.points.size();
  body["nonempty_at_every_radius"] = c.nonempty_at_every_radius();
  json radii = json::array();
  for (std::size_t i = 0; i < c.radii.size(); ++i) radii.push_back({{"radius", rounded(c.radii[i])}, {"points", c.per_radius[i]}});
  body["radii"] = radii;
  body["angular_step"] = rounded_json(c.angular_step);
  body["max_abs_p1_minus_mu"] = rounded_json(disp);
  out.summary("fermi.json", body);
}

// --- arc3d ---------------------------------------------------------------------------------

void run_arc3d(const json& cfg, const Output& out) {
  check_keys(cfg, "arc3d config",
             {"out", "threads", "seed", "subcommand", "omega0", "rho_max", "n_rho", "n_arg", "tol", "evans"});
  const cd omega0 = cfg.contains("omega0") ? parse_complex(cfg.at("omega0"), "omega0") : cd(1, 0);
  if (std::abs(std::abs(omega0) - 1) > 1e-10) throw ValidationError("config_range", "'omega0' must have unit modulus");
  const double rho_max = get_number(cfg, "rho_max", 2.0);
  const int n_rho = positive_int(cfg, "n_rho", 8);
  const int n_arg = positive_int(cfg, "n_arg", 64);
  const double tol = get_number(cfg, "tol", 1e-8);
  const json& ev = sub(cfg, "evans");
  check_keys(ev, "evans", {"resolution", "root_tol"});
  const double res = get_number(ev, "resolution", 0.02);
  const double root_tol = get_number(ev, "root_tol", 1e-12);
  if (!(rho_max > 0)) throw ValidationError("config_range", "'rho_max' must be positive");
  if (!(tol > 0)) throw ValidationError("config_range", "'tol' must be positive");

  out.prepare();
  const std::size_t cells = static_cast<std::size_t>(n_rho) * n_arg;
  std::vector<Row> rows(cells);
  std::vector<int> numeric(cells), exact(cells);
  parallel_for(cells, [&](std::size_t c) {
    const int i = static_cast<int>(c / n_arg), j = static_cast<int>(c % n_arg);
    const double rho = rho_max * (i + 1) / n_rho;
    const double arg = -M_PI + 2 * M_PI * (j + 1) / n_arg;
    const cd omega = std::polar(1.0, arg);
    MidgapOptions mo;
    mo.resolution = res * rho;
    mo.root_tol = root_tol * rho;
    mo.eigenfunctions = false;
    const auto states = find_midgap_eigenvalues(EvansContext(dirac_u1(rho, std::conj(omega) * omega0)), mo);
    bool zero = false;
    for (const auto& s : states) zero = zero || std::abs(s.eigenvalue) <= tol * rho;
    numeric[c] = zero;
    exact[c] = fermi_arc_ray_3d(omega0, rho, omega);
    rows[c] = {rho, arg, static_cast<long long>(numeric[c]), static_cast<long long>(exact[c])};
  });
  out.csv("arc3d.csv", {"rho", "arg_omega", "has_zero_mode", "exact_ray"}, rows);
  int zero_cells = 0, mismatches = 0;
  for (std::size_t c = 0; c < cells; ++c) {
    zero_cells += numeric[c];
    mismatches += numeric[c] != exact[c];
  }
  json body;
  body["zero_mode_cells"] = zero_cells;
  body["mismatches_with_ray"] = mismatches;
  body["ray_arg"] = rounded_json(std::arg(omega0 * cd(0, 1)));
  out.summary("arc3d.json", body);
}

// --- selftest ------------------------------------------------------------------------------

void run_selftest(const json& cfg, const Output& out) {
  check_keys(cfg, "selftest config", {"out", "threads", "seed", "subcommand", "samples"});
  const int samples = positive_int(cfg, "samples", 20);
  Rng rng(static_cast<std::uint64_t>(get_int(cfg, "seed", 0)));
  out.prepare();

  std::vector<Row> rows;
  bool all = true;
  auto record = [&](const std::string& name, bool pass, double value) {
    rows.push_back({name, static_cast<long long>(pass), value});
    all = all && pass;
  };

  const CliffordReport cl = clifford_check(dirac_set());
  record("clifford", cl.all_pass(), cl.chirality_deviation);

  double mul = 0;
  for (int i = 0; i < samples; ++i) {
    const Quaterniond a = rng.unit_quaternion(), b = rng.unit_quaternion();
    mul = std::max(mul, ((a * b).matrix() - a.matrix() * b.matrix()).cwiseAbs().maxCoeff());
  }
  record("quaternion_product", mul <= 1e-12, mul);

  double worst = 0;
  bool counts = true;
  for (int i = 0; i < samples; ++i) {
    const Quaterniond q = rng.unit_quaternion();
    const auto st = find_midgap_eigenvalues(dirac_sp1(q), 0.01);
    counts = counts && st.size() == 1;
    if (st.size() == 1) worst = std::max(worst, std::abs(st[0].eigenvalue - q.real()));
  }
  record("sp1_evans_vs_exact", counts && worst <= 1e-9, worst);

  const ParamLoop loop = ParamLoop::circle(32, [](cd w) { return dirac_u1(1.0, w); });
  const int flow = spectral_flow(loop, 0.0).flow;
  record("u1_spectral_flow", flow == 1, flow);

  const S2Grid grid{8, 16};
  const ChernResult ch =
      berry_flux_chern(grid, frames_on(grid, [](const Eigen::Vector3d& n) { return Frame(negative_spinor(n)); }));
  record("hopf_chern", std::abs(ch.chern) == 1, ch.chern);

  out.csv("selftest.csv", {"check", "pass", "value"}, rows);
  if (!all) throw ComputationError("selftest_failed", "at least one self-test check failed");
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s{"spectrum", "flow", "chern", "dd", "gapfill", "fermi", "arc3d", "selftest"};
  return s;
}

std::string format_number(double x) {
  if (x == 0) x = 0;  // drops the sign of negative zero
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.11e", x);
  return buf;
}

void run(const std::string& subcommand, const json& config) {
  if (!config.is_object()) throw ValidationError("config_type", "config must be a JSON object");
  if (config.contains("subcommand") && config.at("subcommand") != subcommand)
    throw ValidationError("config_value", "config is for subcommand '" + get_string(config, "subcommand", "") + "'");
  const int threads = get_int(config, "threads", 1);
  if (threads < 1) throw ValidationError("config_range", "'threads' must be positive");
  get_int(config, "seed", 0);
  default_threads() = threads;
  const Output out(subcommand, config);
  if (subcommand == "spectrum") return run_spectrum(config, out);
  if (subcommand == "flow") return run_flow(config, out);
  if (subcommand == "chern") return run_chern(config, out);
  if (subcommand == "dd") return run_dd(config, out);
  if (subcommand == "gapfill") return run_gapfill(config, out);
  if (subcommand == "fermi") return run_fermi(config, out);
  if (subcommand == "arc3d") return run_arc3d(config, out);
  if (subcommand == "selftest") return run_selftest(config, out);
  throw ValidationError("unknown_subcommand", "unknown subcommand '" + subcommand + "'");
}

namespace {

int report(int code, const std::string& tag, const std::string& message) {
  json e;
  e["error"] = tag;
  e["message"] = message;
  e["exit_code"] = code;
  std::cerr << e.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"halfdirac: spectra and topology of half-line Dirac operator families"};
  app.set_version_flag("--version", std::string(kVersion));
  std::string config_path, out;
  int threads = 0;
  long long seed = 0;
  auto add_common = [&](CLI::App* c) {
    c->add_option("--config", config_path, "JSON config file");
    c->add_option("--out", out, "output directory (overrides config 'out')");
    c->add_option("--threads", threads, "worker threads (overrides config 'threads')");
    c->add_option("--seed", seed, "random seed (overrides config 'seed')");
  };
  for (const auto& name : subcommands()) add_common(app.add_subcommand(name, "run the " + name + " experiment"));
  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report(kExitValidation, "usage", e.what());
  }
  const std::string name = app.get_subcommands().front()->get_name();
  CLI::App* sc = app.get_subcommands().front();

  try {
    json config = json::object();
    if (!config_path.empty()) {
      std::ifstream f(config_path, std::ios::binary);
      if (!f) throw ValidationError("config_file", "cannot read config file '" + config_path + "'");
      try {
        config = json::parse(f);
      } catch (const json::parse_error& e) {
        throw ValidationError("config_parse", e.what());
      }
    }
    if (!config.is_object()) throw ValidationError("config_type", "config must be a JSON object");
    if (sc->count("--out")) config["out"] = out;
    if (sc->count("--threads")) config["threads"] = threads;
    if (sc->count("--seed")) config["seed"] = seed;
    run(name, config);
  } catch (const ValidationError& e) {
    return report(kExitValidation, e.code(), e.what());
  } catch (const ComputationError& e) {
    return report(kExitComputation, e.code(), e.what());
  } catch (const json::exception& e) {
    return report(kExitValidation, "config_type", e.what());
  } catch (const std::exception& e) {
    return report(kExitComputation, "internal", e.what());
  }
  return kExitOk;
}

}  // namespace halfdirac::cli
