#include "c0ipm/experiments.hpp"

#include "c0ipm/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace c0ipm {

namespace {

std::size_t sz(int i) { return static_cast<std::size_t>(i); }
constexpr double nan = std::numeric_limits<double>::quiet_NaN();

std::string g_stage = "setup";

struct StageScope {
  explicit StageScope(std::string s) { g_stage = std::move(s); }
};

// Material of the manufactured convergence problems.
MaterialParameters manufactured_material() {
  MaterialParameters p;
  p.E = 2.5;
  p.nu = 0.25;
  p.l = 1.1;
  p.kappa = {1.21};
  p.eL = 7.2;
  p.eT = 1.33;
  p.eS = 1.73;
  p.muL = 1.5;
  p.muT = 1.34;
  p.muS = 5.47;
  p.piezo_axis = 0;
  return p;
}

MaterialParameters beam_material() {
  MaterialParameters p;
  p.E = 100e9;
  p.nu = 0.0;
  p.l = 0.0;
  p.kappa = {11e-9};
  p.eT = -4.4;
  p.muT = 1e-6;
  p.piezo_axis = 1;
  return p;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out))
    throw ParseError("config key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ParseError("config key '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) throw ParseError("config key '" + key + "': empty list");
  return out;
}

template <class T>
T to_enum(const std::string& key, const std::string& v, const std::vector<std::pair<std::string, T>>& options) {
  std::string names;
  for (const auto& [name, value] : options) {
    if (name == v) return value;
    names += (names.empty() ? "" : ", ") + name;
  }
  throw ParseError("config key '" + key + "': '" + v + "' is not one of " + names);
}

double last_rate(const std::vector<ConvergenceRow>& rows, bool u) {
  if (rows.size() < 2) return nan;
  return u ? rows.back().rate_u : rows.back().rate_phi;
}

std::string csv_path(const ProblemSpec& spec, const std::string& name) {
  std::filesystem::create_directories(spec.out_dir);
  return (std::filesystem::path(spec.out_dir) / (name + ".csv")).string();
}

std::vector<std::vector<std::string>> convergence_rows(const ConvergenceStudy& s) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : s.rows) {
    rows.push_back({std::to_string(r.level), format_number(r.h), std::to_string(r.ndof), format_number(r.err_u),
                    format_number(r.err_phi), format_number(r.rate_u), format_number(r.rate_phi)});
  }
  return rows;
}

const std::vector<std::string> convergence_header = {"level", "h", "ndof", "err_u", "err_phi", "rate_u", "rate_phi"};

int resolved_divisions(const ProblemSpec& spec, bool three_d) {
  if (spec.divisions > 0) return spec.divisions;
  if (three_d) return spec.degree >= 3 ? 1 : 2;
  return 2;
}

Mesh manufactured_mesh(const ProblemSpec& spec, Manufactured kind, int level) {
  const bool cube = kind == Manufactured::cube;
  const int n = resolved_divisions(spec, cube) << level;
  if (cube) return structured_mesh(Box{Vec3::Zero(), Vec3::Constant(0.5)}, {n, n, n}, Shape::hexahedron, spec.degree);
  const Shape shape = spec.shape == Shape::hexahedron ? Shape::triangle : spec.shape;
  return structured_mesh(Box{Vec3::Zero(), Vec3(1, 1, 0)}, {n, n, 1}, shape, spec.degree, spec.split);
}

ExactField manufactured_field(Manufactured kind) {
  if (kind == Manufactured::cube)
    return plane_wave_field(3, Vec3(1, 2, -1), Vec3(0, 1, 0), Vec3(1, 0, 1), 1.0, 0.0);
  return plane_wave_field(2, Vec3(1, 1, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), 1.0, 1.0);
}

BoundarySpec manufactured_bc(Manufactured kind) {
  BoundarySpec bc;
  const int tags = kind == Manufactured::cube ? 6 : 4;
  for (int t = 0; t < tags; ++t) {
    if (kind == Manufactured::periodic && t < 2) continue;
    bc.d1.insert(t);
    bc.n2.insert(t);
    bc.phi_d.insert(t);
  }
  if (kind == Manufactured::periodic) bc.periodic.push_back({1, 0, Vec3(-1, 0, 0)});
  return bc;
}

Gate make_gate(std::string name, double value, double threshold, bool passed) {
  return Gate{std::move(name), value, threshold, passed};
}

Gate min_gate(const std::string& name, double value, double threshold) {
  return make_gate(name, value, threshold, std::isfinite(value) && value >= threshold);
}

}  // namespace

const std::string& current_stage() { return g_stage; }

bool PresetOutcome::passed() const {
  return std::all_of(gates.begin(), gates.end(), [](const Gate& g) { return g.passed; });
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"convergence2d", "convergence2d-coupled", "beta-sweep",
                                                 "cantilever",    "circuit-compare",       "periodic2d",
                                                 "convergence3d", "beta-estimate",         "patch-test"};
  return names;
}

ProblemSpec preset_defaults(const std::string& name) {
  ProblemSpec s;
  s.preset = name;
  s.material = manufactured_material();
  if (name == "convergence2d") {
    s.coupling = Coupling::uncoupled;
  } else if (name == "convergence2d-coupled") {
    s.coupling = Coupling::flexo;
  } else if (name == "periodic2d") {
    s.split = TriangleSplit::diagonal;
  } else if (name == "beta-sweep") {
    s.degree = 4;
    s.alphas = {1, 10, 100, 1e4};
  } else if (name == "convergence3d") {
    s.degree = 2;
    s.levels = 3;
    s.shape = Shape::hexahedron;
  } else if (name == "cantilever" || name == "circuit-compare") {
    s.degree = 4;
    s.levels = 1;
    s.material = beam_material();
    s.beta_mode = BetaMode::explicit_value;
    s.beta = 100.0;
    s.a_primes = {1.76, 2, 4, 8};
    if (name == "circuit-compare") {
      s.material.nu = 0.37;
      s.material.kappa = {11e-9, 12.48e-9};
      s.material.muL = 1e-6;
      s.a_primes = {2, 4};
    }
  } else if (name == "beta-estimate") {
    s.levels = 1;
    s.coupling = Coupling::uncoupled;
  } else if (name == "patch-test") {
    s.degree = 0;
    s.levels = 1;
  } else {
    std::string all;
    for (const auto& n : preset_names()) all += (all.empty() ? "" : ", ") + n;
    throw ParseError("unknown preset '" + name + "' (known: " + all + ")");
  }
  return s;
}

ProblemSpec parse_config_text(const std::string& text) {
  std::map<std::string, std::pair<std::string, int>> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("config line " + std::to_string(lineno) + ": empty key");
    if (value.empty()) throw ParseError("config key '" + key + "': empty value");
    if (!kv.emplace(key, std::make_pair(value, lineno)).second)
      throw ParseError("config key '" + key + "' given twice (line " + std::to_string(lineno) + ")");
  }
  if (!kv.count("preset")) throw ParseError("config key 'preset' is required");
  ProblemSpec s = preset_defaults(kv.at("preset").first);

  double length_unit = 1.0;
  double E_unit = 1.0, kappa_unit = 1.0, mu_unit = 1.0;
  if (auto it = kv.find("units"); it != kv.end()) {
    if (to_enum<bool>("units", it->second.first, {{"si", false}, {"beam", true}})) {
      E_unit = 1e9;
      kappa_unit = 1e-9;
      mu_unit = 1e-6;
    }
  }

  static const std::vector<std::string> known = {
      "preset", "units", "p",   "levels", "divisions", "shape", "split", "mesh",  "E",        "nu",        "l",
      "kappa",  "eL",    "eT",  "eS",     "muL",       "muT",   "muS",   "piezo_axis", "plane",   "coupling",
      "beta_mode", "alpha", "beta", "beta_d", "alphas", "a_prime", "safety", "deterministic", "out"};
  for (const auto& [key, entry] : kv) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ParseError("config line " + std::to_string(entry.second) + ": unknown key '" + key + "'");
  }

  auto get = [&](const std::string& key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second.first;
  };
  auto& m = s.material;
  if (auto v = get("p")) s.degree = to_int("p", *v);
  if (auto v = get("levels")) s.levels = to_int("levels", *v);
  if (auto v = get("divisions")) s.divisions = to_int("divisions", *v);
  if (auto v = get("shape"))
    s.shape = to_enum<Shape>("shape", *v,
                             {{"triangle", Shape::triangle},
                              {"quadrilateral", Shape::quadrilateral},
                              {"hexahedron", Shape::hexahedron}});
  if (auto v = get("split"))
    s.split = to_enum<TriangleSplit>("split", *v,
                                     {{"diagonal", TriangleSplit::diagonal}, {"crossed", TriangleSplit::crossed}});
  if (auto v = get("mesh")) s.mesh_file = *v;
  if (auto v = get("E")) m.E = to_double("E", *v) * E_unit;
  if (auto v = get("nu")) m.nu = to_double("nu", *v);
  if (auto v = get("l")) m.l = to_double("l", *v) * length_unit;
  if (auto v = get("kappa")) {
    m.kappa = to_list("kappa", *v);
    for (auto& k : m.kappa) k *= kappa_unit;
  }
  if (auto v = get("eL")) m.eL = to_double("eL", *v);
  if (auto v = get("eT")) m.eT = to_double("eT", *v);
  if (auto v = get("eS")) m.eS = to_double("eS", *v);
  if (auto v = get("muL")) m.muL = to_double("muL", *v) * mu_unit;
  if (auto v = get("muT")) m.muT = to_double("muT", *v) * mu_unit;
  if (auto v = get("muS")) m.muS = to_double("muS", *v) * mu_unit;
  if (auto v = get("piezo_axis")) m.piezo_axis = to_int("piezo_axis", *v);
  if (auto v = get("plane"))
    m.plane = to_enum<PlaneMode>("plane", *v, {{"strain", PlaneMode::strain}, {"stress", PlaneMode::stress}});
  if (auto v = get("coupling"))
    s.coupling = to_enum<Coupling>("coupling", *v,
                                   {{"uncoupled", Coupling::uncoupled},
                                    {"piezo", Coupling::piezo},
                                    {"flexo", Coupling::flexo}});
  if (auto v = get("alphas")) s.alphas = to_list("alphas", *v);
  if (auto v = get("a_prime")) s.a_primes = to_list("a_prime", *v);
  if (auto v = get("safety")) s.safety = to_double("safety", *v);
  if (auto v = get("deterministic")) s.deterministic = to_bool("deterministic", *v);
  if (auto v = get("out")) s.out_dir = *v;
  if (auto v = get("beta_d")) s.beta_D = to_double("beta_d", *v);

  // Exactly one beta mode.
  const std::string* mode = get("beta_mode");
  const std::string* alpha = get("alpha");
  const std::string* beta = get("beta");
  if (mode) {
    s.beta_mode = to_enum<BetaMode>("beta_mode", *mode,
                                    {{"formula", BetaMode::formula},
                                     {"estimated", BetaMode::estimated},
                                     {"explicit", BetaMode::explicit_value}});
    if (s.beta_mode != BetaMode::explicit_value && beta)
      throw ParseError("config keys 'beta_mode' and 'beta' conflict: beta is only used with beta_mode = explicit");
    if (s.beta_mode != BetaMode::formula && alpha)
      throw ParseError("config keys 'beta_mode' and 'alpha' conflict: alpha is only used with beta_mode = formula");
    if (s.beta_mode == BetaMode::explicit_value && !beta)
      throw ParseError("config key 'beta' is required with beta_mode = explicit");
  } else {
    if (alpha && beta) throw ParseError("config keys 'alpha' and 'beta' conflict: give one beta mode");
    if (beta) s.beta_mode = BetaMode::explicit_value;
    if (alpha) s.beta_mode = BetaMode::formula;
  }
  if (alpha) s.alpha = to_double("alpha", *alpha);
  if (beta) s.beta = to_double("beta", *beta);
  validate_spec(s);
  return s;
}

ProblemSpec parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void validate_spec(const ProblemSpec& s) {
  if (s.levels < 1) throw ParseError("config key 'levels': must be at least 1");
  if (s.degree < 0 || (s.degree == 0 && s.preset != "patch-test"))
    throw ParseError("config key 'p': must be at least 1");
  if (s.divisions < 0) throw ParseError("config key 'divisions': must be positive");
  if (s.beta_mode == BetaMode::formula && !(s.alpha > 0.0)) throw ParseError("config key 'alpha': must be positive");
  if (s.beta_mode != BetaMode::explicit_value && s.material.l == 0.0)
    throw ParseError("config key 'beta': the alpha formula and the estimate give beta = 0 for l = 0, set beta");
  if (s.beta_mode == BetaMode::explicit_value && !(s.beta > 0.0))
    throw ParseError("config key 'beta': must be positive");
  if (!(s.safety > 0.0)) throw ParseError("config key 'safety': must be positive");
  if (s.beta_D && !(*s.beta_D > 0.0)) throw ParseError("config key 'beta_d': must be positive");
  for (double a : s.alphas)
    if (!(a > 0.0)) throw ParseError("config key 'alphas': values must be positive");
  for (double a : s.a_primes)
    if (!(a > 0.0)) throw ParseError("config key 'a_prime': values must be positive");
}

MaterialTensors spec_material(const ProblemSpec& spec, int dim) {
  MaterialParameters p = spec.material;
  if (p.kappa.size() == 1) p.kappa.assign(sz(dim), p.kappa[0]);
  if (spec.coupling != Coupling::flexo) p.muL = p.muT = p.muS = 0.0;
  if (spec.coupling == Coupling::uncoupled) p.eL = p.eT = p.eS = 0.0;
  return build_material_tensors(p, dim);
}

AssemblyOptions penalty_options(const ProblemSpec& spec, const Mesh& coarse, const MaterialTensors& mat) {
  AssemblyOptions o;
  o.beta_D = spec.beta_D;
  switch (spec.beta_mode) {
    case BetaMode::explicit_value:
      o.beta = spec.beta;
      break;
    case BetaMode::formula:
      o.alpha = spec.alpha;
      break;
    case BetaMode::estimated: {
      StageScope stage("penalty estimate");
      const auto est = estimate_penalty(assemble_penalty_forms(coarse, mat), spec.safety);
      o.alpha = est.fallback ? 100.0 : spec.safety * est.alpha_equivalent;
      break;
    }
  }
  return o;
}

ConvergenceStudy convergence_study(const ProblemSpec& spec, Manufactured kind, bool tolerate_failures) {
  const bool three_d = kind == Manufactured::cube;
  const int dim = three_d ? 3 : 2;
  const auto mat = spec_material(spec, dim);
  const auto exact = manufactured_field(kind);
  ConvergenceStudy study;
  AssemblyOptions opts;
  for (int level = 0; level < spec.levels; ++level) {
    const std::string tag = "level " + std::to_string(level) + ": ";
    g_stage = tag + "mesh";
    const Mesh mesh = manufactured_mesh(spec, kind, level);
    if (level == 0) opts = penalty_options(spec, mesh, mat);
    BoundarySpec bc = manufactured_bc(kind);
    attach_exact_data(bc, exact, mat);
    g_stage = tag + "assemble";
    const Discretization disc(mesh, bc);
    const GlobalSystem sys = assemble_system(disc, mat, bc, opts);
    ConvergenceRow row;
    row.level = level;
    row.h = *std::max_element(disc.h_elem.begin(), disc.h_elem.end());
    row.ndof = static_cast<int>(sys.K.rows());
    g_stage = tag + "solve";
    try {
      const SolutionField sol = solve(disc, sys);
      g_stage = tag + "error";
      const FieldErrors err = l2_error(sol, &exact);
      row.err_u = err.u;
      row.err_phi = err.phi;
      row.norm_u = err.u_norm;
      row.norm_phi = err.phi_norm;
    } catch (const NumericalError&) {
      if (!tolerate_failures) throw;
      row.solved = false;
      row.err_u = row.err_phi = nan;
    }
    row.rate_u = row.rate_phi = nan;
    if (!study.rows.empty()) {
      const auto& prev = study.rows.back();
      const double dh = std::log(prev.h / row.h);
      auto rate = [&](double e0, double e1) { return e0 > 0 && e1 > 0 ? std::log(e0 / e1) / dh : nan; };
      row.rate_u = rate(prev.err_u, row.err_u);
      row.rate_phi = rate(prev.err_phi, row.err_phi);
    }
    study.rows.push_back(row);
  }
  g_stage = "report";
  if (study.rows.size() >= 2) {
    const double drop = study.rows.front().err_u / study.rows.back().err_u;
    study.nonconvergent = !(drop >= 10.0);
  }
  return study;
}

std::vector<Gate> convergence_gates(const ConvergenceStudy& study, int p, Coupling coupling, bool three_d) {
  std::vector<Gate> gates;
  if (study.rows.size() < 2) return gates;
  const double ru = last_rate(study.rows, true), rphi = last_rate(study.rows, false);
  const std::string ps = "p=" + std::to_string(p) + " ";
  if (p == 1) {
    const double drop = study.rows.front().err_u / study.rows.back().err_u;
    gates.push_back(make_gate(ps + "u error reduction below 10x (non-convergence)", drop, 10.0, study.nonconvergent));
    return gates;
  }
  if (three_d) {
    gates.push_back(min_gate(ps + "rate u", ru, p - 0.5));
    gates.push_back(min_gate(ps + "rate phi", rphi, p - 0.7));
  } else if (coupling == Coupling::uncoupled) {
    if (p == 3) gates.push_back(min_gate(ps + "rate u", ru, 3.0));
    if (p == 4) gates.push_back(min_gate(ps + "rate u", ru, 4.0));
    if (p == 2 || p == 3) gates.push_back(min_gate(ps + "rate phi", rphi, p + 0.7));
  } else {
    if (p == 3) gates.push_back(min_gate(ps + "rate u", ru, 3.0));
    if (p == 4) gates.push_back(min_gate(ps + "rate u", ru, 3.5));
    if (p >= 3) gates.push_back(min_gate(ps + "rate phi", rphi, p - 0.7));
  }
  return gates;
}

BeamResult beam_solve(const ProblemSpec& spec, double a_prime, BeamModel model, Circuit circuit) {
  const MaterialParameters base = spec.material;
  if (base.eT == 0.0 || base.muT == 0.0) throw ParameterError("beam presets need nonzero eT and muT");
  const double a = -a_prime * base.muT / base.eT;
  if (!(a > 0.0)) throw ParameterError("beam thickness a = -a' muT / eT must be positive");
  const double L = 20.0 * a;
  const int d = spec.divisions > 0 ? spec.divisions : 2;
  g_stage = "beam a'=" + format_number(a_prime) + ": mesh";
  const Mesh mesh = structured_mesh(Box{Vec3(0, -a / 2, 0), Vec3(L, a / 2, 0)}, {20 * d, d, 1}, Shape::triangle,
                                    spec.degree);

  BoundarySpec bc;
  bc.d1 = {0};
  bc.n1 = {1, 2, 3};
  bc.n2 = {0, 1, 2, 3};
  if (circuit == Circuit::open) {
    bc.phi_d = {1};
    bc.phi_n = {0, 2, 3};
  } else {
    bc.phi_d = {3};
    bc.phi_n = {0, 1, 2};
    bc.electrodes = {{2}};
  }
  bc.point_loads = {PointLoad{Vec3(L, a / 2, 0), Vec3(0, -1.0, 0)}};

  MaterialParameters pm = base;
  if (pm.kappa.size() == 1) pm.kappa.assign(2, pm.kappa[0]);
  MaterialParameters ref = pm;
  ref.muL = ref.muT = ref.muS = 0.0;
  if (model == BeamModel::piezo) pm = ref;
  if (model == BeamModel::flexo) pm.eL = pm.eT = pm.eS = 0.0;
  const auto mat = build_material_tensors(pm, 2);
  const auto ref_mat = build_material_tensors(ref, 2);

  const Discretization disc(mesh, bc);
  const AssemblyOptions opts = penalty_options(spec, mesh, mat);
  g_stage = "beam a'=" + format_number(a_prime) + ": solve";
  const SolutionField sol = solve(disc, assemble_system(disc, mat, bc, opts));
  const SolutionField ref_sol = solve(disc, assemble_system(disc, ref_mat, bc, opts));
  g_stage = "beam a'=" + format_number(a_prime) + ": report";
  const BeamReport rep = effective_piezo(sol, mat, ref_sol, ref_mat, a, base.eT, base.muT);

  BeamResult out;
  out.a_prime = rep.a_prime;
  out.e_prime = rep.e_prime;
  out.k_eff = rep.k_eff;
  out.k_eff_ref = rep.k_eff_ref;
  if (circuit == Circuit::closed) {
    std::vector<double> v;
    for (int i = 0; i < mesh.node_count(); ++i)
      if (std::abs(mesh.nodes[sz(i)][1] + a / 2) <= 1e-9 * a) v.push_back(sol.nodal_phi(i));
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double spread = 0.0;
    for (double x : v) spread = std::max(spread, std::abs(x - v.front()));
    out.electrode_potential = mean;
    out.electrode_spread = spread;
  }
  return out;
}

double smallest_mechanical_eigenvalue(const Mesh& mesh, const MaterialTensors& mat, double beta) {
  BoundarySpec bc;
  const int tags = 2 * mesh.dim;
  bc.d1 = {0};
  for (int t = 0; t < tags; ++t) {
    if (t > 0) bc.n1.insert(t);
    bc.n2.insert(t);
    bc.phi_n.insert(t);
  }
  const Discretization disc(mesh, bc);
  AssemblyOptions o;
  o.with_potential = false;
  o.beta = beta;
  const Eigen::MatrixXd K(assemble_system(disc, uncoupled(mat), bc, o).K);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalues of the mechanical block failed");
  return es.eigenvalues()[0];
}

PenaltyCheck penalty_check(const ProblemSpec& spec) {
  const int n = resolved_divisions(spec, false);
  const Shape shape = spec.shape == Shape::hexahedron ? Shape::triangle : spec.shape;
  const Box box{Vec3::Zero(), Vec3(1, 1, 0)};
  const Mesh coarse = structured_mesh(box, {n, n, 1}, shape, spec.degree, spec.split);
  const Mesh fine = structured_mesh(box, {2 * n, 2 * n, 1}, shape, spec.degree, spec.split);
  const auto mat = spec_material(spec, 2);
  ProblemSpec doubled = spec;
  doubled.material.l *= 2.0;
  PenaltyCheck c;
  g_stage = "penalty estimate";
  c.coarse = estimate_penalty(assemble_penalty_forms(coarse, mat), spec.safety);
  c.fine = estimate_penalty(assemble_penalty_forms(fine, mat), spec.safety);
  c.doubled_l = estimate_penalty(assemble_penalty_forms(coarse, spec_material(doubled, 2)), spec.safety);
  c.l_ratio = c.doubled_l.lambda_max / c.coarse.lambda_max;
  c.h_ratio = c.fine.lambda_max / c.coarse.lambda_max;
  g_stage = "coercivity check";
  c.min_eig_safe = smallest_mechanical_eigenvalue(coarse, mat, 2.0 * c.coarse.lambda_max);
  c.min_eig_small = smallest_mechanical_eigenvalue(coarse, mat, 0.01 * c.coarse.lambda_max);
  return c;
}

PatchResult patch_test(int p, Shape shape) {
  g_stage = "patch test p=" + std::to_string(p);
  const Mesh mesh = structured_mesh(Box{Vec3::Zero(), Vec3(1, 1, 0)}, {4, 4, 1}, shape, p);
  BoundarySpec bc;
  for (int t = 0; t < 4; ++t) {
    bc.d1.insert(t);
    bc.d2.insert(t);
    bc.phi_d.insert(t);
  }
  ProblemSpec spec = preset_defaults("patch-test");
  const auto mat = spec_material(spec, 2);
  Polynomial ux = {{0.3, {0, 0, 0}}, {1.0, {p, 0, 0}}, {-0.7, {1, p - 1, 0}}};
  Polynomial uy = {{-0.2, {0, 1, 0}}, {0.4, {p - 1, 1, 0}}, {0.9, {0, p, 0}}};
  Polynomial ph = {{1.0, {p, 0, 0}}, {0.6, {1, 1, 0}}, {-1.2, {0, p, 0}}};
  const auto exact = polynomial_field(2, {ux, uy, {}}, ph);
  attach_exact_data(bc, exact, mat);
  const Discretization disc(mesh, bc);
  const SolutionField sol = solve(disc, assemble_system(disc, mat, bc, AssemblyOptions{}));
  double err = 0.0, ref = 0.0;
  for (int i = 0; i < mesh.node_count(); ++i) {
    const Jet J = exact.jet(mesh.nodes[sz(i)]);
    err = std::max({err, (sol.nodal_u(i) - J.u).norm(), std::abs(sol.nodal_phi(i) - J.phi)});
    ref = std::max({ref, J.u.norm(), std::abs(J.phi)});
  }
  return PatchResult{p, shape, err / ref};
}

Mesh spec_mesh(const ProblemSpec& spec) {
  if (!spec.mesh_file.empty()) return read_mesh(spec.mesh_file);
  const int p = std::max(spec.degree, 1);
  if (spec.shape == Shape::hexahedron) {
    const int n = spec.divisions > 0 ? spec.divisions : 1;
    return structured_mesh(Box{Vec3::Zero(), Vec3::Constant(0.5)}, {n, n, n}, Shape::hexahedron, p);
  }
  const int n = resolved_divisions(spec, false);
  return structured_mesh(Box{Vec3::Zero(), Vec3(1, 1, 0)}, {n, n, 1}, spec.shape, p, spec.split);
}

namespace {

PresetOutcome run_convergence(const ProblemSpec& spec, Manufactured kind) {
  PresetOutcome out;
  const auto study = convergence_study(spec, kind);
  const std::string file = csv_path(spec, spec.preset);
  write_csv(file, convergence_header, convergence_rows(study));
  out.files.push_back(file);
  out.gates = convergence_gates(study, spec.degree, spec.coupling, kind == Manufactured::cube);
  out.notes.push_back(std::string("non-convergence flag: ") + (study.nonconvergent ? "set" : "clear"));
  if (kind == Manufactured::periodic) {
    ProblemSpec full = spec;
    const auto ref = convergence_study(full, Manufactured::square);
    for (bool u : {true, false}) {
      const double a = last_rate(study.rows, u), b = last_rate(ref.rows, u);
      const double diff = std::abs(a - b);
      out.gates.push_back(make_gate(std::string("periodic vs Dirichlet rate difference ") + (u ? "u" : "phi"), diff,
                                    0.3, std::isfinite(diff) && diff <= 0.3));
    }
  }
  return out;
}

PresetOutcome run_beta_sweep(const ProblemSpec& spec) {
  PresetOutcome out;
  std::vector<std::vector<std::string>> rows;
  std::map<double, ConvergenceStudy> studies;
  for (double alpha : spec.alphas) {
    ProblemSpec s = spec;
    s.beta_mode = BetaMode::formula;
    s.alpha = alpha;
    const auto study = convergence_study(s, Manufactured::square, true);
    for (auto r : convergence_rows(study)) {
      r.insert(r.begin(), format_number(alpha));
      rows.push_back(std::move(r));
    }
    studies[alpha] = study;
  }
  std::vector<std::string> header = convergence_header;
  header.insert(header.begin(), "alpha");
  const std::string file = csv_path(spec, spec.preset);
  write_csv(file, header, rows);
  out.files.push_back(file);

  auto final_error = [&](double alpha) { return studies.at(alpha).rows.back().err_u; };
  if (spec.degree >= 4 && studies.count(100) && studies.count(1e4)) {
    const double r = final_error(1e4) / final_error(100);
    const double f = std::max(r, 1.0 / r);
    out.gates.push_back(make_gate("p=" + std::to_string(spec.degree) + " final u error ratio alpha=1e4 vs 100", f, 5.0,
                                  std::isfinite(f) && f <= 5.0));
  }
  if (spec.degree == 3 && studies.count(1) && studies.count(10)) {
    const auto& s1 = studies.at(1);
    const bool failed = std::any_of(s1.rows.begin(), s1.rows.end(), [](const auto& r) { return !r.solved; });
    const double r = final_error(1) / final_error(10);
    out.gates.push_back(make_gate("p=3 alpha=1 fails or error > 10x alpha=10", failed ? nan : r, 10.0,
                                  failed || (std::isfinite(r) && r > 10.0)));
  }
  return out;
}

PresetOutcome run_cantilever(const ProblemSpec& spec) {
  PresetOutcome out;
  std::vector<std::vector<std::string>> flexo_rows, fp_rows;
  for (double ap : spec.a_primes) {
    const auto f = beam_solve(spec, ap, BeamModel::flexo, Circuit::open);
    const auto fp = beam_solve(spec, ap, BeamModel::flexo_piezo, Circuit::open);
    flexo_rows.push_back({format_number(f.a_prime), format_number(f.e_prime), "open"});
    fp_rows.push_back({format_number(fp.a_prime), format_number(fp.e_prime), "open"});
    const double ref_f = std::sqrt(12.0 / (ap * ap)), ref_fp = std::sqrt(1.0 + 12.0 / (ap * ap));
    const double df = std::abs(f.e_prime / ref_f - 1.0), dfp = std::abs(fp.e_prime / ref_fp - 1.0);
    out.gates.push_back(make_gate("a'=" + format_number(ap) + " flexo e' relative deviation", df, 0.05, df <= 0.05));
    out.gates.push_back(
        make_gate("a'=" + format_number(ap) + " flexo-piezo e' relative deviation", dfp, 0.05, dfp <= 0.05));
  }
  const std::vector<std::string> header = {"a_prime", "e_prime", "circuit"};
  for (const auto& [name, rows] : {std::pair{"cantilever_flexo", &flexo_rows}, {"cantilever_flexo_piezo", &fp_rows}}) {
    const std::string file = csv_path(spec, name);
    write_csv(file, header, *rows);
    out.files.push_back(file);
  }
  return out;
}

PresetOutcome run_circuits(const ProblemSpec& spec) {
  PresetOutcome out;
  std::vector<std::vector<std::string>> rows;
  for (double ap : spec.a_primes) {
    const auto open = beam_solve(spec, ap, BeamModel::flexo_piezo, Circuit::open);
    const auto closed = beam_solve(spec, ap, BeamModel::flexo_piezo, Circuit::closed);
    rows.push_back({format_number(open.a_prime), format_number(open.e_prime), "open"});
    rows.push_back({format_number(closed.a_prime), format_number(closed.e_prime), "closed"});
    out.gates.push_back(make_gate("a'=" + format_number(ap) + " e'_open - e'_closed", open.e_prime - closed.e_prime,
                                  0.0, open.e_prime > closed.e_prime));
    const double rel = closed.electrode_spread / std::abs(closed.electrode_potential);
    out.gates.push_back(make_gate("a'=" + format_number(ap) + " electrode potential spread / |V|", rel, 1e-10,
                                  std::isfinite(rel) && rel <= 1e-10));
  }
  const std::string file = csv_path(spec, spec.preset);
  write_csv(file, {"a_prime", "e_prime", "circuit"}, rows);
  out.files.push_back(file);
  return out;
}

PresetOutcome run_beta_estimate(const ProblemSpec& spec) {
  PresetOutcome out;
  const auto c = penalty_check(spec);
  const std::string file = csv_path(spec, spec.preset);
  write_csv(file, {"lambda_max", "alpha_equivalent", "beta"},
            {{format_number(c.coarse.lambda_max), format_number(c.coarse.alpha_equivalent),
              format_number(c.coarse.beta_recommended)}});
  out.files.push_back(file);
  out.notes.push_back("alpha_equivalent " + format_number(c.coarse.alpha_equivalent) +
                      " (compare with the formula alpha of 10 to 100)");
  const double dl = std::abs(c.l_ratio / 4.0 - 1.0);
  out.gates.push_back(make_gate("l -> 2l lambda ratio deviation from 4", dl, 1e-8, dl <= 1e-8));
  out.gates.push_back(
      make_gate("h -> h/2 lambda ratio in [1.5, 2.5]", c.h_ratio, 1.5, c.h_ratio >= 1.5 && c.h_ratio <= 2.5));
  out.gates.push_back(make_gate("beta = 2 lambda: smallest eigenvalue > 0", c.min_eig_safe, 0.0, c.min_eig_safe > 0.0));
  out.gates.push_back(
      make_gate("beta = 0.01 lambda: smallest eigenvalue < 0", c.min_eig_small, 0.0, c.min_eig_small < 0.0));
  return out;
}

PresetOutcome run_patch(const ProblemSpec& spec) {
  PresetOutcome out;
  std::vector<int> degrees = spec.degree > 0 ? std::vector<int>{spec.degree} : std::vector<int>{2, 3, 4};
  std::vector<std::vector<std::string>> rows;
  for (int p : degrees) {
    for (Shape shape : {Shape::triangle, Shape::quadrilateral}) {
      const auto r = patch_test(p, shape);
      rows.push_back({std::to_string(p), shape_name(shape), format_number(r.max_error)});
      out.gates.push_back(make_gate("p=" + std::to_string(p) + " " + shape_name(shape) + " max nodal error",
                                    r.max_error, 1e-8, r.max_error < 1e-8));
    }
  }
  const std::string file = csv_path(spec, spec.preset);
  write_csv(file, {"p", "shape", "max_nodal_error"}, rows);
  out.files.push_back(file);
  return out;
}

}  // namespace

PresetOutcome run_preset(const ProblemSpec& spec) {
  validate_spec(spec);
  g_stage = "setup";
  const std::string& n = spec.preset;
  if (n == "convergence2d" || n == "convergence2d-coupled") return run_convergence(spec, Manufactured::square);
  if (n == "periodic2d") return run_convergence(spec, Manufactured::periodic);
  if (n == "convergence3d") return run_convergence(spec, Manufactured::cube);
  if (n == "beta-sweep") return run_beta_sweep(spec);
  if (n == "cantilever") return run_cantilever(spec);
  if (n == "circuit-compare") return run_circuits(spec);
  if (n == "beta-estimate") return run_beta_estimate(spec);
  if (n == "patch-test") return run_patch(spec);
  preset_defaults(n);  // throws for unknown names
  return {};
}

}  // namespace c0ipm
