#include "c0ipm/errors.hpp"
#include "c0ipm/experiments.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>

using namespace c0ipm;

namespace {

constexpr int exit_usage = 1;
constexpr int exit_numerical = 2;
constexpr int exit_gate = 3;

int report(const PresetOutcome& out) {
  for (const auto& f : out.files) std::cout << "wrote " << f << "\n";
  for (const auto& n : out.notes) std::cout << n << "\n";
  for (const auto& g : out.gates) {
    std::cout << (g.passed ? "PASS " : "FAIL ") << g.name << ": " << format_number(g.value) << " (threshold "
              << format_number(g.threshold) << ")\n";
  }
  return out.passed() ? 0 : exit_gate;
}

int run_timed(const ProblemSpec& spec) {
  const auto t0 = std::chrono::steady_clock::now();
  const int code = report(run_preset(spec));
  if (!spec.deterministic) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "elapsed " << format_number(s) << " s\n";
  }
  return code;
}

int beta_estimate(const ProblemSpec& spec) {
  const Mesh mesh = spec_mesh(spec);
  const auto mat = spec_material(spec, mesh.dim);
  const auto est = estimate_penalty(assemble_penalty_forms(mesh, mat), spec.safety);
  std::cout << format_number(est.lambda_max) << "," << format_number(est.alpha_equivalent) << ","
            << format_number(est.beta_recommended) << "\n";
  return 0;
}

int mesh_info(const std::string& path) {
  const Mesh mesh = read_mesh(path);
  const ReferenceElement re(mesh.shape, mesh.degree);
  const auto conn = build_connectivity(mesh);
  std::map<int, int> tags;
  for (const auto& f : mesh.boundary_faces) ++tags[f.tag];
  double hmin = 1e300, hmax = 0.0;
  for (int e = 0; e < mesh.element_count(); ++e) {
    const double h = element_size(mesh, re, e);
    hmin = std::min(hmin, h);
    hmax = std::max(hmax, h);
  }
  std::cout << "dim " << mesh.dim << "\nshape " << shape_name(mesh.shape) << "\ndegree " << mesh.degree << "\nnodes "
            << mesh.node_count() << "\nelements " << mesh.element_count() << "\ninterior_faces "
            << conn.interior.size() << "\nboundary_faces " << conn.boundary.size() << "\n";
  for (const auto& [t, n] : tags) std::cout << "tag " << t << " " << n << "\n";
  std::cout << "h_min " << format_number(hmin) << "\nh_max " << format_number(hmax) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"C0 interior penalty solver for strain gradient elasticity and flexoelectricity"};
  app.require_subcommand(1);

  std::string config;
  auto* run = app.add_subcommand("run", "Run the pipeline described by a config file");
  run->add_option("--config", config, "key = value config file")->required();

  std::string preset;
  int p = 0, levels = 0;
  double alpha = 0.0;
  std::string out;
  bool deterministic = false;
  auto* pre = app.add_subcommand("preset", "Run a named experiment preset");
  pre->add_option("name", preset, "preset name")->required();
  pre->add_option("--p", p, "polynomial degree");
  pre->add_option("--levels", levels, "refinement levels");
  pre->add_option("--alpha", alpha, "penalty factor in beta = alpha E l^2 / h");
  pre->add_option("--out", out, "output directory");
  pre->add_flag("--deterministic", deterministic, "suppress timing output");

  std::string est_config;
  auto* est = app.add_subcommand("beta-estimate", "Print lambda_max, alpha_equivalent, beta");
  est->add_option("--config", est_config, "key = value config file")->required();

  std::string mesh_path;
  auto* info = app.add_subcommand("mesh-info", "Summarize a mesh file");
  info->add_option("file", mesh_path, "mesh file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_usage;
  }

  try {
    if (*run) return run_timed(parse_config(config));
    if (*pre) {
      ProblemSpec spec = preset_defaults(preset);
      if (pre->count("--p")) spec.degree = p;
      if (pre->count("--levels")) spec.levels = levels;
      if (pre->count("--alpha")) {
        spec.beta_mode = BetaMode::formula;
        spec.alpha = alpha;
        if (!spec.alphas.empty()) spec.alphas = {alpha};
      }
      if (pre->count("--out")) spec.out_dir = out;
      spec.deterministic = deterministic;
      validate_spec(spec);
      return run_timed(spec);
    }
    if (*est) return beta_estimate(parse_config(est_config));
    if (*info) return mesh_info(mesh_path);
  } catch (const ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_usage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure during " << current_stage() << ": " << e.what() << "\n";
    return exit_numerical;
  } catch (const GeometryError& e) {
    std::cerr << "numerical failure during " << current_stage() << ": " << e.what() << "\n";
    return exit_numerical;
  } catch (const Error& e) {
    std::cerr << "error during " << current_stage() << ": " << e.what() << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "error during " << current_stage() << ": " << e.what() << "\n";
    return exit_numerical;
  }
  return exit_usage;
}
