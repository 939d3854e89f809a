#pragma once

#include "c0ipm/penalty.hpp"
#include "c0ipm/solve_post.hpp"

#include <optional>
#include <string>
#include <vector>

namespace c0ipm {

enum class BetaMode { formula, estimated, explicit_value };
enum class Coupling { uncoupled, piezo, flexo };

/// One validated problem/preset description. Material values are stored in SI.
struct ProblemSpec {
  std::string preset;
  int degree = 3;
  int levels = 4;
  int divisions = 0;  ///< cells per side of the coarsest structured mesh, 0 for the preset choice
  Shape shape = Shape::triangle;
  TriangleSplit split = TriangleSplit::crossed;
  std::string mesh_file;  ///< external mesh for beta-estimate, empty for the structured one
  MaterialParameters material;
  Coupling coupling = Coupling::flexo;
  BetaMode beta_mode = BetaMode::formula;
  double alpha = 100.0;
  double beta = 0.0;  ///< explicit value
  std::optional<double> beta_D;
  std::vector<double> alphas;    ///< beta-sweep
  std::vector<double> a_primes;  ///< beam presets
  double safety = 2.0;           ///< estimated mode: beta = safety * lambda_max
  bool deterministic = false;
  std::string out_dir = ".";
};

const std::vector<std::string>& preset_names();

/// Defaults of a preset. Throws ParseError for an unknown name.
ProblemSpec preset_defaults(const std::string& name);

/// `key = value` lines, `#` comments. `preset` is required; every other key
/// overrides the preset default. Throws ParseError naming the key.
ProblemSpec parse_config_text(const std::string& text);
ProblemSpec parse_config(const std::string& path);

/// Checks levels, degree and beta mode. Throws ParseError.
void validate_spec(const ProblemSpec& spec);

/// Material of the spec with the coupling switch applied.
MaterialTensors spec_material(const ProblemSpec& spec, int dim);

/// Penalty options for a mesh sequence whose coarsest member is `coarse`.
/// The estimated mode converts 2 lambda_max on the coarse mesh into alpha.
AssemblyOptions penalty_options(const ProblemSpec& spec, const Mesh& coarse, const MaterialTensors& mat);

/// Name of the pipeline stage currently running, for error reports.
const std::string& current_stage();

struct Gate {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

struct ConvergenceRow {
  int level = 0;
  double h = 0.0;
  int ndof = 0;
  double err_u = 0.0, err_phi = 0.0;
  double rate_u = 0.0, rate_phi = 0.0;  ///< NaN on the first level
  double norm_u = 0.0, norm_phi = 0.0;
  bool solved = true;  ///< false when the solve failed (errors are NaN)
};

struct ConvergenceStudy {
  std::vector<ConvergenceRow> rows;
  bool nonconvergent = false;  ///< u error dropped by less than 10x over the levels
};

enum class Manufactured { square, periodic, cube };

/// `tolerate_failures` records a failed solve as an unsolved row instead of throwing.
ConvergenceStudy convergence_study(const ProblemSpec& spec, Manufactured kind, bool tolerate_failures = false);

/// Last-segment rate gates for the 2D and 3D convergence presets.
std::vector<Gate> convergence_gates(const ConvergenceStudy& study, int p, Coupling coupling, bool three_d);

enum class BeamModel { piezo, flexo, flexo_piezo };
enum class Circuit { open, closed };

struct BeamResult {
  double a_prime = 0.0;
  double e_prime = 0.0;
  double k_eff = 0.0, k_eff_ref = 0.0;
  double electrode_potential = 0.0;  ///< closed circuit: mean potential of the bottom face
  double electrode_spread = 0.0;     ///< max deviation among electrode nodes
};

/// Cantilever of thickness a = a' muT / |eT|, length 20a, clamped at x1 = 0 and
/// loaded at the top right corner. `model` selects which couplings are kept relative
/// to the spec material; the reference solve always drops mu.
BeamResult beam_solve(const ProblemSpec& spec, double a_prime, BeamModel model, Circuit circuit);

struct PenaltyCheck {
  PenaltyEstimate coarse, fine, doubled_l;
  double l_ratio = 0.0;
  double h_ratio = 0.0;
  double min_eig_safe = 0.0;   ///< constrained mechanical block with beta = 2 lambda_max
  double min_eig_small = 0.0;  ///< with beta = 0.01 lambda_max
};

PenaltyCheck penalty_check(const ProblemSpec& spec);

/// Smallest eigenvalue of the displacement block with x1 = 0 clamped (dense).
double smallest_mechanical_eigenvalue(const Mesh& mesh, const MaterialTensors& mat, double beta);

struct PatchResult {
  int degree = 0;
  Shape shape = Shape::triangle;
  double max_error = 0.0;  ///< relative to the largest nodal value
};

/// Polynomial fields of degree p, all Dirichlet conditions, 4x4 mesh.
PatchResult patch_test(int p, Shape shape);

struct PresetOutcome {
  std::vector<Gate> gates;
  std::vector<std::string> files;
  std::vector<std::string> notes;
  [[nodiscard]] bool passed() const;
};

/// Runs a preset, writes its CSV files to spec.out_dir and evaluates its gates.
PresetOutcome run_preset(const ProblemSpec& spec);

/// Mesh the beta-estimate subcommand works on: spec.mesh_file or the coarsest structured mesh.
Mesh spec_mesh(const ProblemSpec& spec);

}  // namespace c0ipm
