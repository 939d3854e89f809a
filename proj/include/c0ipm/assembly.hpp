#pragma once

#include "c0ipm/material.hpp"
#include "c0ipm/mesh.hpp"
#include "c0ipm/refelem.hpp"

#include <Eigen/Sparse>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace c0ipm {

/// Mesh, reference element and boundary classification bundled for assembly.
struct Discretization {
  const Mesh* mesh = nullptr;
  ReferenceElement re;
  TaggedConnectivity tagged;
  std::vector<double> h_elem;
  std::vector<double> h_face;

  Discretization(const Mesh& m, const BoundarySpec& spec);
  [[nodiscard]] int dim() const { return mesh->dim; }
};

/// Blocked dof layout: all displacement unknowns (dim per representative node),
/// then all potentials, then electrode multipliers. Periodic slave nodes share the
/// dofs of their master.
struct DofMap {
  int dim = 2;
  int node_count = 0;
  int rep_count = 0;
  bool with_potential = true;
  std::vector<int> rep_index;  ///< node -> representative index
  int full_size = 0;           ///< u and phi dofs
  std::vector<char> fixed;     ///< per full dof
  std::vector<double> fixed_value;
  std::vector<int> reduced;    ///< full dof -> reduced index, -1 if fixed
  int free_count = 0;
  /// Electrode constraints: phi(full dof first) - phi(full dof second) = 0.
  std::vector<std::pair<int, int>> multipliers;

  [[nodiscard]] int u(int node, int c) const { return rep_index[static_cast<std::size_t>(node)] * dim + c; }
  [[nodiscard]] int phi(int node) const { return dim * rep_count + rep_index[static_cast<std::size_t>(node)]; }
  [[nodiscard]] int size() const { return free_count + static_cast<int>(multipliers.size()); }
};

struct AssemblyOptions {
  double alpha = 100.0;             ///< beta = alpha E l^2 / h_F
  std::optional<double> beta;       ///< explicit beta, overrides alpha
  std::optional<double> alpha_D;    ///< second-Dirichlet penalty; defaults to the interior one
  std::optional<double> beta_D;
  bool with_potential = true;       ///< false drops the potential unknowns
  bool include_elastic = true;      ///< false drops the C:eps volume term
  bool eliminate_dirichlet = true;  ///< false keeps every dof free (kernel checks, reactions)
};

/// Per-face interior penalty value.
double face_beta(const Discretization& disc, const MaterialTensors& mat, const AssemblyOptions& opts, int face);
double face_beta_D(const Discretization& disc, const MaterialTensors& mat, const AssemblyOptions& opts, int face);

DofMap build_dofmap(const Discretization& disc, const BoundarySpec& spec, const AssemblyOptions& opts);

struct GlobalSystem {
  DofMap dofs;
  Eigen::SparseMatrix<double> K;  ///< reduced, symmetric, full storage
  Eigen::VectorXd f;
  double beta_min = 0.0, beta_max = 0.0;
};

/// Linear map from the stacked kinematic vector [eps (n^2), grad eps (n^3), grad phi (n)]
/// to the stacked conjugate stresses [sigma_hat, sigma_tilde, D_hat].
Eigen::MatrixXd constitutive_matrix(const MaterialTensors& mat, bool include_elastic = true);

/// Local dof order: u (node a, component c) at a*dim + c, then phi at nb*dim + a.
struct LocalSystem {
  Eigen::MatrixXd K;
  Eigen::VectorXd f;
};

/// Volume terms and volume loads of one element.
LocalSystem element_matrices(const ReferenceElement& re, const GeometryFactors& geom, const Eigen::MatrixXd& M,
                             bool with_potential, const VectorFn& body = {}, const PointFn& charge = {});

/// Interior-face jump, mean and penalty terms for one face. Returns the matrix over
/// [left dofs, right dofs]. `perm` maps right face points to left face points.
Eigen::MatrixXd face_matrices(const ReferenceElement& re, const GeometryFactors& left, const GeometryFactors& right,
                              const std::vector<int>& perm, const Eigen::MatrixXd& M, double beta,
                              bool with_potential);

/// Stacked per-point operators on one face side: jump rows (dn = d/dn of each
/// displacement dof) and double traction rows r(N) for all local dofs.
struct FaceOperators {
  Eigen::MatrixXd dn;  ///< (nq*dim) x ndof_local
  Eigen::MatrixXd r;   ///< (nq*dim) x ndof_local
};
FaceOperators face_operators(const ReferenceElement& re, const GeometryFactors& side, const std::vector<Vec3>& normals,
                             const std::vector<int>& point_order, const Eigen::MatrixXd& M, bool with_potential);

GlobalSystem assemble_system(const Discretization& disc, const MaterialTensors& mat, const BoundarySpec& spec,
                             const AssemblyOptions& opts);

/// K_full x - f_full over all full dofs for a full-length dof vector (reactions).
Eigen::VectorXd full_residual(const Discretization& disc, const MaterialTensors& mat, const BoundarySpec& spec,
                              const AssemblyOptions& opts, const DofMap& dofs, const Eigen::VectorXd& full_values);

/// Local-to-full dof list of an element.
std::vector<int> element_dofs(const Discretization& disc, const DofMap& dofs, int e);

/// 64-bit FNV-1a hash over the matrix pattern, values and load vector.
std::uint64_t system_hash(const GlobalSystem& sys);

/// Coordinate text dump `i j value`, one nonzero per line.
void dump_matrix(const Eigen::SparseMatrix<double>& K, const std::string& path);

/// max |K - K^T| / max |K|.
double symmetry_defect(const Eigen::SparseMatrix<double>& K);

}  // namespace c0ipm
