#pragma once

#include "c0ipm/assembly.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace c0ipm {

/// Solves K x = f by sparse LU with partial pivoting after symmetric Ruiz equilibration,
/// plus up to three steps of iterative refinement. Throws NumericalError on a singular
/// factorization, a normwise backward error above `tol`, or a condition estimate above 1e13.
Eigen::VectorXd solve_system(const GlobalSystem& sys, double tol = 1e-10);

/// Discrete solution with Dirichlet values embedded, evaluable inside elements.
struct SolutionField {
  const Discretization* disc = nullptr;
  DofMap dofs;
  Eigen::VectorXd full;         ///< u and phi over the full dof layout
  Eigen::VectorXd multipliers;  ///< electrode multipliers

  [[nodiscard]] Vec3 nodal_u(int node) const;
  [[nodiscard]] double nodal_phi(int node) const;
  /// Element-local coefficient vector in the local dof order of element_matrices.
  [[nodiscard]] Eigen::VectorXd element_values(int e) const;
  /// Value u (first dim entries) and phi (last) at reference point xi of element e.
  [[nodiscard]] Eigen::VectorXd evaluate(int e, const Vec3& xi) const;
  /// Finds the element containing x (Newton inversion of the element map).
  /// Throws DomainError when x is outside the mesh.
  [[nodiscard]] Eigen::VectorXd evaluate_at(const Vec3& x) const;
};

SolutionField make_solution(const Discretization& disc, const GlobalSystem& sys, const Eigen::VectorXd& x);

/// Solve and embed in one call.
SolutionField solve(const Discretization& disc, const GlobalSystem& sys);

/// Spatial derivatives of a displacement/potential pair at one point.
/// d1u(i,j) = du_i/dx_j; higher orders append one index per derivative.
struct Jet {
  Vec3 u = Vec3::Zero();
  std::array<double, 9> d1u{};
  std::array<double, 27> d2u{};
  std::array<double, 81> d3u{};
  std::array<double, 243> d4u{};
  double phi = 0.0;
  Vec3 d1phi = Vec3::Zero();
  std::array<double, 9> d2phi{};
  std::array<double, 27> d3phi{};
};

/// Analytic field with derivatives: u up to order 4, phi up to order 3.
struct ExactField {
  int dim = 2;
  std::function<Jet(const Vec3&)> jet;
};

/// u_c = a_c sin(w s) + b_c cos(w s), phi = a_phi sin(w s) + b_phi cos(w s), s = k.x, w = 2 pi.
ExactField plane_wave_field(int dim, const Vec3& k, const Vec3& u_sin, const Vec3& u_cos, double phi_sin,
                            double phi_cos);

/// Multivariate polynomial as a list of (coefficient, exponents).
struct Monomial {
  double c = 0.0;
  std::array<int, 3> p{0, 0, 0};
};
using Polynomial = std::vector<Monomial>;

ExactField polynomial_field(int dim, const std::array<Polynomial, 3>& u, const Polynomial& phi);

/// Body force and charge density making `exact` solve the strong equations:
/// b = -div(sigma_hat - div sigma_tilde), q = div D_hat.
struct Sources {
  VectorFn body;
  PointFn charge;
};
Sources manufactured_source(const ExactField& exact, const MaterialTensors& mat);

/// Fills every data function of `spec` (g1, g2, g3, r_n, w_n, body, charge) from `exact`.
void attach_exact_data(BoundarySpec& spec, const ExactField& exact, const MaterialTensors& mat);

/// Stresses of the exact field at x.
PointStresses exact_stresses(const ExactField& exact, const MaterialTensors& mat, const Vec3& x);

struct FieldErrors {
  double u = 0.0, phi = 0.0;          ///< absolute L2 errors
  double u_norm = 0.0, phi_norm = 0.0;  ///< L2 norms of the exact fields
};

/// L2 errors with quadrature of order 2p + 2. A null exact field measures the solution itself.
FieldErrors l2_error(const SolutionField& sol, const ExactField* exact);

/// slope_k = log(e_k / e_{k+1}) / log(h_k / h_{k+1}). Throws ParameterError on
/// non-positive errors or non-decreasing h.
std::vector<double> convergence_rates(const std::vector<double>& errors, const std::vector<double>& h);

struct BeamReport {
  double a_prime = 0.0;
  double k_eff = 0.0;
  double k_eff_ref = 0.0;
  double e_prime = 0.0;
  std::string circuit = "open";
};

/// sqrt(int E.kappa.E / int eps:C:eps). Throws NumericalError when the strain energy vanishes.
double effective_coupling(const SolutionField& sol, const MaterialTensors& mat);

/// e' = k_eff(sol) / k_eff(reference), a' = -a eT / muT.
BeamReport effective_piezo(const SolutionField& sol, const MaterialTensors& mat, const SolutionField& reference,
                           const MaterialTensors& reference_mat, double thickness, double eT, double muT);

/// Rows `x y [z] u1 u2 [u3] phi` at every mesh node.
void write_field_dump(const SolutionField& sol, const std::string& path);

/// Header plus rows; values printed with %.10g.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
std::string format_number(double v);

}  // namespace c0ipm
