#pragma once

#include "c0ipm/material.hpp"
#include "c0ipm/mesh.hpp"

#include <Eigen/Dense>

namespace c0ipm {

/// Dense forms over all displacement dofs (node-major, dim per node).
/// a(u,v) = volume strain-gradient energy, b(u,v) = sum over interior faces of {r(u)}.{r(v)}.
struct PenaltyForms {
  int dim = 2;
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd kernel;  ///< affine displacement fields, one per column
  double E = 1.0;
  double l = 0.0;
  double h = 0.0;  ///< smallest element size
};

struct PenaltyEstimate {
  double lambda_max = 0.0;
  double alpha_equivalent = 0.0;
  double beta_recommended = 0.0;
  bool fallback = false;          ///< no interior faces: beta taken from the formula
  int deflated = 0;               ///< dimension of the removed null space of A
  Eigen::VectorXd eigenvector;    ///< full-length, A-normalized
};

/// Throws ParameterError when l = 0 and CapabilityError above `max_dofs`.
/// `with_elastic` adds the C:eps term to a (sharper bound).
PenaltyForms assemble_penalty_forms(const Mesh& mesh, const MaterialTensors& mat, bool with_elastic = false,
                                    int max_dofs = 6000);

/// Largest eigenvalue of B x = lambda A x on the complement of the null space of A.
PenaltyEstimate estimate_penalty(const PenaltyForms& forms, double safety = 2.0, double fallback_alpha = 100.0);

/// beta = alpha E l^2 / h. Throws ParameterError for h <= 0.
double beta_from_formula(double alpha, double E, double l, double h);

}  // namespace c0ipm
