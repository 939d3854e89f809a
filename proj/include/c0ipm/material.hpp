#pragma once

#include "c0ipm/tensor.hpp"

#include <vector>

namespace c0ipm {

/// Two-dimensional kinematic assumption for the isotropic elasticity tensor.
enum class PlaneMode { strain, stress };

/// Scalar material description. Units are SI.
struct MaterialParameters {
  double E = 1.0;               ///< Young modulus [Pa]
  double nu = 0.0;              ///< Poisson ratio
  double l = 0.0;               ///< internal length scale [m]
  std::vector<double> kappa;    ///< per-axis dielectric constants [J/V^2/m]
  double eL = 0.0, eT = 0.0, eS = 0.0;     ///< piezoelectric coefficients [J/V/m^2]
  double muL = 0.0, muT = 0.0, muS = 0.0;  ///< flexoelectric coefficients [J/V/m]
  int piezo_axis = 0;
  PlaneMode plane = PlaneMode::strain;
  bool electric_active = true;
};

/// Constitutive tensors. The strain-gradient tensor h = l^2 C (x) delta is not
/// stored; it is applied as l^2 times C acting on each gradient slice of the strain.
struct MaterialTensors {
  int dim = 2;
  Rank4 C;
  Rank3 e;      ///< e(l, i, j): polarization l, strain ij
  Rank4 mu;     ///< mu(l, i, j, k): polarization l, strain ij, gradient direction k
  Rank2 kappa;
  double l2 = 0.0;
  double E = 1.0;  ///< Young modulus, kept for penalty scaling
  double l = 0.0;
};

/// Strain, strain gradient grad_eps(i,j,k) = d eps_ij / d x_k, and electric field E = -grad phi.
struct PointKinematics {
  Rank2 eps;
  Rank3 grad_eps;
  Vec3 Efield = Vec3::Zero();
};

struct PointStresses {
  Rank2 sigma_hat;
  Rank3 sigma_tilde;
  Vec3 D_hat = Vec3::Zero();
};

/// Throws ParameterError on an invalid parameter set.
void validate(const MaterialParameters& params, int n_sd);

MaterialTensors build_material_tensors(const MaterialParameters& params, int n_sd);

/// sigma_hat = C:eps - E.e,  sigma_tilde = h:grad_eps - E.mu,  D_hat = kappa.E + e:eps + mu:grad_eps.
PointStresses evaluate_constitutive(const PointKinematics& kin, const MaterialTensors& mat);

/// Mechanical part of the double stress only: l^2 d_k (C:eps)_ij.
Rank3 strain_gradient_stress(const Rank3& grad_eps, const MaterialTensors& mat);

/// r_i = sigma_tilde_ijk n_j n_k. Throws GeometryError when |n| differs from 1 by more than 1e-12.
Vec3 double_traction(const Rank3& sigma_tilde, const Vec3& n, int dim);

/// Same material with the piezoelectric and flexoelectric tensors cleared.
MaterialTensors uncoupled(MaterialTensors mat);

}  // namespace c0ipm
