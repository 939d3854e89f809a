#include "c0ipm/material.hpp"

#include "c0ipm/errors.hpp"

#include <cmath>
#include <string>

namespace c0ipm {

void validate(const MaterialParameters& params, int n_sd) {
  if (n_sd != 2 && n_sd != 3) {
    throw ParameterError("material: n_sd must be 2 or 3, got " + std::to_string(n_sd));
  }
  if (!(params.E > 0.0)) throw ParameterError("material: Young modulus must be positive");
  if (!(params.nu > -1.0 && params.nu < 0.5)) {
    throw ParameterError("material: Poisson ratio must lie in (-1, 0.5), got " +
                         std::to_string(params.nu));
  }
  if (params.l < 0.0) throw ParameterError("material: internal length must be non-negative");
  if (params.piezo_axis < 0 || params.piezo_axis >= n_sd) {
    throw ParameterError("material: piezo_axis out of range");
  }
  if (params.electric_active) {
    if (params.kappa.size() != static_cast<std::size_t>(n_sd)) {
      throw ParameterError("material: kappa needs one value per axis");
    }
    for (double k : params.kappa) {
      if (!(k > 0.0)) throw ParameterError("material: dielectric constants must be positive");
    }
  }
}

MaterialTensors build_material_tensors(const MaterialParameters& params, int n_sd) {
  validate(params, n_sd);
  MaterialTensors mat;
  mat.dim = n_sd;
  mat.l2 = params.l * params.l;
  mat.l = params.l;
  mat.E = params.E;

  const double G = params.E / (2.0 * (1.0 + params.nu));
  double lambda = params.E * params.nu / ((1.0 + params.nu) * (1.0 - 2.0 * params.nu));
  if (n_sd == 2 && params.plane == PlaneMode::stress) {
    lambda = 2.0 * lambda * G / (lambda + 2.0 * G);
  }
  auto delta = [](int a, int b) { return a == b ? 1.0 : 0.0; };
  for (int i = 0; i < n_sd; ++i)
    for (int j = 0; j < n_sd; ++j)
      for (int k = 0; k < n_sd; ++k)
        for (int l = 0; l < n_sd; ++l)
          mat.C(i, j, k, l) = lambda * delta(i, j) * delta(k, l) +
                              G * (delta(i, k) * delta(j, l) + delta(i, l) * delta(j, k));

  const int a = params.piezo_axis;
  for (int l = 0; l < n_sd; ++l) {
    for (int i = 0; i < n_sd; ++i) {
      for (int j = 0; j < n_sd; ++j) {
        double value = 0.0;
        if (l == a) {
          if (i == a && j == a) value = params.eL;
          else if (i == j) value = params.eT;
        } else if ((i == a && j == l) || (i == l && j == a)) {
          value = params.eS;
        }
        mat.e(l, i, j) = value;
      }
    }
  }

  // Cubic three-constant flexoelectric tensor, symmetric in the strain indices.
  for (int l = 0; l < n_sd; ++l)
    for (int i = 0; i < n_sd; ++i)
      for (int j = 0; j < n_sd; ++j)
        for (int k = 0; k < n_sd; ++k) {
          double value = 0.0;
          if (l == i && i == j && j == k) value = params.muL;
          else if (i == j && k == l) value = params.muT;
          else if ((i == l && j == k) || (j == l && i == k)) value = params.muS;
          mat.mu(l, i, j, k) = value;
        }

  if (params.electric_active) {
    for (int i = 0; i < n_sd; ++i) mat.kappa(i, i) = params.kappa[static_cast<std::size_t>(i)];
  }
  return mat;
}

Rank3 strain_gradient_stress(const Rank3& grad_eps, const MaterialTensors& mat) {
  Rank3 s;
  const int n = mat.dim;
  if (mat.l2 == 0.0) return s;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int l = 0; l < n; ++l)
          for (int m = 0; m < n; ++m) acc += mat.C(i, j, l, m) * grad_eps(l, m, k);
        s(i, j, k) = mat.l2 * acc;
      }
  return s;
}

PointStresses evaluate_constitutive(const PointKinematics& kin, const MaterialTensors& mat) {
  PointStresses out;
  const int n = mat.dim;
  const Vec3& E = kin.Efield;

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) acc += mat.C(i, j, k, l) * kin.eps(k, l);
      for (int l = 0; l < n; ++l) acc -= E[l] * mat.e(l, i, j);
      out.sigma_hat(i, j) = acc;
    }

  out.sigma_tilde = strain_gradient_stress(kin.grad_eps, mat);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double acc = 0.0;
        for (int l = 0; l < n; ++l) acc += E[l] * mat.mu(l, i, j, k);
        out.sigma_tilde(i, j, k) -= acc;
      }

  for (int l = 0; l < n; ++l) {
    double acc = 0.0;
    for (int m = 0; m < n; ++m) acc += mat.kappa(l, m) * E[m];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        acc += mat.e(l, i, j) * kin.eps(i, j);
        for (int k = 0; k < n; ++k) acc += mat.mu(l, i, j, k) * kin.grad_eps(i, j, k);
      }
    out.D_hat[l] = acc;
  }
  return out;
}

Vec3 double_traction(const Rank3& sigma_tilde, const Vec3& n, int dim) {
  if (std::abs(n.head(dim).norm() - 1.0) > 1e-12) {
    throw GeometryError("double_traction: normal is not unit length");
  }
  Vec3 r = Vec3::Zero();
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      for (int k = 0; k < dim; ++k) r[i] += sigma_tilde(i, j, k) * n[j] * n[k];
  return r;
}

MaterialTensors uncoupled(MaterialTensors mat) {
  mat.e = Rank3{};
  mat.mu = Rank4{};
  return mat;
}

}  // namespace c0ipm
