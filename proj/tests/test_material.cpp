#include "c0ipm/errors.hpp"
#include "c0ipm/material.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace c0ipm {
namespace {

MaterialParameters benchmark_params() {
  MaterialParameters p;
  p.E = 2.5;
  p.nu = 0.25;
  p.l = 1.1;
  p.kappa = {1.21, 1.21};
  p.eL = 7.2;
  p.eT = 1.33;
  p.eS = 1.73;
  p.muL = 1.5;
  p.muT = 1.34;
  p.muS = 5.47;
  p.piezo_axis = 0;
  return p;
}

PointKinematics random_kinematics(std::mt19937& rng, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointKinematics k;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const double v = u(rng);
      k.eps(i, j) = v;
      k.eps(j, i) = v;
      for (int c = 0; c < n; ++c) {
        const double g = u(rng);
        k.grad_eps(i, j, c) = g;
        k.grad_eps(j, i, c) = g;
      }
    }
  for (int i = 0; i < n; ++i) k.Efield[i] = u(rng);
  return k;
}

TEST(Material, IsotropicTensorMatchesVoigtTable) {
  auto p = benchmark_params();
  const auto mat = build_material_tensors(p, 2);
  // Plane-strain Voigt table: E/((1+nu)(1-2nu)) * [[1-nu, nu, 0], [nu, 1-nu, 0], [0, 0, (1-2nu)/2]].
  const double f = p.E / ((1 + p.nu) * (1 - 2 * p.nu));
  EXPECT_NEAR(mat.C(0, 0, 0, 0), 3.0, 1e-14);
  EXPECT_NEAR(mat.C(0, 0, 0, 0), f * (1 - p.nu), 1e-14);
  EXPECT_NEAR(mat.C(0, 0, 1, 1), f * p.nu, 1e-14);
  EXPECT_NEAR(mat.C(0, 1, 0, 1), f * (1 - 2 * p.nu) / 2, 1e-14);
  EXPECT_NEAR(mat.C(1, 1, 1, 1), 3.0, 1e-14);
}

TEST(Material, MajorAndMinorSymmetries) {
  for (int n : {2, 3}) {
    auto p = benchmark_params();
    p.kappa.assign(static_cast<std::size_t>(n), 1.21);
    const auto mat = build_material_tensors(p, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          EXPECT_EQ(mat.e(i, j, k), mat.e(i, k, j));
          for (int l = 0; l < n; ++l) {
            EXPECT_EQ(mat.C(i, j, k, l), mat.C(j, i, k, l));
            EXPECT_EQ(mat.C(i, j, k, l), mat.C(i, j, l, k));
            EXPECT_EQ(mat.C(i, j, k, l), mat.C(k, l, i, j));
            EXPECT_EQ(mat.mu(i, j, k, l), mat.mu(i, k, j, l));
          }
        }
  }
}

TEST(Material, PlaneStressSwitch) {
  auto p = benchmark_params();
  p.plane = PlaneMode::stress;
  const auto mat = build_material_tensors(p, 2);
  EXPECT_NEAR(mat.C(0, 0, 0, 0), p.E / (1 - p.nu * p.nu), 1e-14);
}

TEST(Material, StrainGradientModulus) {
  const auto mat = build_material_tensors(benchmark_params(), 2);
  Rank3 g;
  g(0, 0, 0) = 1.0;
  const auto s = strain_gradient_stress(g, mat);
  EXPECT_NEAR(s(0, 0, 0), 3.63, 1e-13);
}

TEST(Material, HShortcutMatchesRank6Contraction) {
  // Strain field eps(x) = eps0 + G x has constant gradient G; compare l^2 d_k (C:eps)_ij against
  // the literal h_{ijklmn} = l^2 C_{ijlm} delta_{kn} contraction.
  std::mt19937 rng(7);
  for (int n : {2, 3}) {
    auto p = benchmark_params();
    p.kappa.assign(static_cast<std::size_t>(n), 1.21);
    const auto mat = build_material_tensors(p, n);
    const auto kin = random_kinematics(rng, n);
    const auto fast = strain_gradient_stress(kin.grad_eps, mat);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          double ref = 0.0;
          for (int l = 0; l < n; ++l)
            for (int m = 0; m < n; ++m)
              for (int q = 0; q < n; ++q) {
                const double h = mat.l2 * mat.C(i, j, l, m) * (k == q ? 1.0 : 0.0);
                ref += h * kin.grad_eps(l, m, q);
              }
          EXPECT_NEAR(fast(i, j, k), ref, 1e-14 * (1 + std::abs(ref)));
        }
  }
}

TEST(Material, ZeroKinematicsGiveZeroStresses) {
  const auto mat = build_material_tensors(benchmark_params(), 2);
  const auto s = evaluate_constitutive(PointKinematics{}, mat);
  for (double v : s.sigma_hat.v) EXPECT_EQ(v, 0.0);
  for (double v : s.sigma_tilde.v) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(s.D_hat.norm(), 0.0);
}

TEST(Material, ConstantStrainOnlyPiezoElectricDisplacement) {
  const auto mat = build_material_tensors(benchmark_params(), 2);
  PointKinematics k;
  k.eps(0, 0) = 0.3;
  k.eps(0, 1) = k.eps(1, 0) = -0.2;
  k.eps(1, 1) = 0.1;
  const auto s = evaluate_constitutive(k, mat);
  for (double v : s.sigma_tilde.v) EXPECT_EQ(v, 0.0);
  for (int l = 0; l < 2; ++l) {
    double expected = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) expected += mat.e(l, i, j) * k.eps(i, j);
    EXPECT_NEAR(s.D_hat[l], expected, 1e-14);
  }
}

TEST(Material, UncoupledReducesToElasticityAndDielectric) {
  auto p = benchmark_params();
  p.eL = p.eT = p.eS = p.muL = p.muT = p.muS = 0.0;
  const auto mat = build_material_tensors(p, 2);
  for (double v : mat.e.v) EXPECT_EQ(v, 0.0);
  for (double v : mat.mu.v) EXPECT_EQ(v, 0.0);
  std::mt19937 rng(3);
  auto k = random_kinematics(rng, 2);
  const auto s = evaluate_constitutive(k, mat);
  EXPECT_NEAR(s.D_hat[0], 1.21 * k.Efield[0], 1e-14);
  EXPECT_NEAR(s.D_hat[1], 1.21 * k.Efield[1], 1e-14);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double c_eps = 0.0;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) c_eps += mat.C(i, j, a, b) * k.eps(a, b);
      EXPECT_NEAR(s.sigma_hat(i, j), c_eps, 1e-14);
    }
  // Block-diagonal: perturbing E leaves the mechanical stresses unchanged.
  auto k2 = k;
  k2.Efield = Vec3(5.0, -3.0, 0.0);
  const auto s2 = evaluate_constitutive(k2, mat);
  EXPECT_EQ(s.sigma_hat.v, s2.sigma_hat.v);
  EXPECT_EQ(s.sigma_tilde.v, s2.sigma_tilde.v);
}

TEST(Material, StressSymmetries) {
  std::mt19937 rng(11);
  for (int n : {2, 3}) {
    auto p = benchmark_params();
    p.kappa.assign(static_cast<std::size_t>(n), 1.21);
    const auto mat = build_material_tensors(p, n);
    for (int trial = 0; trial < 20; ++trial) {
      const auto s = evaluate_constitutive(random_kinematics(rng, n), mat);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          EXPECT_NEAR(s.sigma_hat(i, j), s.sigma_hat(j, i), 1e-14);
          for (int k = 0; k < n; ++k) EXPECT_NEAR(s.sigma_tilde(i, j, k), s.sigma_tilde(j, i, k), 1e-14);
        }
    }
  }
}

TEST(Material, CouplingIsAdjoint) {
  // Mechanical work of state a against the coupling stresses of a pure-field state b equals
  // minus the electric work of b against the electric displacement of a.
  std::mt19937 rng(5);
  for (int n : {2, 3}) {
    auto p = benchmark_params();
    p.kappa.assign(static_cast<std::size_t>(n), 1.21);
    const auto mat = build_material_tensors(p, n);
    for (int trial = 0; trial < 20; ++trial) {
      auto a = random_kinematics(rng, n);
      a.Efield.setZero();
      auto b = random_kinematics(rng, n);
      b.eps = Rank2{};
      b.grad_eps = Rank3{};
      const auto sa = evaluate_constitutive(a, mat);
      const auto sb = evaluate_constitutive(b, mat);
      double lhs = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          lhs += a.eps(i, j) * sb.sigma_hat(i, j);
          for (int k = 0; k < n; ++k) lhs += a.grad_eps(i, j, k) * sb.sigma_tilde(i, j, k);
        }
      const double rhs = -b.Efield.head(n).dot(sa.D_hat.head(n));
      EXPECT_NEAR(lhs, rhs, 1e-13 * (1 + std::abs(rhs)));
    }
  }
}

TEST(Material, DoubleTraction) {
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Rank3 s;
  EXPECT_EQ(double_traction(s, Vec3(1, 0, 0), 2).norm(), 0.0);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) s(i, j, k) = s(j, i, k) = u(rng);
  const auto r = double_traction(s, Vec3(1, 0, 0), 2);
  EXPECT_NEAR(r[0], s(0, 0, 0), 1e-15);
  EXPECT_NEAR(r[1], s(1, 0, 0), 1e-15);
  const Vec3 n = Vec3(0.6, 0.8, 0.0);
  const auto rp = double_traction(s, n, 2);
  const auto rm = double_traction(s, -n, 2);
  EXPECT_NEAR((rp - rm).norm(), 0.0, 1e-15);
  for (int i = 0; i < 2; ++i) {
    double ref = 0.0;
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) ref += s(i, j, k) * n[j] * n[k];
    EXPECT_NEAR(rp[i], ref, 1e-15);
  }
  EXPECT_THROW(double_traction(s, Vec3(1, 1, 0), 2), GeometryError);
}

TEST(Material, InvalidParametersRejected) {
  auto p = benchmark_params();
  p.nu = 0.5;
  EXPECT_THROW(build_material_tensors(p, 2), ParameterError);
  p = benchmark_params();
  p.kappa = {1.0, -1.0};
  EXPECT_THROW(build_material_tensors(p, 2), ParameterError);
  p.electric_active = false;
  EXPECT_NO_THROW(build_material_tensors(p, 2));
  p = benchmark_params();
  EXPECT_THROW(build_material_tensors(p, 4), ParameterError);
}

}  // namespace
}  // namespace c0ipm
