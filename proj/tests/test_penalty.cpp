#include "c0ipm/assembly.hpp"
#include "c0ipm/errors.hpp"
#include "c0ipm/penalty.hpp"

#include <gtest/gtest.h>

#include <random>

namespace c0ipm {
namespace {

const Box unit_square{Vec3(0, 0, 0), Vec3(1, 1, 0)};

MaterialTensors material(double l, double E = 2.5) {
  MaterialParameters p;
  p.E = E;
  p.nu = 0.25;
  p.l = l;
  p.kappa = {1.21, 1.21};
  return build_material_tensors(p, 2);
}

TEST(Penalty, FormulaExamples) {
  EXPECT_NEAR(beta_from_formula(100, 2.5, 1.1, 0.5), 605.0, 1e-12);
  EXPECT_EQ(beta_from_formula(0, 2.5, 1.1, 0.5), 0.0);
  EXPECT_NEAR(beta_from_formula(200, 2.5, 1.1, 0.5), 1210.0, 1e-12);
  EXPECT_THROW(beta_from_formula(100, 2.5, 1.1, 0.0), ParameterError);
}

TEST(Penalty, AffineFieldsInKernel) {
  const auto m = structured_mesh(unit_square, {2, 2, 1}, Shape::triangle, 3);
  const auto f = assemble_penalty_forms(m, material(1.1));
  EXPECT_EQ(f.kernel.cols(), 6);
  EXPECT_LT((f.A * f.kernel).cwiseAbs().maxCoeff(), 1e-10 * f.A.cwiseAbs().maxCoeff());
  EXPECT_LT((f.B * f.kernel).cwiseAbs().maxCoeff(), 1e-10 * f.B.cwiseAbs().maxCoeff());
}

TEST(Penalty, LengthScaleScaling) {
  const auto m = structured_mesh(unit_square, {2, 2, 1}, Shape::quadrilateral, 2);
  const auto f1 = assemble_penalty_forms(m, material(0.5));
  const auto f2 = assemble_penalty_forms(m, material(1.0));
  EXPECT_LT((f2.A - 4 * f1.A).cwiseAbs().maxCoeff(), 1e-12 * f2.A.cwiseAbs().maxCoeff());
  EXPECT_LT((f2.B - 16 * f1.B).cwiseAbs().maxCoeff(), 1e-12 * f2.B.cwiseAbs().maxCoeff());
  const auto e1 = estimate_penalty(f1), e2 = estimate_penalty(f2);
  EXPECT_NEAR(e2.lambda_max / e1.lambda_max, 4.0, 4e-8);
  EXPECT_NEAR(e2.alpha_equivalent, e1.alpha_equivalent, 1e-8 * e1.alpha_equivalent);
}

TEST(Penalty, SingleElementFallsBack) {
  const auto m = structured_mesh(unit_square, {1, 1, 1}, Shape::quadrilateral, 3);
  const auto f = assemble_penalty_forms(m, material(1.1));
  EXPECT_EQ(f.B.cwiseAbs().maxCoeff(), 0.0);
  const auto e = estimate_penalty(f);
  EXPECT_EQ(e.lambda_max, 0.0);
  EXPECT_TRUE(e.fallback);
  EXPECT_NEAR(e.beta_recommended, 100 * 2.5 * 1.21, 1e-10);
}

TEST(Penalty, ZeroLengthScaleRejected) {
  const auto m = structured_mesh(unit_square, {1, 1, 1}, Shape::quadrilateral, 2);
  EXPECT_THROW(assemble_penalty_forms(m, material(0.0)), ParameterError);
}

TEST(Penalty, RefinementScaling) {
  for (int p : {2, 3}) {
    const auto e1 = estimate_penalty(assemble_penalty_forms(structured_mesh(unit_square, {2, 2, 1}, Shape::triangle, p), material(1.1)));
    const auto e2 = estimate_penalty(assemble_penalty_forms(structured_mesh(unit_square, {4, 4, 1}, Shape::triangle, p), material(1.1)));
    const double ratio = e2.lambda_max / e1.lambda_max;
    EXPECT_GE(ratio, 1.5) << "p=" << p;
    EXPECT_LE(ratio, 2.5) << "p=" << p;
  }
}

TEST(Penalty, BoundHoldsForRandomFields) {
  const auto m = structured_mesh(unit_square, {3, 2, 1}, Shape::triangle, 3);
  const auto f = assemble_penalty_forms(m, material(1.1));
  const auto e = estimate_penalty(f);
  std::mt19937 rng(7);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd u(f.A.rows());
    for (auto& v : u) v = nd(rng);
    EXPECT_LE(u.dot(f.B * u), e.lambda_max * u.dot(f.A * u) * (1 + 1e-8));
  }
  // Eigenvector is A-orthogonal to the affine kernel.
  const Eigen::VectorXd Ax = f.A * e.eigenvector;
  EXPECT_LT((f.kernel.transpose() * Ax).cwiseAbs().maxCoeff(), 1e-8 * Ax.norm() * f.kernel.norm());
}

TEST(Penalty, YoungModulusInvariance) {
  const auto m = structured_mesh(unit_square, {2, 2, 1}, Shape::triangle, 2);
  const auto e1 = estimate_penalty(assemble_penalty_forms(m, material(1.1, 2.5)));
  const auto e2 = estimate_penalty(assemble_penalty_forms(m, material(1.1, 25.0)));
  EXPECT_NEAR(e2.alpha_equivalent, e1.alpha_equivalent, 1e-10 * e1.alpha_equivalent);
}

double smallest_mechanical_eigenvalue(const Mesh& m, const MaterialTensors& mat, double beta) {
  BoundarySpec spec;
  spec.d1 = {0};
  spec.n1 = {1, 2, 3};
  spec.n2 = {0, 1, 2, 3};
  spec.phi_n = {0, 1, 2, 3};
  Discretization disc(m, spec);
  AssemblyOptions o;
  o.with_potential = false;
  o.beta = beta;
  const Eigen::MatrixXd K(assemble_system(disc, mat, spec, o).K);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
  return es.eigenvalues()[0];
}

TEST(Penalty, EstimateControlsCoercivity) {
  const auto m = structured_mesh(unit_square, {3, 3, 1}, Shape::triangle, 3);
  const auto mat = material(1.1);
  const auto e = estimate_penalty(assemble_penalty_forms(m, mat));
  EXPECT_GT(smallest_mechanical_eigenvalue(m, mat, 2 * e.lambda_max), 0.0);
  EXPECT_LT(smallest_mechanical_eigenvalue(m, mat, 0.01 * e.lambda_max), 0.0);
}

}  // namespace
}  // namespace c0ipm
