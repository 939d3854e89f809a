#include "c0ipm/penalty.hpp"

#include "c0ipm/assembly.hpp"
#include "c0ipm/errors.hpp"
#include "c0ipm/refelem.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace c0ipm {

namespace {
std::size_t sz(int i) { return static_cast<std::size_t>(i); }
}  // namespace

double beta_from_formula(double alpha, double E, double l, double h) {
  if (!(h > 0.0)) throw ParameterError("beta formula: element size must be positive");
  return alpha * E * l * l / h;
}

PenaltyForms assemble_penalty_forms(const Mesh& mesh, const MaterialTensors& mat, bool with_elastic, int max_dofs) {
  if (!(mat.l > 0.0)) throw ParameterError("penalty forms vanish for l = 0; any positive beta is admissible");
  const int n = mesh.dim;
  const int N = mesh.node_count() * n;
  if (N > max_dofs) {
    throw CapabilityError("penalty estimator is dense; " + std::to_string(N) + " dofs exceed the limit of " +
                          std::to_string(max_dofs) + ", use a coarser mesh");
  }
  const ReferenceElement re(mesh.shape, mesh.degree);
  const Eigen::MatrixXd M = constitutive_matrix(uncoupled(mat), with_elastic);
  PenaltyForms forms;
  forms.dim = n;
  forms.E = mat.E;
  forms.l = mat.l;
  forms.A = Eigen::MatrixXd::Zero(N, N);
  forms.B = Eigen::MatrixXd::Zero(N, N);
  forms.h = std::numeric_limits<double>::max();

  auto dofs_of = [&](int e) {
    std::vector<int> out;
    for (int node : mesh.element(e))
      for (int c = 0; c < n; ++c) out.push_back(node * n + c);
    return out;
  };
  auto scatter = [](Eigen::MatrixXd& G, const std::vector<int>& ids, const Eigen::MatrixXd& K) {
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = 0; j < ids.size(); ++j)
        G(ids[i], ids[j]) += K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  };

  for (int e = 0; e < mesh.element_count(); ++e) {
    forms.h = std::min(forms.h, element_size(mesh, re, e));
    const auto geom = physical_geometry(re, mesh.element_coords(e));
    scatter(forms.A, dofs_of(e), element_matrices(re, geom, M, false).K);
  }

  const auto conn = build_connectivity(mesh);
  for (int fi : conn.interior) {
    const Face& f = conn.faces[sz(fi)];
    const auto gl = physical_geometry(re, mesh.element_coords(f.left), f.left_face);
    const auto gr = physical_geometry(re, mesh.element_coords(f.right), f.right_face);
    const int nq = static_cast<int>(gl.weights.size());
    const auto perm = flip_permutation(mesh.shape, nq, f.rotation);
    std::vector<int> left_order(sz(nq)), inv(sz(nq));
    for (int k = 0; k < nq; ++k) {
      left_order[sz(k)] = k;
      inv[sz(perm[sz(k)])] = k;
    }
    const auto FL = face_operators(re, gl, gl.normals, left_order, M, false);
    const auto FR = face_operators(re, gr, gl.normals, inv, M, false);
    Eigen::MatrixXd Rm(FL.r.rows(), FL.r.cols() + FR.r.cols());
    Rm << 0.5 * FL.r, 0.5 * FR.r;
    Eigen::VectorXd W(Rm.rows());
    for (int k = 0; k < nq; ++k) W.segment(k * n, n).setConstant(gl.weights[sz(k)]);
    auto ids = dofs_of(f.left);
    const auto rids = dofs_of(f.right);
    ids.insert(ids.end(), rids.begin(), rids.end());
    const Eigen::MatrixXd Kf = Rm.transpose() * W.asDiagonal() * Rm;
    scatter(forms.B, ids, Kf);
  }
  forms.A = 0.5 * (forms.A + forms.A.transpose()).eval();
  forms.B = 0.5 * (forms.B + forms.B.transpose()).eval();

  // Affine fields: n translations and n*n linear modes x_j e_c.
  forms.kernel = Eigen::MatrixXd::Zero(N, n * (n + 1));
  for (int i = 0; i < mesh.node_count(); ++i) {
    const Vec3& x = mesh.nodes[sz(i)];
    for (int c = 0; c < n; ++c) {
      forms.kernel(i * n + c, c) = 1.0;
      for (int j = 0; j < n; ++j) forms.kernel(i * n + c, n + c * n + j) = x[j];
    }
  }
  return forms;
}

PenaltyEstimate estimate_penalty(const PenaltyForms& forms, double safety, double fallback_alpha) {
  PenaltyEstimate est;
  const Eigen::Index N = forms.A.rows();
  const double bnorm = forms.B.cwiseAbs().maxCoeff();
  if (N == 0 || bnorm == 0.0) {
    est.fallback = true;
    est.beta_recommended = beta_from_formula(fallback_alpha, forms.E, forms.l, forms.h);
    est.alpha_equivalent = 0.0;
    est.eigenvector = Eigen::VectorXd::Zero(N);
    return est;
  }
  // Deflate the numerical null space of A (affine fields and, for p > 1 on simplices,
  // every continuous piecewise affine field). B vanishes on it as well.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(forms.A);
  if (ea.info() != Eigen::Success) throw NumericalError("penalty estimator: eigen-decomposition of A failed");
  const Eigen::VectorXd& lam = ea.eigenvalues();
  const double tol = 1e-10 * lam.cwiseAbs().maxCoeff();
  Eigen::Index first = 0;
  while (first < N && lam[first] <= tol) ++first;
  est.deflated = static_cast<int>(first);
  const Eigen::Index m = N - first;
  if (m == 0) throw NumericalError("penalty estimator: strain-gradient form is identically zero");
  const Eigen::MatrixXd V = ea.eigenvectors().rightCols(m);
  const Eigen::VectorXd s = lam.tail(m).cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd Bt = s.asDiagonal() * (V.transpose() * forms.B * V) * s.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(0.5 * (Bt + Bt.transpose()));
  if (eb.info() != Eigen::Success) throw NumericalError("penalty estimator: reduced eigenproblem failed");
  est.lambda_max = std::max(0.0, eb.eigenvalues()[m - 1]);
  est.eigenvector = V * (s.asDiagonal() * eb.eigenvectors().col(m - 1));
  est.alpha_equivalent = est.lambda_max * forms.h / (forms.E * forms.l * forms.l);
  est.beta_recommended = safety * est.lambda_max;
  return est;
}

}  // namespace c0ipm
