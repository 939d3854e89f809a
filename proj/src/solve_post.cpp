#include "c0ipm/solve_post.hpp"

#include "c0ipm/errors.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/SparseLU>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace c0ipm {

namespace {

std::size_t sz(int i) { return static_cast<std::size_t>(i); }

// Symmetric Ruiz scaling: returns d with max |d_i K_ij d_j| over each column close to 1.
Eigen::VectorXd ruiz_scaling(const Eigen::SparseMatrix<double>& K) {
  const Eigen::Index n = K.cols();
  Eigen::VectorXd d = Eigen::VectorXd::Ones(n);
  for (int it = 0; it < 20; ++it) {
    Eigen::VectorXd colmax = Eigen::VectorXd::Zero(n);
    for (Eigen::Index c = 0; c < n; ++c)
      for (Eigen::SparseMatrix<double>::InnerIterator e(K, c); e; ++e)
        colmax[c] = std::max(colmax[c], std::abs(d[e.row()] * e.value() * d[c]));
    double worst = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) {
      if (colmax[c] == 0.0) continue;
      worst = std::max(worst, std::abs(1.0 - colmax[c]));
      d[c] /= std::sqrt(colmax[c]);
    }
    if (worst < 1e-3) break;
  }
  return d;
}

double row_sum_norm(const Eigen::SparseMatrix<double>& A) {
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(A.rows());
  for (int k = 0; k < A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it) rows[it.row()] += std::abs(it.value());
  return rows.maxCoeff();
}

}  // namespace

Eigen::VectorXd solve_system(const GlobalSystem& sys, double tol) {
  const Eigen::Index n = sys.K.rows();
  if (n == 0) return Eigen::VectorXd();
  const double fnorm = sys.f.norm();
  if (fnorm == 0.0) return Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd d = ruiz_scaling(sys.K);
  const Eigen::SparseMatrix<double> S = d.asDiagonal() * sys.K * d.asDiagonal();
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(S);
  if (lu.info() != Eigen::Success) {
    throw NumericalError(
        "singular factorization: check that beta is large enough, that rigid motions are removed by "
        "Dirichlet conditions, and that the potential is fixed somewhere (floating electrode)");
  }
  // Work in the equilibrated variables S y = b with x = D y, b = D f.
  const Eigen::VectorXd b = d.cwiseProduct(sys.f);
  const double snorm = row_sum_norm(S);
  const double bnorm = b.cwiseAbs().maxCoeff();
  Eigen::VectorXd y = lu.solve(b);
  auto backward_error = [&](const Eigen::VectorXd& yy) {
    return (S * yy - b).cwiseAbs().maxCoeff() / (snorm * yy.cwiseAbs().maxCoeff() + bnorm);
  };
  double eta = backward_error(y);
  for (int refine = 0; refine < 3 && eta > 1e-15; ++refine) {
    const Eigen::VectorXd r = b - S * y;
    const Eigen::VectorXd dy = lu.solve(r);
    y += dy;
    eta = backward_error(y);
  }
  // ||S|| ||y|| / ||b|| bounds cond(S) from below.
  const double growth = snorm * y.cwiseAbs().maxCoeff() / bnorm;
  if (!std::isfinite(eta) || eta > tol || !(growth < 1e13)) {
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "linear solve backward error %.3e (tolerance %.1e), condition estimate %.1e; the system is "
                  "likely singular",
                  eta, tol, growth);
    throw NumericalError(buf);
  }
  return d.cwiseProduct(y);
}

SolutionField make_solution(const Discretization& disc, const GlobalSystem& sys, const Eigen::VectorXd& x) {
  SolutionField s;
  s.disc = &disc;
  s.dofs = sys.dofs;
  const auto& d = s.dofs;
  s.full.resize(d.full_size);
  for (int i = 0; i < d.full_size; ++i) {
    const int r = d.reduced[sz(i)];
    s.full[i] = r >= 0 ? x[r] : d.fixed_value[sz(i)];
  }
  s.multipliers = x.tail(static_cast<Eigen::Index>(d.multipliers.size()));
  return s;
}

SolutionField solve(const Discretization& disc, const GlobalSystem& sys) {
  return make_solution(disc, sys, solve_system(sys));
}

Vec3 SolutionField::nodal_u(int node) const {
  Vec3 v = Vec3::Zero();
  for (int c = 0; c < dofs.dim; ++c) v[c] = full[dofs.u(node, c)];
  return v;
}

double SolutionField::nodal_phi(int node) const { return dofs.with_potential ? full[dofs.phi(node)] : 0.0; }

Eigen::VectorXd SolutionField::element_values(int e) const {
  const auto ids = element_dofs(*disc, dofs, e);
  Eigen::VectorXd v(static_cast<Eigen::Index>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) v[static_cast<Eigen::Index>(i)] = full[ids[i]];
  return v;
}

Eigen::VectorXd SolutionField::evaluate(int e, const Vec3& xi) const {
  const auto& re = disc->re;
  const int n = dofs.dim, nb = re.node_count();
  const auto tab = re.tabulate({xi}, 0);
  const Eigen::VectorXd v = element_values(e);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n + 1);
  for (int a = 0; a < nb; ++a) {
    const double N = tab.values(0, a);
    for (int c = 0; c < n; ++c) out[c] += N * v[a * n + c];
    if (dofs.with_potential) out[n] += N * v[nb * n + a];
  }
  return out;
}

Eigen::VectorXd SolutionField::evaluate_at(const Vec3& x) const {
  const Mesh& mesh = *disc->mesh;
  const auto& re = disc->re;
  const int n = mesh.dim;
  Vec3 centre = Vec3::Zero();
  for (const auto& c : re.corners()) centre += c;
  centre /= static_cast<double>(re.corners().size());
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto X = mesh.element_coords(e);
    Vec3 lo = X[0], hi = X[0];
    for (const auto& p : X) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const double pad = 1e-8 * (hi - lo).norm();
    if (((x.array() < lo.array() - pad) || (x.array() > hi.array() + pad)).head(n).any()) continue;
    Vec3 xi = centre;
    for (int it = 0; it < 30; ++it) {
      const auto tab = re.tabulate({xi}, 1);
      Vec3 xp = Vec3::Zero();
      Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
      for (int a = 0; a < re.node_count(); ++a) {
        xp += tab.values(0, a) * X[sz(a)];
        J += X[sz(a)].head(n) * tab.gradients[0].col(a).transpose();
      }
      const Eigen::VectorXd step = J.lu().solve((x - xp).head(n));
      xi.head(n) += step;
      if (step.norm() < 1e-14) break;
      if (xi.norm() > 10.0) break;
    }
    if (re.contains(xi, 1e-9)) return evaluate(e, xi);
  }
  throw DomainError("point is outside the mesh");
}

namespace {

constexpr int i2(int a, int b) { return 3 * a + b; }
constexpr int i3(int a, int b, int c) { return 9 * a + 3 * b + c; }
constexpr int i4(int a, int b, int c, int d) { return 27 * a + 9 * b + 3 * c + d; }
constexpr int i5(int a, int b, int c, int d, int e) { return 81 * a + 27 * b + 9 * c + 3 * d + e; }

// m-th derivative of a sin(w s) + b cos(w s).
double wave_derivative(double a, double b, double w, double s, int m) {
  const double shift = m * std::numbers::pi / 2;
  return std::pow(w, m) * (a * std::sin(w * s + shift) + b * std::cos(w * s + shift));
}

}  // namespace

ExactField plane_wave_field(int dim, const Vec3& k, const Vec3& u_sin, const Vec3& u_cos, double phi_sin,
                            double phi_cos) {
  ExactField f;
  f.dim = dim;
  f.jet = [=](const Vec3& x) {
    const double w = 2 * std::numbers::pi;
    const double s = k.head(dim).dot(x.head(dim));
    Jet J;
    double g[5];
    for (int i = 0; i < dim; ++i) {
      for (int m = 0; m < 5; ++m) g[m] = wave_derivative(u_sin[i], u_cos[i], w, s, m);
      J.u[i] = g[0];
      for (int a = 0; a < dim; ++a) {
        J.d1u[sz(i2(i, a))] = g[1] * k[a];
        for (int b = 0; b < dim; ++b) {
          J.d2u[sz(i3(i, a, b))] = g[2] * k[a] * k[b];
          for (int c = 0; c < dim; ++c) {
            J.d3u[sz(i4(i, a, b, c))] = g[3] * k[a] * k[b] * k[c];
            for (int d = 0; d < dim; ++d) J.d4u[sz(i5(i, a, b, c, d))] = g[4] * k[a] * k[b] * k[c] * k[d];
          }
        }
      }
    }
    for (int m = 0; m < 4; ++m) g[m] = wave_derivative(phi_sin, phi_cos, w, s, m);
    J.phi = g[0];
    for (int a = 0; a < dim; ++a) {
      J.d1phi[a] = g[1] * k[a];
      for (int b = 0; b < dim; ++b) {
        J.d2phi[sz(i2(a, b))] = g[2] * k[a] * k[b];
        for (int c = 0; c < dim; ++c) J.d3phi[sz(i3(a, b, c))] = g[3] * k[a] * k[b] * k[c];
      }
    }
    return J;
  };
  return f;
}

namespace {

double poly_derivative(const Polynomial& p, const std::array<int, 3>& alpha, const Vec3& x) {
  double sum = 0.0;
  for (const auto& m : p) {
    double term = m.c;
    for (int d = 0; d < 3 && term != 0.0; ++d) {
      const int e = m.p[sz(d)], a = alpha[sz(d)];
      if (a > e) {
        term = 0.0;
        break;
      }
      for (int r = 0; r < a; ++r) term *= e - r;
      term *= std::pow(x[d], e - a);
    }
    sum += term;
  }
  return sum;
}

}  // namespace

ExactField polynomial_field(int dim, const std::array<Polynomial, 3>& u, const Polynomial& phi) {
  ExactField f;
  f.dim = dim;
  f.jet = [=](const Vec3& x) {
    Jet J;
    auto D = [&](const Polynomial& p, std::initializer_list<int> idx) {
      std::array<int, 3> alpha{0, 0, 0};
      for (int i : idx) ++alpha[sz(i)];
      return poly_derivative(p, alpha, x);
    };
    for (int i = 0; i < dim; ++i) {
      const auto& p = u[sz(i)];
      J.u[i] = D(p, {});
      for (int a = 0; a < dim; ++a) {
        J.d1u[sz(i2(i, a))] = D(p, {a});
        for (int b = 0; b < dim; ++b) {
          J.d2u[sz(i3(i, a, b))] = D(p, {a, b});
          for (int c = 0; c < dim; ++c) {
            J.d3u[sz(i4(i, a, b, c))] = D(p, {a, b, c});
            for (int d = 0; d < dim; ++d) J.d4u[sz(i5(i, a, b, c, d))] = D(p, {a, b, c, d});
          }
        }
      }
    }
    J.phi = D(phi, {});
    for (int a = 0; a < dim; ++a) {
      J.d1phi[a] = D(phi, {a});
      for (int b = 0; b < dim; ++b) {
        J.d2phi[sz(i2(a, b))] = D(phi, {a, b});
        for (int c = 0; c < dim; ++c) J.d3phi[sz(i3(a, b, c))] = D(phi, {a, b, c});
      }
    }
    return J;
  };
  return f;
}

namespace {

// Kinematics of the derivative d^m/dx_{extra...} of the exact field (m = extra.size() <= 2).
PointKinematics derived_kinematics(const Jet& J, int n, const std::vector<int>& extra) {
  PointKinematics k;
  const int m = static_cast<int>(extra.size());
  auto du = [&](int i, int a) {
    if (m == 0) return J.d1u[sz(i2(i, a))];
    if (m == 1) return J.d2u[sz(i3(i, a, extra[0]))];
    return J.d3u[sz(i4(i, a, extra[0], extra[1]))];
  };
  auto ddu = [&](int i, int a, int b) {
    if (m == 0) return J.d2u[sz(i3(i, a, b))];
    if (m == 1) return J.d3u[sz(i4(i, a, b, extra[0]))];
    return J.d4u[sz(i5(i, a, b, extra[0], extra[1]))];
  };
  auto dphi = [&](int a) {
    if (m == 0) return J.d1phi[a];
    if (m == 1) return J.d2phi[sz(i2(a, extra[0]))];
    return J.d3phi[sz(i3(a, extra[0], extra[1]))];
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      k.eps(i, j) = 0.5 * (du(i, j) + du(j, i));
      for (int l = 0; l < n; ++l) k.grad_eps(i, j, l) = 0.5 * (ddu(i, j, l) + ddu(j, i, l));
    }
  for (int a = 0; a < n; ++a) k.Efield[a] = -dphi(a);
  return k;
}

}  // namespace

PointStresses exact_stresses(const ExactField& exact, const MaterialTensors& mat, const Vec3& x) {
  return evaluate_constitutive(derived_kinematics(exact.jet(x), mat.dim, {}), mat);
}

Sources manufactured_source(const ExactField& exact, const MaterialTensors& mat) {
  // The constitutive map is linear, so derivatives of the stresses are the stresses
  // of the differentiated kinematics.
  const int n = mat.dim;
  auto stresses = [=](const Jet& J, std::vector<int> extra) {
    return evaluate_constitutive(derived_kinematics(J, n, extra), mat);
  };
  Sources s;
  s.body = [=](const Vec3& x) {
    const Jet J = exact.jet(x);
    Vec3 b = Vec3::Zero();
    for (int j = 0; j < n; ++j) {
      const auto Sj = stresses(J, {j});
      for (int i = 0; i < n; ++i) b[i] -= Sj.sigma_hat(i, j);
      for (int k = 0; k < n; ++k) {
        const auto Sjk = stresses(J, {j, k});
        for (int i = 0; i < n; ++i) b[i] += Sjk.sigma_tilde(i, j, k);
      }
    }
    return b;
  };
  s.charge = [=](const Vec3& x) {
    const Jet J = exact.jet(x);
    double q = 0.0;
    for (int l = 0; l < n; ++l) q += stresses(J, {l}).D_hat[l];
    return q;
  };
  return s;
}

void attach_exact_data(BoundarySpec& spec, const ExactField& exact, const MaterialTensors& mat) {
  const int n = mat.dim;
  spec.g1 = [=](const Vec3& x) { return exact.jet(x).u; };
  spec.g2 = [=](const Vec3& x, const Vec3& nv) {
    const Jet J = exact.jet(x);
    Vec3 g = Vec3::Zero();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g[i] += J.d1u[sz(i2(i, j))] * nv[j];
    return g;
  };
  spec.g3 = [=](const Vec3& x) { return exact.jet(x).phi; };
  spec.r_n = [=](const Vec3& x, const Vec3& nv) {
    return double_traction(exact_stresses(exact, mat, x).sigma_tilde, nv, n);
  };
  spec.w_n = [=](const Vec3& x, const Vec3& nv) {
    return -exact_stresses(exact, mat, x).D_hat.head(n).dot(nv.head(n));
  };
  const auto src = manufactured_source(exact, mat);
  spec.body = src.body;
  spec.charge = src.charge;
}

FieldErrors l2_error(const SolutionField& sol, const ExactField* exact) {
  const Mesh& mesh = *sol.disc->mesh;
  const auto& re = sol.disc->re;
  const int n = mesh.dim, nb = re.node_count();
  const auto rule = volume_quadrature(mesh.shape, 2 * mesh.degree + 2);
  const auto tab = re.tabulate(rule.points, 2);
  FieldErrors out;
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto g = physical_geometry_at(re, mesh.element_coords(e), tab);
    const Eigen::VectorXd v = sol.element_values(e);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double w = rule.weights[q] * g.det[q];
      Vec3 uh = Vec3::Zero();
      double ph = 0.0;
      for (int a = 0; a < nb; ++a) {
        const double N = tab.values(static_cast<Eigen::Index>(q), a);
        for (int c = 0; c < n; ++c) uh[c] += N * v[a * n + c];
        if (sol.dofs.with_potential) ph += N * v[nb * n + a];
      }
      Vec3 ue = Vec3::Zero();
      double pe = 0.0;
      if (exact) {
        const Jet J = exact->jet(g.points[q]);
        ue = J.u;
        pe = J.phi;
      }
      out.u += w * (uh - ue).head(n).squaredNorm();
      out.phi += w * (ph - pe) * (ph - pe);
      out.u_norm += w * ue.head(n).squaredNorm();
      out.phi_norm += w * pe * pe;
    }
  }
  out.u = std::sqrt(out.u);
  out.phi = std::sqrt(out.phi);
  out.u_norm = std::sqrt(out.u_norm);
  out.phi_norm = std::sqrt(out.phi_norm);
  return out;
}

std::vector<double> convergence_rates(const std::vector<double>& errors, const std::vector<double>& h) {
  if (errors.size() != h.size() || errors.size() < 2) {
    throw ParameterError("convergence_rates: need equal-length lists with at least two entries");
  }
  std::vector<double> out;
  for (std::size_t k = 0; k + 1 < errors.size(); ++k) {
    if (!(errors[k] > 0.0) || !(errors[k + 1] > 0.0)) throw ParameterError("convergence_rates: errors must be positive");
    if (!(h[k + 1] < h[k]) || !(h[k + 1] > 0.0)) throw ParameterError("convergence_rates: h must decrease strictly");
    out.push_back(std::log(errors[k] / errors[k + 1]) / std::log(h[k] / h[k + 1]));
  }
  return out;
}

double effective_coupling(const SolutionField& sol, const MaterialTensors& mat) {
  const Mesh& mesh = *sol.disc->mesh;
  const auto& re = sol.disc->re;
  const int n = mesh.dim, nb = re.node_count();
  const MaterialTensors elastic = uncoupled(mat);
  double electric = 0.0, strain = 0.0;
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto g = physical_geometry(re, mesh.element_coords(e));
    const Eigen::VectorXd v = sol.element_values(e);
    for (std::size_t q = 0; q < g.weights.size(); ++q) {
      const Eigen::MatrixXd& grad = g.gradients[q];
      PointKinematics kin;
      Vec3 E = Vec3::Zero();
      for (int a = 0; a < nb; ++a) {
        for (int c = 0; c < n; ++c)
          for (int j = 0; j < n; ++j) {
            kin.eps(c, j) += 0.5 * grad(j, a) * v[a * n + c];
            kin.eps(j, c) += 0.5 * grad(j, a) * v[a * n + c];
          }
        if (sol.dofs.with_potential)
          for (int j = 0; j < n; ++j) E[j] -= grad(j, a) * v[nb * n + a];
      }
      const auto s = evaluate_constitutive(kin, elastic);
      double eCe = 0.0, EkE = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          eCe += kin.eps(i, j) * s.sigma_hat(i, j);
          EkE += E[i] * mat.kappa(i, j) * E[j];
        }
      electric += g.weights[q] * EkE;
      strain += g.weights[q] * eCe;
    }
  }
  if (!(strain > 0.0)) throw NumericalError("effective coupling: strain energy vanishes");
  return std::sqrt(electric / strain);
}

BeamReport effective_piezo(const SolutionField& sol, const MaterialTensors& mat, const SolutionField& reference,
                           const MaterialTensors& reference_mat, double thickness, double eT, double muT) {
  BeamReport r;
  r.k_eff = effective_coupling(sol, mat);
  r.k_eff_ref = effective_coupling(reference, reference_mat);
  if (!(r.k_eff_ref > 0.0)) throw NumericalError("effective piezo: reference coupling vanishes");
  r.e_prime = r.k_eff / r.k_eff_ref;
  r.a_prime = muT != 0.0 ? -thickness * eT / muT : 0.0;
  return r;
}

std::string format_number(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  if (!out) throw IoError("write failed for '" + path + "'");
}

void write_field_dump(const SolutionField& sol, const std::string& path) {
  const Mesh& mesh = *sol.disc->mesh;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  const int n = mesh.dim;
  for (int i = 0; i < mesh.node_count(); ++i) {
    const Vec3 u = sol.nodal_u(i);
    for (int c = 0; c < n; ++c) out << format_number(mesh.nodes[sz(i)][c]) << ' ';
    for (int c = 0; c < n; ++c) out << format_number(u[c]) << ' ';
    out << format_number(sol.nodal_phi(i)) << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace c0ipm
