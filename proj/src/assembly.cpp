#include "c0ipm/assembly.hpp"

#include "c0ipm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <set>

namespace c0ipm {

namespace {

std::size_t sz(int i) { return static_cast<std::size_t>(i); }

int kin_rows(int n) { return n * n + n * n * n + n; }

}  // namespace

Discretization::Discretization(const Mesh& m, const BoundarySpec& spec)
    : mesh(&m), re(m.shape, m.degree), tagged(apply_boundary_spec(m, re, spec)) {
  h_elem.resize(sz(m.element_count()));
  for (int e = 0; e < m.element_count(); ++e) h_elem[sz(e)] = element_size(m, re, e);
  const auto& faces = tagged.conn.faces;
  h_face.resize(faces.size());
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const Face& f = faces[i];
    h_face[i] = f.interior() ? std::min(h_elem[sz(f.left)], h_elem[sz(f.right)]) : h_elem[sz(f.left)];
  }
}

double face_beta(const Discretization& disc, const MaterialTensors& mat, const AssemblyOptions& opts, int face) {
  if (opts.beta) return *opts.beta;
  return opts.alpha * mat.E * mat.l2 / disc.h_face[sz(face)];
}

double face_beta_D(const Discretization& disc, const MaterialTensors& mat, const AssemblyOptions& opts, int face) {
  if (opts.beta_D) return *opts.beta_D;
  if (opts.alpha_D) return *opts.alpha_D * mat.E * mat.l2 / disc.h_face[sz(face)];
  return face_beta(disc, mat, opts, face);
}

DofMap build_dofmap(const Discretization& disc, const BoundarySpec& spec, const AssemblyOptions& opts) {
  const Mesh& mesh = *disc.mesh;
  const auto& re = disc.re;
  const auto& tc = disc.tagged;
  DofMap d;
  d.dim = mesh.dim;
  d.node_count = mesh.node_count();
  d.with_potential = opts.with_potential;
  d.rep_index.assign(sz(d.node_count), -1);
  const auto& master = tc.periodic.node_master;
  for (int i = 0; i < d.node_count; ++i)
    if (master[sz(i)] == i) d.rep_index[sz(i)] = d.rep_count++;
  for (int i = 0; i < d.node_count; ++i) d.rep_index[sz(i)] = d.rep_index[sz(master[sz(i)])];
  d.full_size = d.rep_count * (d.dim + (d.with_potential ? 1 : 0));
  d.fixed.assign(sz(d.full_size), 0);
  d.fixed_value.assign(sz(d.full_size), 0.0);

  auto face_nodes = [&](const Face& f) {
    std::vector<int> out;
    const auto elem = mesh.element(f.left);
    for (int a : re.face(f.left_face).nodes) out.push_back(elem[sz(a)]);
    return out;
  };

  if (opts.eliminate_dirichlet) {
    for (int fi : tc.conn.boundary) {
      const Face& f = tc.conn.faces[sz(fi)];
      if (tc.d1[sz(fi)]) {
        for (int node : face_nodes(f)) {
          const Vec3 g = spec.g1 ? spec.g1(mesh.nodes[sz(node)]) : Vec3::Zero();
          for (int c = 0; c < d.dim; ++c) {
            const int dof = d.u(node, c);
            if (d.fixed[sz(dof)]) continue;
            d.fixed[sz(dof)] = 1;
            d.fixed_value[sz(dof)] = g[c];
          }
        }
      }
      if (d.with_potential && tc.phi_d[sz(fi)]) {
        for (int node : face_nodes(f)) {
          const int dof = d.phi(node);
          if (d.fixed[sz(dof)]) continue;
          d.fixed[sz(dof)] = 1;
          d.fixed_value[sz(dof)] = spec.g3 ? spec.g3(mesh.nodes[sz(node)]) : 0.0;
        }
      }
    }
  }

  if (d.with_potential) {
    std::vector<int> group_of(sz(d.full_size), -1);
    const int groups = static_cast<int>(spec.electrodes.size());
    for (int g = 0; g < groups; ++g) {
      std::set<int> phis;
      for (int fi : tc.conn.boundary)
        if (tc.electrode[sz(fi)] == g)
          for (int node : face_nodes(tc.conn.faces[sz(fi)])) phis.insert(d.phi(node));
      if (phis.empty()) throw SpecificationError("electrode group " + std::to_string(g) + " has no faces");
      for (int dof : phis) {
        if (group_of[sz(dof)] >= 0) throw ConstraintError("node belongs to two electrode groups");
        group_of[sz(dof)] = g;
      }
      std::vector<double> prescribed;
      for (int dof : phis)
        if (d.fixed[sz(dof)]) prescribed.push_back(d.fixed_value[sz(dof)]);
      if (!prescribed.empty()) {
        // An electrode touching a potential Dirichlet boundary is fixed to that value.
        const auto [lo, hi] = std::minmax_element(prescribed.begin(), prescribed.end());
        if (*hi - *lo > 1e-12 * std::max(1.0, std::abs(*hi))) {
          throw ConstraintError("electrode " + std::to_string(g) +
                                " touches potential Dirichlet nodes with different values");
        }
        for (int dof : phis) {
          d.fixed[sz(dof)] = 1;
          d.fixed_value[sz(dof)] = *lo;
        }
        continue;
      }
      const int ref = *phis.begin();
      for (int dof : phis)
        if (dof != ref) d.multipliers.emplace_back(dof, ref);
    }
  }

  d.reduced.assign(sz(d.full_size), -1);
  for (int i = 0; i < d.full_size; ++i)
    if (!d.fixed[sz(i)]) d.reduced[sz(i)] = d.free_count++;
  return d;
}

Eigen::MatrixXd constitutive_matrix(const MaterialTensors& mat, bool include_elastic) {
  const int n = mat.dim;
  const int R = kin_rows(n);
  const int n2 = n * n, n3 = n * n * n;
  Eigen::MatrixXd M(R, R);
  for (int col = 0; col < R; ++col) {
    PointKinematics kin;
    if (col < n2) {
      kin.eps(col / n, col % n) = 1.0;
    } else if (col < n2 + n3) {
      const int r = col - n2;
      kin.grad_eps(r / n2, (r / n) % n, r % n) = 1.0;
    } else {
      kin.Efield[col - n2 - n3] = -1.0;
    }
    const auto s = evaluate_constitutive(kin, mat);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        M(i * n + j, col) = s.sigma_hat(i, j);
        for (int k = 0; k < n; ++k) M(n2 + i * n2 + j * n + k, col) = s.sigma_tilde(i, j, k);
      }
    for (int l = 0; l < n; ++l) M(n2 + n3 + l, col) = s.D_hat[l];
  }
  if (!include_elastic) M.topLeftCorner(n2, n2).setZero();
  return M;
}

namespace {

// Kinematic rows [eps; grad eps; grad phi] of every local dof at point q.
void fill_kinematics(const GeometryFactors& g, int q, int n, int nb, bool with_potential,
                     Eigen::Ref<Eigen::MatrixXd> out) {
  out.setZero();
  const int n2 = n * n, n3 = n2 * n;
  const Eigen::MatrixXd& grad = g.gradients[sz(q)];
  const Eigen::MatrixXd& hess = g.hessians[sz(q)];
  for (int a = 0; a < nb; ++a) {
    for (int c = 0; c < n; ++c) {
      const int col = a * n + c;
      for (int j = 0; j < n; ++j) {
        out(c * n + j, col) += 0.5 * grad(j, a);
        out(j * n + c, col) += 0.5 * grad(j, a);
        for (int k = 0; k < n; ++k) {
          out(n2 + c * n2 + j * n + k, col) += 0.5 * hess(j * n + k, a);
          out(n2 + j * n2 + c * n + k, col) += 0.5 * hess(j * n + k, a);
        }
      }
    }
    if (with_potential)
      for (int l = 0; l < n; ++l) out(n2 + n3 + l, nb * n + a) = grad(l, a);
  }
}

int local_dof_count(int nb, int n, bool with_potential) { return nb * n + (with_potential ? nb : 0); }

void symmetrize(Eigen::MatrixXd& K) {
  const Eigen::MatrixXd T = K.transpose();
  K = 0.5 * (K + T);
}

}  // namespace

LocalSystem element_matrices(const ReferenceElement& re, const GeometryFactors& geom, const Eigen::MatrixXd& M,
                             bool with_potential, const VectorFn& body, const PointFn& charge) {
  const int n = re.dim();
  const int nb = re.node_count();
  const int R = kin_rows(n);
  const int nd = local_dof_count(nb, n, with_potential);
  const int nq = static_cast<int>(geom.weights.size());
  Eigen::MatrixXd G(nq * R, nd), S(nq * R, nd);
  for (int q = 0; q < nq; ++q) {
    fill_kinematics(geom, q, n, nb, with_potential, G.middleRows(q * R, R));
    S.middleRows(q * R, R).noalias() = geom.weights[sz(q)] * (M * G.middleRows(q * R, R));
  }
  LocalSystem out;
  out.K.noalias() = G.transpose() * S;
  symmetrize(out.K);
  out.f = Eigen::VectorXd::Zero(nd);
  if (body || (charge && with_potential)) {
    for (int q = 0; q < nq; ++q) {
      const double w = geom.weights[sz(q)];
      const Vec3& x = geom.points[sz(q)];
      const Vec3 b = body ? body(x) : Vec3::Zero();
      const double qc = (charge && with_potential) ? charge(x) : 0.0;
      for (int a = 0; a < nb; ++a) {
        const double N = geom.tab->values(q, a);
        for (int c = 0; c < n; ++c) out.f[a * n + c] += w * N * b[c];
        if (with_potential) out.f[nb * n + a] -= w * N * qc;
      }
    }
  }
  return out;
}

FaceOperators face_operators(const ReferenceElement& re, const GeometryFactors& side, const std::vector<Vec3>& normals,
                             const std::vector<int>& point_order, const Eigen::MatrixXd& M, bool with_potential) {
  const int n = re.dim();
  const int nb = re.node_count();
  const int R = kin_rows(n);
  const int n2 = n * n, n3 = n2 * n;
  const int nd = local_dof_count(nb, n, with_potential);
  const int nq = static_cast<int>(point_order.size());
  FaceOperators out;
  out.dn = Eigen::MatrixXd::Zero(nq * n, nd);
  out.r.resize(nq * n, nd);
  Eigen::MatrixXd kin(R, nd), P(n, n3 + n);
  for (int k = 0; k < nq; ++k) {
    const int s = point_order[sz(k)];
    const Vec3& nv = normals[sz(k)];
    // Double traction r_i = sigma_tilde_ijk n_j n_k as a map from [grad eps; grad phi].
    P.setZero();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) P.row(i) += nv[j] * nv[l] * M.block(n2 + i * n2 + j * n + l, n2, 1, n3 + n);
    fill_kinematics(side, s, n, nb, with_potential, kin);
    out.r.middleRows(k * n, n).noalias() = P * kin.bottomRows(n3 + n);
    const Eigen::MatrixXd& grad = side.gradients[sz(s)];
    for (int a = 0; a < nb; ++a) {
      double dn = 0.0;
      for (int j = 0; j < n; ++j) dn += grad(j, a) * nv[j];
      for (int c = 0; c < n; ++c) out.dn(k * n + c, a * n + c) = dn;
    }
  }
  return out;
}

namespace {

std::vector<int> iota_vec(int n) {
  std::vector<int> v(sz(n));
  for (int i = 0; i < n; ++i) v[sz(i)] = i;
  return v;
}

Eigen::VectorXd repeat_weights(const std::vector<double>& w, const std::vector<int>& order, int n) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(order.size()) * n);
  for (std::size_t k = 0; k < order.size(); ++k)
    for (int c = 0; c < n; ++c) out[static_cast<Eigen::Index>(k) * n + c] = w[sz(order[k])];
  return out;
}

// -(J^T W R + R^T W J) + beta J^T W J
Eigen::MatrixXd nitsche_block(const Eigen::MatrixXd& J, const Eigen::MatrixXd& Rm, const Eigen::VectorXd& W,
                              double beta) {
  const Eigen::MatrixXd WJ = W.asDiagonal() * J;
  Eigen::MatrixXd A = WJ.transpose() * Rm;
  Eigen::MatrixXd K = -(A + A.transpose());
  if (beta != 0.0) K.noalias() += beta * (J.transpose() * WJ);
  symmetrize(K);
  return K;
}

}  // namespace

Eigen::MatrixXd face_matrices(const ReferenceElement& re, const GeometryFactors& left, const GeometryFactors& right,
                              const std::vector<int>& perm, const Eigen::MatrixXd& M, double beta,
                              bool with_potential) {
  const int nq = static_cast<int>(left.weights.size());
  if (static_cast<int>(right.weights.size()) != nq || static_cast<int>(perm.size()) != nq) {
    throw ConnectivityError("face_matrices: quadrature point counts differ between the two sides");
  }
  const int n = re.dim();
  std::vector<int> inv(sz(nq));
  for (int k = 0; k < nq; ++k) inv[sz(perm[sz(k)])] = k;
  const auto left_order = iota_vec(nq);
  const auto FL = face_operators(re, left, left.normals, left_order, M, with_potential);
  const auto FR = face_operators(re, right, left.normals, inv, M, with_potential);
  const int nd = static_cast<int>(FL.dn.cols());
  Eigen::MatrixXd J(nq * n, 2 * nd), Rm(nq * n, 2 * nd);
  J << FL.dn, -FR.dn;
  Rm << 0.5 * FL.r, 0.5 * FR.r;
  return nitsche_block(J, Rm, repeat_weights(left.weights, left_order, n), beta);
}

std::vector<int> element_dofs(const Discretization& disc, const DofMap& dofs, int e) {
  const auto elem = disc.mesh->element(e);
  const int n = dofs.dim;
  const int nb = static_cast<int>(elem.size());
  std::vector<int> out(sz(local_dof_count(nb, n, dofs.with_potential)));
  for (int a = 0; a < nb; ++a) {
    for (int c = 0; c < n; ++c) out[sz(a * n + c)] = dofs.u(elem[sz(a)], c);
    if (dofs.with_potential) out[sz(nb * n + a)] = dofs.phi(elem[sz(a)]);
  }
  return out;
}

namespace {

// Values and first derivatives of the 1D Lagrange polynomials on nodes t.
void lagrange_line(const std::vector<double>& t, double x, std::vector<double>& L, std::vector<double>& dL) {
  const std::size_t n = t.size();
  L.assign(n, 1.0);
  dL.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < n; ++m)
      if (m != i) L[i] *= (x - t[m]) / (t[i] - t[m]);
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      double prod = 1.0 / (t[i] - t[k]);
      for (std::size_t m = 0; m < n; ++m)
        if (m != i && m != k) prod *= (x - t[m]) / (t[i] - t[m]);
      dL[i] += prod;
    }
  }
}

using Sink = std::function<void(const std::vector<int>&, const Eigen::MatrixXd&, const Eigen::VectorXd&)>;

// Visits every local contribution (element, face, load) of the discrete problem.
void assembly_loop(const Discretization& disc, const MaterialTensors& mat, const BoundarySpec& spec,
                   const AssemblyOptions& opts, const DofMap& dofs, const Sink& sink) {
  const Mesh& mesh = *disc.mesh;
  const auto& re = disc.re;
  const auto& tc = disc.tagged;
  const int n = mesh.dim;
  const int nb = re.node_count();
  const bool wp = opts.with_potential;
  const int nd = local_dof_count(nb, n, wp);
  const Eigen::MatrixXd M = constitutive_matrix(mat, opts.include_elastic);
  const Eigen::MatrixXd empty;

  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto geom = physical_geometry(re, mesh.element_coords(e));
    const auto local = element_matrices(re, geom, M, wp, spec.body, spec.charge);
    sink(element_dofs(disc, dofs, e), local.K, local.f);
  }

  for (int fi : tc.conn.interior) {
    const Face& f = tc.conn.faces[sz(fi)];
    const double beta = face_beta(disc, mat, opts, fi);
    const auto gl = physical_geometry(re, mesh.element_coords(f.left), f.left_face);
    const auto gr = physical_geometry(re, mesh.element_coords(f.right), f.right_face);
    const auto perm = flip_permutation(mesh.shape, static_cast<int>(gl.weights.size()), f.rotation);
    const Eigen::MatrixXd K = face_matrices(re, gl, gr, perm, M, beta, wp);
    auto ids = element_dofs(disc, dofs, f.left);
    const auto rids = element_dofs(disc, dofs, f.right);
    ids.insert(ids.end(), rids.begin(), rids.end());
    sink(ids, K, Eigen::VectorXd::Zero(2 * nd));
  }

  for (int fi : tc.conn.boundary) {
    const Face& f = tc.conn.faces[sz(fi)];
    const bool d2 = tc.d2[sz(fi)];
    const bool n1 = !tc.d1[sz(fi)] && spec.t_n;
    const bool n2 = !d2 && spec.r_n;
    const bool phin = wp && !tc.phi_d[sz(fi)] && spec.w_n;
    if (!d2 && !n1 && !n2 && !phin) continue;
    const auto g = physical_geometry(re, mesh.element_coords(f.left), f.left_face);
    const int nq = static_cast<int>(g.weights.size());
    const auto order = iota_vec(nq);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nd);
    Eigen::MatrixXd K;
    if (d2 || n2) {
      const auto F = face_operators(re, g, g.normals, order, M, wp);
      if (d2) {
        const double beta_d = face_beta_D(disc, mat, opts, fi);
        K = nitsche_block(F.dn, F.r, repeat_weights(g.weights, order, n), beta_d);
        if (spec.g2) {
          for (int q = 0; q < nq; ++q) {
            const Vec3 gv = spec.g2(g.points[sz(q)], g.normals[sz(q)]);
            const double w = g.weights[sz(q)];
            rhs.noalias() -= w * F.r.middleRows(q * n, n).transpose() * gv.head(n);
            rhs.noalias() += beta_d * w * F.dn.middleRows(q * n, n).transpose() * gv.head(n);
          }
        }
      } else {
        for (int q = 0; q < nq; ++q) {
          const Vec3 rv = spec.r_n(g.points[sz(q)], g.normals[sz(q)]);
          rhs.noalias() += g.weights[sz(q)] * F.dn.middleRows(q * n, n).transpose() * rv.head(n);
        }
      }
    }
    for (int q = 0; q < nq; ++q) {
      const double w = g.weights[sz(q)];
      const Vec3& x = g.points[sz(q)];
      const Vec3& nv = g.normals[sz(q)];
      const Vec3 t = n1 ? spec.t_n(x, nv) : Vec3::Zero();
      const double wn = phin ? spec.w_n(x, nv) : 0.0;
      for (int a : re.face(f.left_face).nodes) {
        const double N = g.tab->values(q, a);
        for (int c = 0; c < n; ++c) rhs[a * n + c] += w * N * t[c];
        if (wp) rhs[nb * n + a] -= w * N * wn;
      }
    }
    sink(element_dofs(disc, dofs, f.left), K, rhs);
  }

  if (!spec.point_loads.empty()) {
    double hmin = std::numeric_limits<double>::max();
    for (double h : disc.h_elem) hmin = std::min(hmin, h);
    for (const auto& pl : spec.point_loads) {
      int found = -1;
      for (const auto& edge : tc.edges.edges) {
        const int v = edge.vertices[0];
        if (mesh.dim == 2 && (mesh.nodes[sz(v)] - pl.location).norm() < 1e-9 * hmin) found = v;
      }
      if (mesh.dim == 3) {
        for (int e = 0; e < mesh.element_count() && found < 0; ++e)
          for (int c : re.corner_nodes()) {
            const int v = mesh.element(e)[sz(c)];
            if ((mesh.nodes[sz(v)] - pl.location).norm() < 1e-9 * hmin) found = v;
          }
      }
      if (found < 0) throw SpecificationError("point load location is not a mesh vertex");
      std::vector<int> ids;
      Eigen::VectorXd fl(n);
      for (int c = 0; c < n; ++c) {
        ids.push_back(dofs.u(found, c));
        fl[c] = pl.force[c];
      }
      sink(ids, empty, fl);
    }
  }

  if (!spec.line_loads.empty()) {
    if (mesh.dim != 3) throw SpecificationError("line loads require a 3D mesh");
    static constexpr int hex_edges[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                             {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
    const auto gauss = gauss_legendre(mesh.degree + 2);
    for (const auto& ll : spec.line_loads) {
      const Vec3 axis = ll.b - ll.a;
      const double len = axis.norm();
      if (!(len > 0.0)) throw SpecificationError("line load segment has zero length");
      auto on_segment = [&](const Vec3& x) {
        const double t = (x - ll.a).dot(axis) / (len * len);
        return t > -1e-10 && t < 1 + 1e-10 && (x - ll.a - t * axis).norm() < 1e-9 * len;
      };
      std::set<std::pair<int, int>> done;
      for (int e = 0; e < mesh.element_count(); ++e) {
        const auto elem = mesh.element(e);
        for (const auto& he : hex_edges) {
          const int va = elem[sz(re.corner_nodes()[sz(he[0])])], vb = elem[sz(re.corner_nodes()[sz(he[1])])];
          if (!on_segment(mesh.nodes[sz(va)]) || !on_segment(mesh.nodes[sz(vb)])) continue;
          if (!done.insert({std::min(va, vb), std::max(va, vb)}).second) continue;
          const Vec3 A = re.corners()[sz(he[0])], B = re.corners()[sz(he[1])];
          std::vector<std::pair<double, int>> along;
          for (int a = 0; a < nb; ++a) {
            const Vec3& xi = re.nodes()[sz(a)];
            const double t = (xi - A).dot(B - A);
            if ((xi - A - t * (B - A)).norm() < 1e-12) along.emplace_back(t, a);
          }
          std::sort(along.begin(), along.end());
          std::vector<double> tn;
          for (const auto& [t, a] : along) tn.push_back(t);
          std::vector<int> ids;
          for (const auto& [t, a] : along)
            for (int c = 0; c < n; ++c) ids.push_back(dofs.u(elem[sz(a)], c));
          Eigen::VectorXd fl = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ids.size()));
          std::vector<double> L, dL;
          for (std::size_t q = 0; q < gauss.size(); ++q) {
            lagrange_line(tn, gauss.points[q].x(), L, dL);
            Vec3 x = Vec3::Zero(), dx = Vec3::Zero();
            for (std::size_t k = 0; k < along.size(); ++k) {
              x += L[k] * mesh.nodes[sz(elem[sz(along[k].second)])];
              dx += dL[k] * mesh.nodes[sz(elem[sz(along[k].second)])];
            }
            const Vec3 j = ll.force ? ll.force(x) : Vec3::Zero();
            const double w = gauss.weights[q] * dx.norm();
            for (std::size_t k = 0; k < along.size(); ++k)
              for (int c = 0; c < n; ++c) fl[static_cast<Eigen::Index>(k) * n + c] += w * L[k] * j[c];
          }
          sink(ids, empty, fl);
        }
      }
      if (done.empty()) throw SpecificationError("line load segment does not follow mesh edges");
    }
  }
}

}  // namespace

GlobalSystem assemble_system(const Discretization& disc, const MaterialTensors& mat, const BoundarySpec& spec,
                             const AssemblyOptions& opts) {
  const Mesh& mesh = *disc.mesh;
  GlobalSystem sys;
  sys.dofs = build_dofmap(disc, spec, opts);
  const DofMap& dofs = sys.dofs;
  const int nfree = dofs.free_count;
  const int nrows = dofs.size();
  const int fields = dofs.dim + (dofs.with_potential ? 1 : 0);

  // Sparsity: every dof of an element couples with every dof of the element and its face neighbours.
  const int ne = mesh.element_count();
  std::vector<std::vector<int>> nbrs(sz(ne));
  for (int e = 0; e < ne; ++e) nbrs[sz(e)].push_back(e);
  for (int fi : disc.tagged.conn.interior) {
    const Face& f = disc.tagged.conn.faces[sz(fi)];
    nbrs[sz(f.left)].push_back(f.right);
    nbrs[sz(f.right)].push_back(f.left);
  }
  std::vector<std::vector<int>> rep_elems(sz(dofs.rep_count));
  for (int e = 0; e < ne; ++e)
    for (int node : mesh.element(e)) {
      auto& list = rep_elems[sz(dofs.rep_index[sz(node)])];
      if (list.empty() || list.back() != e) list.push_back(e);
    }
  std::vector<std::vector<int>> mult_of(sz(dofs.full_size));
  for (std::size_t m = 0; m < dofs.multipliers.size(); ++m) {
    mult_of[sz(dofs.multipliers[m].first)].push_back(nfree + static_cast<int>(m));
    mult_of[sz(dofs.multipliers[m].second)].push_back(nfree + static_cast<int>(m));
  }

  std::vector<int> outer(sz(nrows + 1), 0);
  std::vector<int> inner;
  std::vector<int> stamp(sz(dofs.rep_count), -1);
  std::vector<int> reps;
  std::vector<std::vector<int>> rows_of_rep(sz(fields));
  // Rows are emitted in reduced order; reduced order follows full order (u block, then phi block).
  std::vector<std::vector<int>> row_cols(sz(nrows));
  for (int r = 0; r < dofs.rep_count; ++r) {
    reps.clear();
    for (int e : rep_elems[sz(r)])
      for (int e2 : nbrs[sz(e)])
        for (int node : mesh.element(e2)) {
          const int rr = dofs.rep_index[sz(node)];
          if (stamp[sz(rr)] != r) {
            stamp[sz(rr)] = r;
            reps.push_back(rr);
          }
        }
    std::sort(reps.begin(), reps.end());
    std::vector<int> cols;
    for (int fld = 0; fld < fields; ++fld)
      for (int rr : reps) {
        const int full = fld < dofs.dim ? rr * dofs.dim + fld : dofs.dim * dofs.rep_count + rr;
        const int red = dofs.reduced[sz(full)];
        if (red >= 0) cols.push_back(red);
      }
    std::sort(cols.begin(), cols.end());
    for (int fld = 0; fld < fields; ++fld) {
      const int full = fld < dofs.dim ? r * dofs.dim + fld : dofs.dim * dofs.rep_count + r;
      const int red = dofs.reduced[sz(full)];
      if (red < 0) continue;
      auto& rc = row_cols[sz(red)];
      rc = cols;
      for (int m : mult_of[sz(full)]) rc.push_back(m);
      std::sort(rc.begin(), rc.end());
    }
  }
  for (std::size_t m = 0; m < dofs.multipliers.size(); ++m) {
    auto& rc = row_cols[sz(nfree) + m];
    rc = {dofs.reduced[sz(dofs.multipliers[m].first)], dofs.reduced[sz(dofs.multipliers[m].second)]};
    std::sort(rc.begin(), rc.end());
  }
  for (int i = 0; i < nrows; ++i) outer[sz(i + 1)] = outer[sz(i)] + static_cast<int>(row_cols[sz(i)].size());
  inner.reserve(sz(outer.back()));
  for (auto& rc : row_cols) {
    inner.insert(inner.end(), rc.begin(), rc.end());
    std::vector<int>().swap(rc);
  }
  std::vector<double> values(inner.size(), 0.0);
  sys.f = Eigen::VectorXd::Zero(nrows);

  auto locate = [&](int row, int col) -> double& {
    const auto* b = inner.data() + outer[sz(row)];
    const auto* e = inner.data() + outer[sz(row + 1)];
    const auto* it = std::lower_bound(b, e, col);
    if (it == e || *it != col) throw ConnectivityError("assembly: entry outside the sparsity pattern");
    return values[sz(static_cast<int>(it - inner.data()))];
  };

  std::vector<int> red;
  const Sink sink = [&](const std::vector<int>& ids, const Eigen::MatrixXd& K, const Eigen::VectorXd& f) {
    const int m = static_cast<int>(ids.size());
    red.resize(sz(m));
    for (int i = 0; i < m; ++i) red[sz(i)] = dofs.reduced[sz(ids[sz(i)])];
    for (int i = 0; i < m; ++i) {
      const int ri = red[sz(i)];
      if (ri < 0) continue;
      sys.f[ri] += f[i];
      if (K.size() == 0) continue;
      for (int j = 0; j < m; ++j) {
        const double v = K(i, j);
        if (v == 0.0) continue;
        const int rj = red[sz(j)];
        if (rj >= 0) locate(ri, rj) += v;
        else sys.f[ri] -= v * dofs.fixed_value[sz(ids[sz(j)])];
      }
    }
  };
  assembly_loop(disc, mat, spec, opts, dofs, sink);

  for (std::size_t m = 0; m < dofs.multipliers.size(); ++m) {
    const int row = nfree + static_cast<int>(m);
    const int a = dofs.reduced[sz(dofs.multipliers[m].first)];
    const int b = dofs.reduced[sz(dofs.multipliers[m].second)];
    locate(row, a) += 1.0;
    locate(a, row) += 1.0;
    locate(row, b) -= 1.0;
    locate(b, row) -= 1.0;
  }

  sys.K.resize(nrows, nrows);
  sys.K.resizeNonZeros(static_cast<Eigen::Index>(inner.size()));
  std::memcpy(sys.K.outerIndexPtr(), outer.data(), outer.size() * sizeof(int));
  std::memcpy(sys.K.innerIndexPtr(), inner.data(), inner.size() * sizeof(int));
  std::memcpy(sys.K.valuePtr(), values.data(), values.size() * sizeof(double));

  sys.beta_min = std::numeric_limits<double>::max();
  sys.beta_max = 0.0;
  for (int fi : disc.tagged.conn.interior) {
    const double b = face_beta(disc, mat, opts, fi);
    sys.beta_min = std::min(sys.beta_min, b);
    sys.beta_max = std::max(sys.beta_max, b);
  }
  if (disc.tagged.conn.interior.empty()) sys.beta_min = 0.0;
  return sys;
}

Eigen::VectorXd full_residual(const Discretization& disc, const MaterialTensors& mat, const BoundarySpec& spec,
                              const AssemblyOptions& opts, const DofMap& dofs, const Eigen::VectorXd& full_values) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(dofs.full_size);
  const Sink sink = [&](const std::vector<int>& ids, const Eigen::MatrixXd& K, const Eigen::VectorXd& f) {
    const int m = static_cast<int>(ids.size());
    for (int i = 0; i < m; ++i) {
      double acc = -f[i];
      if (K.size() != 0)
        for (int j = 0; j < m; ++j) acc += K(i, j) * full_values[ids[sz(j)]];
      r[ids[sz(i)]] += acc;
    }
  };
  assembly_loop(disc, mat, spec, opts, dofs, sink);
  return r;
}

std::uint64_t system_hash(const GlobalSystem& sys) {
  std::uint64_t h = 1469598103934665603ull;
  auto feed = [&](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  const auto& K = sys.K;
  feed(K.outerIndexPtr(), sz(static_cast<int>(K.outerSize()) + 1) * sizeof(int));
  feed(K.innerIndexPtr(), sz(static_cast<int>(K.nonZeros())) * sizeof(int));
  feed(K.valuePtr(), sz(static_cast<int>(K.nonZeros())) * sizeof(double));
  feed(sys.f.data(), sz(static_cast<int>(sys.f.size())) * sizeof(double));
  return h;
}

void dump_matrix(const Eigen::SparseMatrix<double>& K, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write matrix dump '" + path + "'");
  char buf[96];
  for (int c = 0; c < K.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(K, c); it; ++it) {
      std::snprintf(buf, sizeof buf, "%lld %lld %.17g\n", static_cast<long long>(it.row()),
                    static_cast<long long>(it.col()), it.value());
      out << buf;
    }
  if (!out) throw IoError("write failed for '" + path + "'");
}

double symmetry_defect(const Eigen::SparseMatrix<double>& K) {
  const Eigen::SparseMatrix<double> T = K.transpose();
  const Eigen::SparseMatrix<double> D = K - T;
  double dmax = 0.0, kmax = 0.0;
  for (int c = 0; c < D.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(D, c); it; ++it) dmax = std::max(dmax, std::abs(it.value()));
  for (int c = 0; c < K.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(K, c); it; ++it) kmax = std::max(kmax, std::abs(it.value()));
  return kmax > 0.0 ? dmax / kmax : 0.0;
}

}  // namespace c0ipm
