#include "c0ipm/refelem.hpp"

#include "c0ipm/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace c0ipm {

namespace {

constexpr int kMaxDegree = 6;

// Values, first and second derivatives of the 1D Lagrange polynomials on `x`.
void lagrange_1d(const std::vector<double>& x, double t, double* L, double* dL, double* d2L) {
  const int n = static_cast<int>(x.size());
  for (int i = 0; i < n; ++i) {
    double value = 1.0;
    double first = 0.0;
    double second = 0.0;
    for (int m = 0; m < n; ++m) {
      if (m == i) continue;
      value *= (t - x[static_cast<std::size_t>(m)]) /
               (x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(m)]);
    }
    for (int k = 0; k < n; ++k) {
      if (k == i) continue;
      const double ck = 1.0 / (x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(k)]);
      double prod = ck;
      for (int m = 0; m < n; ++m) {
        if (m == i || m == k) continue;
        prod *= (t - x[static_cast<std::size_t>(m)]) /
                (x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(m)]);
      }
      first += prod;
      for (int l = 0; l < n; ++l) {
        if (l == i || l == k) continue;
        double p2 = ck / (x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(l)]);
        for (int m = 0; m < n; ++m) {
          if (m == i || m == k || m == l) continue;
          p2 *= (t - x[static_cast<std::size_t>(m)]) /
                (x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(m)]);
        }
        second += p2;
      }
    }
    L[i] = value;
    dL[i] = first;
    d2L[i] = second;
  }
}

double warp_factor(int p, double r) {
  const auto gll = gauss_lobatto_points(p + 1);
  std::vector<double> req(static_cast<std::size_t>(p + 1));
  for (int i = 0; i <= p; ++i) req[static_cast<std::size_t>(i)] = -1.0 + 2.0 * i / p;
  double warp = 0.0;
  for (int i = 0; i <= p; ++i) {
    double li = 1.0;
    for (int m = 0; m <= p; ++m) {
      if (m == i) continue;
      li *= (r - req[static_cast<std::size_t>(m)]) /
            (req[static_cast<std::size_t>(i)] - req[static_cast<std::size_t>(m)]);
    }
    warp += li * ((2.0 * gll[static_cast<std::size_t>(i)] - 1.0) - req[static_cast<std::size_t>(i)]);
  }
  if (std::abs(r) < 1.0 - 1e-10) return warp / (1.0 - r * r);
  return 0.0;
}

}  // namespace

std::vector<Vec3> triangle_nodes(int p) {
  std::vector<Vec3> out;
  if (p == 1) {
    out = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    return out;
  }
  static constexpr double alpha_opt[] = {0.0,    0.0,    1.4152, 0.1001, 0.2751,
                                         0.9800, 1.0999, 1.2832, 1.3648, 1.4773,
                                         1.4959, 1.5743, 1.5770, 1.6223, 1.6258};
  const double alpha = p < 16 ? alpha_opt[p - 1] : 5.0 / 3.0;
  const double s3 = std::sqrt(3.0);
  for (int j = 0; j <= p; ++j) {
    for (int i = 0; i <= p - j; ++i) {
      // Equilateral-triangle barycentrics: L1 top vertex <-> (0,1), L2 left <-> (0,0), L3 right <-> (1,0).
      const double L1 = static_cast<double>(j) / p;
      const double L3 = static_cast<double>(i) / p;
      const double L2 = 1.0 - L1 - L3;
      double x = -L2 + L3;
      double y = (-L2 - L3 + 2.0 * L1) / s3;
      const double warp1 = 4.0 * L2 * L3 * warp_factor(p, L3 - L2) * (1.0 + (alpha * L1) * (alpha * L1));
      const double warp2 = 4.0 * L1 * L3 * warp_factor(p, L1 - L3) * (1.0 + (alpha * L2) * (alpha * L2));
      const double warp3 = 4.0 * L1 * L2 * warp_factor(p, L2 - L1) * (1.0 + (alpha * L3) * (alpha * L3));
      x += warp1 + std::cos(2.0 * std::numbers::pi / 3.0) * warp2 +
           std::cos(4.0 * std::numbers::pi / 3.0) * warp3;
      y += std::sin(2.0 * std::numbers::pi / 3.0) * warp2 +
           std::sin(4.0 * std::numbers::pi / 3.0) * warp3;
      const double l1 = (s3 * y + 1.0) / 3.0;
      const double l3 = 0.5 * (1.0 - l1 + x);
      Vec3 node(l3, l1, 0.0);
      // Clean round-off on the edges so that shared edge nodes match exactly.
      for (int d = 0; d < 2; ++d)
        if (std::abs(node[d]) < 1e-14) node[d] = 0.0;
      out.push_back(node);
    }
  }
  return out;
}

ReferenceElement::ReferenceElement(Shape shape, int degree)
    : shape_(shape), degree_(degree), dim_(shape_dim(shape)) {
  if (degree < 1 || degree > kMaxDegree) {
    throw CapabilityError("reference element: degree " + std::to_string(degree) +
                          " not supported (1.." + std::to_string(kMaxDegree) + ")");
  }
  const int p = degree;
  switch (shape) {
    case Shape::triangle: {
      nodes_ = triangle_nodes(p);
      corners_ = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
      const int np = static_cast<int>(nodes_.size());
      corner_nodes_ = {0, p, np - 1};
      for (int b = 0; b <= p; ++b)
        for (int a = 0; a <= p - b; ++a) exponents_.emplace_back(a, b);
      Eigen::MatrixXd V(np, np);
      for (int i = 0; i < np; ++i)
        for (int m = 0; m < np; ++m)
          V(i, m) = std::pow(nodes_[static_cast<std::size_t>(i)].x(), exponents_[static_cast<std::size_t>(m)][0]) *
                    std::pow(nodes_[static_cast<std::size_t>(i)].y(), exponents_[static_cast<std::size_t>(m)][1]);
      coefficients_ = V.inverse();
      faces_.resize(3);
      faces_[0].corners = {0, 1};
      faces_[0].normal = Vec3(0, -1, 0);
      faces_[1].corners = {1, 2};
      faces_[1].normal = Vec3(1, 1, 0).normalized();
      faces_[2].corners = {2, 0};
      faces_[2].normal = Vec3(-1, 0, 0);
      break;
    }
    case Shape::quadrilateral: {
      nodes_1d_ = gauss_lobatto_points(p + 1);
      for (int j = 0; j <= p; ++j)
        for (int i = 0; i <= p; ++i)
          nodes_.emplace_back(nodes_1d_[static_cast<std::size_t>(i)], nodes_1d_[static_cast<std::size_t>(j)], 0.0);
      corners_ = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0)};
      corner_nodes_ = {0, p, (p + 1) * (p + 1) - 1, p * (p + 1)};
      faces_.resize(4);
      faces_[0].corners = {0, 1};
      faces_[0].normal = Vec3(0, -1, 0);
      faces_[1].corners = {1, 2};
      faces_[1].normal = Vec3(1, 0, 0);
      faces_[2].corners = {2, 3};
      faces_[2].normal = Vec3(0, 1, 0);
      faces_[3].corners = {3, 0};
      faces_[3].normal = Vec3(-1, 0, 0);
      break;
    }
    case Shape::hexahedron: {
      nodes_1d_ = gauss_lobatto_points(p + 1);
      for (int k = 0; k <= p; ++k)
        for (int j = 0; j <= p; ++j)
          for (int i = 0; i <= p; ++i)
            nodes_.emplace_back(nodes_1d_[static_cast<std::size_t>(i)], nodes_1d_[static_cast<std::size_t>(j)],
                                nodes_1d_[static_cast<std::size_t>(k)]);
      corners_ = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0),
                  Vec3(0, 0, 1), Vec3(1, 0, 1), Vec3(1, 1, 1), Vec3(0, 1, 1)};
      const int q = p + 1;
      auto lex = [q](int i, int j, int k) { return i + q * j + q * q * k; };
      corner_nodes_ = {lex(0, 0, 0), lex(p, 0, 0), lex(p, p, 0), lex(0, p, 0),
                       lex(0, 0, p), lex(p, 0, p), lex(p, p, p), lex(0, p, p)};
      faces_.resize(6);
      faces_[0].corners = {0, 3, 7, 4};
      faces_[0].normal = Vec3(-1, 0, 0);
      faces_[1].corners = {1, 2, 6, 5};
      faces_[1].normal = Vec3(1, 0, 0);
      faces_[2].corners = {0, 1, 5, 4};
      faces_[2].normal = Vec3(0, -1, 0);
      faces_[3].corners = {3, 2, 6, 7};
      faces_[3].normal = Vec3(0, 1, 0);
      faces_[4].corners = {0, 1, 2, 3};
      faces_[4].normal = Vec3(0, 0, -1);
      faces_[5].corners = {4, 5, 6, 7};
      faces_[5].normal = Vec3(0, 0, 1);
      break;
    }
  }

  volume_rule_ = volume_quadrature(shape, 2 * p);
  volume_tab_ = tabulate(volume_rule_.points, 2);
  face_rule_ = face_quadrature(shape, 2 * p + 1);

  for (auto& face : faces_) {
    const auto& c = face.corners;
    face.origin = corners_[static_cast<std::size_t>(c[0])];
    face.axis_s = corners_[static_cast<std::size_t>(c[1])] - face.origin;
    if (c.size() == 4) face.axis_t = corners_[static_cast<std::size_t>(c[3])] - face.origin;
    for (int a = 0; a < node_count(); ++a) {
      if (std::abs((nodes_[static_cast<std::size_t>(a)] - face.origin).dot(face.normal)) < 1e-12) {
        face.nodes.push_back(a);
      }
    }
    for (const auto& pt : face_rule_.points) {
      face.points.push_back(face.origin + pt.x() * face.axis_s + pt.y() * face.axis_t);
    }
    face.tab = tabulate(face.points, 2);
  }
}

bool ReferenceElement::contains(const Vec3& xi, double tol) const {
  if (shape_ == Shape::triangle) {
    return xi.x() >= -tol && xi.y() >= -tol && xi.x() + xi.y() <= 1.0 + tol;
  }
  for (int d = 0; d < dim_; ++d) {
    if (xi[d] < -tol || xi[d] > 1.0 + tol) return false;
  }
  return true;
}

Vec3 ReferenceElement::face_point(int f, double s, double t) const {
  const auto& face = faces_[static_cast<std::size_t>(f)];
  return face.origin + s * face.axis_s + t * face.axis_t;
}

void ReferenceElement::evaluate(const Vec3& xi, int order, double* values, double* grads,
                                double* hess) const {
  const int nb = node_count();
  const int d = dim_;
  if (shape_ == Shape::triangle) {
    const int nm = static_cast<int>(exponents_.size());
    // Monomial values and derivatives up to order two.
    Eigen::VectorXd m0(nm), mx(nm), my(nm), mxx(nm), mxy(nm), myy(nm);
    auto pw = [](double x, int e) { return e <= 0 ? (e == 0 ? 1.0 : 0.0) : std::pow(x, e); };
    for (int m = 0; m < nm; ++m) {
      const int a = exponents_[static_cast<std::size_t>(m)][0];
      const int b = exponents_[static_cast<std::size_t>(m)][1];
      m0[m] = pw(xi.x(), a) * pw(xi.y(), b);
      mx[m] = a * pw(xi.x(), a - 1) * pw(xi.y(), b);
      my[m] = b * pw(xi.x(), a) * pw(xi.y(), b - 1);
      mxx[m] = a * (a - 1) * pw(xi.x(), a - 2) * pw(xi.y(), b);
      mxy[m] = a * b * pw(xi.x(), a - 1) * pw(xi.y(), b - 1);
      myy[m] = b * (b - 1) * pw(xi.x(), a) * pw(xi.y(), b - 2);
    }
    Eigen::Map<Eigen::VectorXd>(values, nb) = coefficients_.transpose() * m0;
    if (order >= 1) {
      Eigen::Map<Eigen::MatrixXd> g(grads, d, nb);
      g.row(0) = (coefficients_.transpose() * mx).transpose();
      g.row(1) = (coefficients_.transpose() * my).transpose();
    }
    if (order >= 2) {
      Eigen::Map<Eigen::MatrixXd> h(hess, d * d, nb);
      h.row(0) = (coefficients_.transpose() * mxx).transpose();
      h.row(1) = (coefficients_.transpose() * mxy).transpose();
      h.row(2) = h.row(1);
      h.row(3) = (coefficients_.transpose() * myy).transpose();
    }
    return;
  }

  const int q = degree_ + 1;
  double L[3][kMaxDegree + 1], dL[3][kMaxDegree + 1], d2L[3][kMaxDegree + 1];
  for (int k = 0; k < d; ++k) lagrange_1d(nodes_1d_, xi[k], L[k], dL[k], d2L[k]);
  Eigen::Map<Eigen::MatrixXd> g(grads, d, nb);
  Eigen::Map<Eigen::MatrixXd> h(hess, d * d, nb);
  for (int a = 0; a < nb; ++a) {
    int idx[3] = {a % q, (a / q) % q, d == 3 ? a / (q * q) : 0};
    double v[3], dv[3], d2v[3];
    for (int k = 0; k < d; ++k) {
      v[k] = L[k][idx[k]];
      dv[k] = dL[k][idx[k]];
      d2v[k] = d2L[k][idx[k]];
    }
    double prod = 1.0;
    for (int k = 0; k < d; ++k) prod *= v[k];
    values[a] = prod;
    if (order >= 1) {
      for (int k = 0; k < d; ++k) {
        double gk = dv[k];
        for (int m = 0; m < d; ++m)
          if (m != k) gk *= v[m];
        g(k, a) = gk;
      }
    }
    if (order >= 2) {
      for (int r = 0; r < d; ++r)
        for (int s = 0; s < d; ++s) {
          double hv = 1.0;
          for (int m = 0; m < d; ++m) {
            if (r == s) hv *= (m == r) ? d2v[m] : v[m];
            else hv *= (m == r || m == s) ? dv[m] : v[m];
          }
          h(r * d + s, a) = hv;
        }
    }
  }
}

Tabulation ReferenceElement::tabulate(const std::vector<Vec3>& points, int order) const {
  const int nb = node_count();
  const int np = static_cast<int>(points.size());
  Tabulation tab;
  tab.values.resize(np, nb);
  if (order >= 1) tab.gradients.assign(static_cast<std::size_t>(np), Eigen::MatrixXd::Zero(dim_, nb));
  if (order >= 2) tab.hessians.assign(static_cast<std::size_t>(np), Eigen::MatrixXd::Zero(dim_ * dim_, nb));
  Eigen::VectorXd values(nb);
  Eigen::MatrixXd grad_scratch(dim_, nb), hess_scratch(dim_ * dim_, nb);
  for (int q = 0; q < np; ++q) {
    const Vec3& xi = points[static_cast<std::size_t>(q)];
    if (!contains(xi, 1e-10)) {
      throw DomainError("tabulate: point outside the reference element");
    }
    evaluate(xi, order, values.data(), grad_scratch.data(), hess_scratch.data());
    tab.values.row(q) = values.transpose();
    if (order >= 1) tab.gradients[static_cast<std::size_t>(q)] = grad_scratch;
    if (order >= 2) tab.hessians[static_cast<std::size_t>(q)] = hess_scratch;
  }
  return tab;
}

std::vector<int> flip_permutation(Shape element_shape, int n_qp, int rotation) {
  std::vector<int> left_to_right(static_cast<std::size_t>(n_qp));
  if (element_shape != Shape::hexahedron) {
    if (rotation != 0 && rotation != 1) {
      throw ConnectivityError("flip_permutation: segment rotation must be 0 or 1");
    }
    for (int k = 0; k < n_qp; ++k) {
      left_to_right[static_cast<std::size_t>(k)] = rotation == 0 ? k : n_qp - 1 - k;
    }
  } else {
    if (rotation < 0 || rotation > 7) {
      throw ConnectivityError("flip_permutation: square rotation must be in 0..7");
    }
    const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n_qp))));
    if (n * n != n_qp) throw ConnectivityError("flip_permutation: square face needs n*n points");
    const int corner = rotation / 2;
    const bool reversed = rotation % 2 == 1;
    auto sigma = [&](int m) { return reversed ? (corner - m + 4) % 4 : (corner + m) % 4; };
    const int cx[4] = {0, 1, 1, 0};
    const int cy[4] = {0, 0, 1, 1};
    const int s0 = sigma(0), s1 = sigma(1), s3 = sigma(3);
    const int ox = cx[s0] * (n - 1), oy = cy[s0] * (n - 1);
    const int ix = cx[s1] - cx[s0], iy = cy[s1] - cy[s0];
    const int jx = cx[s3] - cx[s0], jy = cy[s3] - cy[s0];
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const int rx = ox + i * ix + j * jx;
        const int ry = oy + i * iy + j * jy;
        left_to_right[static_cast<std::size_t>(i + n * j)] = rx + n * ry;
      }
  }
  std::vector<int> perm(static_cast<std::size_t>(n_qp));
  for (int k = 0; k < n_qp; ++k) {
    perm[static_cast<std::size_t>(left_to_right[static_cast<std::size_t>(k)])] = k;
  }
  return perm;
}

namespace {

GeometryFactors map_points(const ReferenceElement& re, const std::vector<Vec3>& coords,
                           const Tabulation& tab, const QuadratureRule* rule, const ReferenceFace* face) {
  const int d = re.dim();
  const int nb = re.node_count();
  if (static_cast<int>(coords.size()) != nb) {
    throw GeometryError("physical_geometry: node count does not match the reference element");
  }
  Eigen::MatrixXd X(d, nb);
  for (int a = 0; a < nb; ++a) X.col(a) = coords[static_cast<std::size_t>(a)].head(d);

  const int np = tab.points();
  GeometryFactors g;
  g.tab = &tab;
  g.points.resize(static_cast<std::size_t>(np));
  g.jacobian.resize(static_cast<std::size_t>(np));
  g.det.resize(static_cast<std::size_t>(np));
  g.gradients.resize(static_cast<std::size_t>(np));
  g.hessians.resize(static_cast<std::size_t>(np));
  if (rule) g.weights.resize(static_cast<std::size_t>(np));
  if (face) g.normals.resize(static_cast<std::size_t>(np));

  for (int q = 0; q < np; ++q) {
    const auto qs = static_cast<std::size_t>(q);
    const Eigen::MatrixXd& gref = tab.gradients[qs];
    const Eigen::MatrixXd& href = tab.hessians[qs];
    Eigen::MatrixXd J = X * gref.transpose();  // d x d, J(i,j) = dx_i / dxi_j
    const double det = J.determinant();
    if (!(det > 0.0)) throw GeometryError("physical_geometry: inverted or degenerate element");
    Eigen::MatrixXd invJ = J.inverse();
    Eigen::MatrixXd gx = invJ.transpose() * gref;

    // Map Hessian rows: Hmap(a*d+b, i) = d^2 x_i / dxi_a dxi_b.
    Eigen::MatrixXd Hmap = href * X.transpose();
    Eigen::MatrixXd M = href - Hmap * gx;
    Eigen::MatrixXd T(d * d, d * d);
    for (int c = 0; c < d; ++c)
      for (int e = 0; e < d; ++e)
        for (int a = 0; a < d; ++a)
          for (int b = 0; b < d; ++b) T(c * d + e, a * d + b) = invJ(a, c) * invJ(b, e);

    Vec3 x = Vec3::Zero();
    x.head(d) = X * tab.values.row(q).transpose();
    Mat3 J3 = Mat3::Identity();
    J3.topLeftCorner(d, d) = J;

    g.points[qs] = x;
    g.jacobian[qs] = J3;
    g.det[qs] = det;
    g.gradients[qs] = std::move(gx);
    g.hessians[qs] = T * M;

    if (rule && !face) g.weights[qs] = rule->weights[qs] * det;
    if (face) {
      const Eigen::VectorXd ts = J * face->axis_s.head(d);
      Eigen::VectorXd outward = invJ.transpose() * face->normal.head(d);
      Vec3 n = Vec3::Zero();
      double measure = 0.0;
      if (d == 2) {
        measure = ts.norm();
        n = Vec3(ts[1], -ts[0], 0.0) / measure;
      } else {
        const Eigen::VectorXd tt = J * face->axis_t.head(d);
        const Vec3 c = Vec3(ts[0], ts[1], ts[2]).cross(Vec3(tt[0], tt[1], tt[2]));
        measure = c.norm();
        n = c / measure;
      }
      if (n.head(d).dot(outward) < 0.0) n = -n;
      g.normals[qs] = n;
      if (rule) g.weights[qs] = rule->weights[qs] * measure;
    }
  }
  return g;
}

}  // namespace

GeometryFactors physical_geometry(const ReferenceElement& re, const std::vector<Vec3>& elem_coords,
                                  int face) {
  if (face < 0) return map_points(re, elem_coords, re.volume_tab(), &re.volume_rule(), nullptr);
  if (face >= static_cast<int>(re.faces().size())) {
    throw ConnectivityError("physical_geometry: local face id out of range");
  }
  const auto& f = re.face(face);
  return map_points(re, elem_coords, f.tab, &re.face_rule(), &f);
}

GeometryFactors physical_geometry_at(const ReferenceElement& re,
                                     const std::vector<Vec3>& elem_coords, const Tabulation& tab) {
  return map_points(re, elem_coords, tab, nullptr, nullptr);
}

}  // namespace c0ipm
