#include "c0ipm/quadrature.hpp"

#include "c0ipm/errors.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace c0ipm {

int shape_dim(Shape shape) { return shape == Shape::hexahedron ? 3 : 2; }

int corner_count(Shape shape) {
  switch (shape) {
    case Shape::triangle: return 3;
    case Shape::quadrilateral: return 4;
    case Shape::hexahedron: return 8;
  }
  return 0;
}

int face_count(Shape shape) {
  switch (shape) {
    case Shape::triangle: return 3;
    case Shape::quadrilateral: return 4;
    case Shape::hexahedron: return 6;
  }
  return 0;
}

const char* shape_name(Shape shape) {
  switch (shape) {
    case Shape::triangle: return "TRI";
    case Shape::quadrilateral: return "QUAD";
    case Shape::hexahedron: return "HEX";
  }
  return "?";
}

namespace {

// Returns {P_n(x), P_{n-1}(x)}.
std::pair<double, double> legendre_pair(int n, double x) {
  double p0 = 1.0, p1 = x;
  if (n == 0) return {1.0, 0.0};
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  return {p1, p0};
}

}  // namespace

QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw ParameterError("gauss_legendre: need at least one point");
  QuadratureRule rule;
  rule.points.resize(static_cast<std::size_t>(n), Vec3::Zero());
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [pn, pm] = legendre_pair(n, x);
      const double dp = n * (x * pn - pm) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const auto [pn, pm] = legendre_pair(n, x);
    const double dp = n * (x * pn - pm) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // Ascending order on [0,1].
    const auto idx = static_cast<std::size_t>(n - 1 - i);
    rule.points[idx].x() = 0.5 * (x + 1.0);
    rule.weights[idx] = 0.5 * w;
  }
  return rule;
}

std::vector<double> gauss_lobatto_points(int n) {
  if (n < 2) throw ParameterError("gauss_lobatto_points: need at least two points");
  const int N = n - 1;
  std::vector<double> x(static_cast<std::size_t>(n));
  for (int j = 0; j <= N; ++j) x[static_cast<std::size_t>(j)] = std::cos(std::numbers::pi * j / N);
  if (N > 1) {
    for (int it = 0; it < 200; ++it) {
      double change = 0.0;
      for (int j = 0; j <= N; ++j) {
        const double xj = x[static_cast<std::size_t>(j)];
        double p0 = 1.0, p1 = xj;
        for (int k = 2; k <= N; ++k) {
          const double p2 = ((2.0 * k - 1.0) * xj * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        const double upd = (xj * p1 - p0) / ((N + 1) * p1);
        x[static_cast<std::size_t>(j)] = xj - upd;
        change = std::max(change, std::abs(upd));
      }
      if (change < 1e-16) break;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int j = 0; j <= N; ++j) {
    out[static_cast<std::size_t>(j)] = 0.5 * (1.0 - x[static_cast<std::size_t>(j)]);
  }
  out.front() = 0.0;
  out.back() = 1.0;
  return out;
}

QuadratureRule volume_quadrature(Shape shape, int degree) {
  QuadratureRule rule;
  switch (shape) {
    case Shape::triangle: {
      // Collapsed (Duffy) rule: x = u (1 - v), y = v, Jacobian (1 - v).
      const int nu = (degree + 2) / 2;
      const int nv = (degree + 3) / 2;
      const auto gu = gauss_legendre(nu);
      const auto gv = gauss_legendre(nv);
      for (int j = 0; j < nv; ++j) {
        const double v = gv.points[static_cast<std::size_t>(j)].x();
        for (int i = 0; i < nu; ++i) {
          const double u = gu.points[static_cast<std::size_t>(i)].x();
          rule.points.emplace_back(u * (1.0 - v), v, 0.0);
          rule.weights.push_back(gu.weights[static_cast<std::size_t>(i)] *
                                 gv.weights[static_cast<std::size_t>(j)] * (1.0 - v));
        }
      }
      break;
    }
    case Shape::quadrilateral: {
      const int n = (degree + 2) / 2;
      const auto g = gauss_legendre(n);
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          rule.points.emplace_back(g.points[static_cast<std::size_t>(i)].x(),
                                   g.points[static_cast<std::size_t>(j)].x(), 0.0);
          rule.weights.push_back(g.weights[static_cast<std::size_t>(i)] *
                                 g.weights[static_cast<std::size_t>(j)]);
        }
      break;
    }
    case Shape::hexahedron: {
      const int n = (degree + 2) / 2;
      const auto g = gauss_legendre(n);
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < n; ++i) {
            rule.points.emplace_back(g.points[static_cast<std::size_t>(i)].x(),
                                     g.points[static_cast<std::size_t>(j)].x(),
                                     g.points[static_cast<std::size_t>(k)].x());
            rule.weights.push_back(g.weights[static_cast<std::size_t>(i)] *
                                   g.weights[static_cast<std::size_t>(j)] *
                                   g.weights[static_cast<std::size_t>(k)]);
          }
      break;
    }
  }
  return rule;
}

QuadratureRule face_quadrature(Shape shape, int degree) {
  const int n = (degree + 2) / 2;
  const auto g = gauss_legendre(n);
  if (shape != Shape::hexahedron) return g;
  QuadratureRule rule;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      rule.points.emplace_back(g.points[static_cast<std::size_t>(i)].x(),
                               g.points[static_cast<std::size_t>(j)].x(), 0.0);
      rule.weights.push_back(g.weights[static_cast<std::size_t>(i)] *
                             g.weights[static_cast<std::size_t>(j)]);
    }
  return rule;
}

}  // namespace c0ipm
