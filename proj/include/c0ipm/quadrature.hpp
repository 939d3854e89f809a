#pragma once

#include "c0ipm/tensor.hpp"

#include <vector>

namespace c0ipm {

enum class Shape { triangle, quadrilateral, hexahedron };

int shape_dim(Shape shape);
int corner_count(Shape shape);
int face_count(Shape shape);
const char* shape_name(Shape shape);

/// Points are stored as 3-vectors; unused trailing coordinates are zero.
struct QuadratureRule {
  std::vector<Vec3> points;
  std::vector<double> weights;
  [[nodiscard]] std::size_t size() const { return weights.size(); }
};

/// n-point Gauss-Legendre rule on [0, 1].
QuadratureRule gauss_legendre(int n);

/// n-point Gauss-Lobatto-Legendre abscissae on [0, 1], ascending.
std::vector<double> gauss_lobatto_points(int n);

/// Rule on the reference element exact for polynomials of total degree `degree`
/// (simplices) or of that degree in each variable (tensor shapes).
/// Reference domains: triangle (0,0),(1,0),(0,1); unit square; unit cube.
QuadratureRule volume_quadrature(Shape shape, int degree);

/// Rule on the reference face parameter domain: [0,1] in 2D, [0,1]^2 for hexahedron faces.
/// Points of the square rule are ordered i + n*j with i along the first parameter.
QuadratureRule face_quadrature(Shape shape, int degree);

}  // namespace c0ipm
