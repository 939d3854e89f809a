#pragma once

#include "c0ipm/quadrature.hpp"

#include <Eigen/Dense>

#include <vector>

namespace c0ipm {

/// Basis values and reference derivatives at a set of points.
/// hessians[q] has dim*dim rows ordered a*dim+b.
struct Tabulation {
  Eigen::MatrixXd values;                  ///< npts x nbasis
  std::vector<Eigen::MatrixXd> gradients;  ///< per point: dim x nbasis
  std::vector<Eigen::MatrixXd> hessians;   ///< per point: dim*dim x nbasis
  [[nodiscard]] int points() const { return static_cast<int>(values.rows()); }
};

/// Local face of a reference element. The face is parametrized by
/// origin + s*axis_s (+ t*axis_t), which maps the parameter square/segment onto
/// the face with corners in the cyclic order of `corners`.
struct ReferenceFace {
  std::vector<int> corners;  ///< reference corner indices, cyclic
  std::vector<int> nodes;    ///< element node indices lying on the face
  Vec3 origin = Vec3::Zero();
  Vec3 axis_s = Vec3::Zero();
  Vec3 axis_t = Vec3::Zero();
  Vec3 normal = Vec3::Zero();  ///< outward unit normal in reference coordinates
  std::vector<Vec3> points;    ///< face quadrature points in element reference coordinates
  Tabulation tab;              ///< element basis traces at `points`
};

/// High-order nodal reference element: GLL tensor nodes on quadrilaterals and
/// hexahedra, warp-and-blend nodes on triangles.
class ReferenceElement {
public:
  ReferenceElement(Shape shape, int degree);

  [[nodiscard]] Shape shape() const { return shape_; }
  [[nodiscard]] int degree() const { return degree_; }
  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] int node_count() const { return static_cast<int>(nodes_.size()); }
  [[nodiscard]] const std::vector<Vec3>& nodes() const { return nodes_; }
  /// Node index of each reference corner.
  [[nodiscard]] const std::vector<int>& corner_nodes() const { return corner_nodes_; }
  [[nodiscard]] const std::vector<Vec3>& corners() const { return corners_; }

  [[nodiscard]] const QuadratureRule& volume_rule() const { return volume_rule_; }
  [[nodiscard]] const Tabulation& volume_tab() const { return volume_tab_; }
  /// Quadrature on the face parameter domain, shared by every local face.
  [[nodiscard]] const QuadratureRule& face_rule() const { return face_rule_; }
  [[nodiscard]] const std::vector<ReferenceFace>& faces() const { return faces_; }
  [[nodiscard]] const ReferenceFace& face(int f) const {
    return faces_[static_cast<std::size_t>(f)];
  }

  /// Basis values (order 0), gradients (order >= 1) and Hessians (order 2).
  /// Throws DomainError for points outside the closed reference element beyond 1e-10.
  [[nodiscard]] Tabulation tabulate(const std::vector<Vec3>& points, int order) const;

  [[nodiscard]] bool contains(const Vec3& xi, double tol) const;

  /// Reference coordinates of the point with parameter (s, t) on local face f.
  [[nodiscard]] Vec3 face_point(int f, double s, double t = 0.0) const;

private:
  void evaluate(const Vec3& xi, int order, double* values, double* grads, double* hess) const;

  Shape shape_;
  int degree_;
  int dim_;
  std::vector<Vec3> nodes_;
  std::vector<Vec3> corners_;
  std::vector<int> corner_nodes_;
  std::vector<double> nodes_1d_;              // tensor shapes
  std::vector<Eigen::Vector2i> exponents_;    // triangle monomials
  Eigen::MatrixXd coefficients_;              // triangle: nbasis x nmonomials
  QuadratureRule volume_rule_;
  Tabulation volume_tab_;
  QuadratureRule face_rule_;
  std::vector<ReferenceFace> faces_;
};

/// Warp-and-blend nodes of degree p on the reference triangle, ordered by
/// lattice rows (j outer, i inner, i + j <= p).
std::vector<Vec3> triangle_nodes(int p);

/// Permutation of face quadrature points: entry k is the index, as seen from the
/// left element, of the point that the right element numbers k.
/// Segment faces: rotation 0 (same direction) or 1 (reversed).
/// Square faces: rotation = 2*corner + parity, corner in 0..3, parity in {0, 1};
/// `n_qp` is the total number of points on the face.
std::vector<int> flip_permutation(Shape element_shape, int n_qp, int rotation);

/// Per-quadrature-point physical quantities for one element or one element face.
struct GeometryFactors {
  std::vector<Vec3> points;      ///< physical coordinates
  std::vector<double> weights;   ///< quadrature weight times det J (volume) or surface measure (face)
  std::vector<Mat3> jacobian;
  std::vector<double> det;
  std::vector<Eigen::MatrixXd> gradients;  ///< dim x nbasis, physical
  std::vector<Eigen::MatrixXd> hessians;   ///< dim*dim x nbasis, physical
  std::vector<Vec3> normals;               ///< faces only: outward unit normal
  const Tabulation* tab = nullptr;         ///< basis values
};

/// Isoparametric geometry of an element from its node coordinates.
/// face < 0 selects the volume quadrature; otherwise the given local face.
/// Throws GeometryError if det J <= 0 at any quadrature point.
GeometryFactors physical_geometry(const ReferenceElement& re, const std::vector<Vec3>& elem_coords,
                                  int face = -1);

/// Geometry at arbitrary reference points given their tabulation (order 2).
GeometryFactors physical_geometry_at(const ReferenceElement& re,
                                     const std::vector<Vec3>& elem_coords,
                                     const Tabulation& tab);

}  // namespace c0ipm
