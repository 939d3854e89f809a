#pragma once

#include "c0ipm/quadrature.hpp"

#include <array>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace c0ipm {

class ReferenceElement;

struct BoundaryFace {
  int element = 0;
  int local_face = 0;
  int tag = 0;
  bool operator==(const BoundaryFace&) const = default;
};

/// High-order mesh. Element node lists follow the reference element ordering.
struct Mesh {
  int dim = 2;
  int degree = 1;
  Shape shape = Shape::triangle;
  std::vector<Vec3> nodes;
  std::vector<int> connectivity;  ///< flat, nodes_per_element entries per element
  int nodes_per_element = 0;
  std::vector<BoundaryFace> boundary_faces;

  [[nodiscard]] int element_count() const {
    return nodes_per_element == 0 ? 0 : static_cast<int>(connectivity.size()) / nodes_per_element;
  }
  [[nodiscard]] int node_count() const { return static_cast<int>(nodes.size()); }
  [[nodiscard]] std::span<const int> element(int e) const {
    return {connectivity.data() + static_cast<std::size_t>(e) * static_cast<std::size_t>(nodes_per_element),
            static_cast<std::size_t>(nodes_per_element)};
  }
  [[nodiscard]] std::vector<Vec3> element_coords(int e) const;
  bool operator==(const Mesh&) const = default;
};

/// Axis-aligned box.
struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Ones();
};

enum class TriangleSplit {
  diagonal,  ///< two triangles per cell, cut along the (lo,lo)-(hi,hi) diagonal
  crossed,   ///< four triangles per cell around its center
};

/// Straight-sided structured mesh of a box. Triangle cells follow `split`. Boundary faces are tagged 2*axis + side:
/// 0 x-min, 1 x-max, 2 y-min, 3 y-max, 4 z-min, 5 z-max.
Mesh structured_mesh(const Box& box, std::array<int, 3> divisions, Shape shape, int degree,
                     TriangleSplit split = TriangleSplit::diagonal);

/// Checks ids, counts and shape consistency. Throws ParseError.
void validate_mesh(const Mesh& mesh);

Mesh read_mesh(const std::string& path);
Mesh parse_mesh(const std::string& text);
void write_mesh(const Mesh& mesh, const std::string& path);
std::string format_mesh(const Mesh& mesh);

/// Characteristic element size: (n_sd! |Omega_e|)^(1/n_sd) for simplices and
/// |Omega_e|^(1/n_sd) otherwise, so that a split square of side h gives h.
double element_size(const Mesh& mesh, const ReferenceElement& re, int e);

struct Face {
  int left = -1;
  int right = -1;  ///< -1 on the boundary
  int left_face = -1;
  int right_face = -1;
  int rotation = 0;  ///< see flip_permutation
  int tag = -1;      ///< boundary tag, -1 for interior faces
  bool periodic = false;
  [[nodiscard]] bool interior() const { return right >= 0; }
};

struct FaceConnectivity {
  std::vector<Face> faces;
  std::vector<int> interior;  ///< indices into faces
  std::vector<int> boundary;
};

enum class EdgeKind { interior, boundary_smooth, boundary_sharp, neumann_sharp };

/// Mesh edges (vertices in 2D) with the elements sharing them.
struct MeshEdge {
  std::array<int, 2> vertices{-1, -1};  ///< node ids; second is -1 in 2D
  std::vector<int> elements;
  EdgeKind kind = EdgeKind::interior;
  std::vector<int> boundary_faces;  ///< indices into FaceConnectivity::faces
};

struct EdgeSet {
  std::vector<MeshEdge> edges;
};

/// Face table keyed by sorted corner ids. `node_map`, when given, replaces the ids of
/// faces whose corners are all mapped elsewhere (periodic slave faces). Throws ConnectivityError on a face
/// shared by more than two elements or by an element with itself.
FaceConnectivity build_connectivity(const Mesh& mesh, const std::vector<int>* node_map = nullptr);

EdgeSet build_edges(const Mesh& mesh, const FaceConnectivity& conn);

using PointFn = std::function<double(const Vec3&)>;
using VectorFn = std::function<Vec3(const Vec3&)>;
/// Boundary data may depend on the outward unit normal.
using NormalScalarFn = std::function<double(const Vec3&, const Vec3&)>;
using NormalVectorFn = std::function<Vec3(const Vec3&, const Vec3&)>;

struct PointLoad {
  Vec3 location = Vec3::Zero();
  Vec3 force = Vec3::Zero();
};

/// Force per unit length applied along the straight segment [a, b] (3D meshes).
struct LineLoad {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  VectorFn force;
};

/// Slave faces are mapped onto master faces by x_master = x_slave + translation.
struct PeriodicPair {
  int slave_tag = 0;
  int master_tag = 0;
  Vec3 translation = Vec3::Zero();
};

/// Boundary condition assignment by tag. Every non-periodic tag must appear in
/// exactly one set of each pair (d1/n1, d2/n2, phi_d/phi_n). Empty data functions
/// mean zero data.
struct BoundarySpec {
  std::set<int> d1, n1, d2, n2, phi_d, phi_n;
  VectorFn g1;
  NormalVectorFn g2;
  PointFn g3;
  NormalVectorFn t_n;
  NormalVectorFn r_n;
  NormalScalarFn w_n;
  VectorFn body;
  PointFn charge;
  std::vector<PointLoad> point_loads;
  std::vector<LineLoad> line_loads;
  std::vector<std::set<int>> electrodes;  ///< groups of tags sharing one potential
  std::vector<PeriodicPair> periodic;
};

struct PeriodicMap {
  std::vector<int> node_master;  ///< representative node of each node
  std::vector<int> faces;        ///< face-table indices of identified face pairs
};

/// Connectivity after boundary classification and periodic identification.
struct TaggedConnectivity {
  FaceConnectivity conn;
  PeriodicMap periodic;
  EdgeSet edges;
  std::vector<char> d1, d2, phi_d;    ///< per face, meaningful on boundary faces
  std::vector<int> electrode;         ///< per face, electrode group or -1
};

TaggedConnectivity apply_boundary_spec(const Mesh& mesh, const ReferenceElement& re,
                                       const BoundarySpec& spec);

/// Per-face element size h_F = min(h_left, h_right).
std::vector<double> face_sizes(const Mesh& mesh, const ReferenceElement& re, const FaceConnectivity& conn);

}  // namespace c0ipm
