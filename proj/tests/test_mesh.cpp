#include "c0ipm/errors.hpp"
#include "c0ipm/mesh.hpp"
#include "c0ipm/refelem.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

namespace c0ipm {
namespace {

const Box unit_square{Vec3(0, 0, 0), Vec3(1, 1, 0)};
const Box unit_cube{Vec3(0, 0, 0), Vec3(1, 1, 1)};

TEST(Mesh, StructuredCounts) {
  const auto q = structured_mesh(unit_square, {2, 2, 1}, Shape::quadrilateral, 1);
  EXPECT_EQ(q.node_count(), 9);
  EXPECT_EQ(q.element_count(), 4);
  const auto t = structured_mesh(unit_square, {2, 2, 1}, Shape::triangle, 1);
  EXPECT_EQ(t.element_count(), 8);
  EXPECT_EQ(t.node_count(), 9);
  const auto h = structured_mesh(unit_cube, {2, 2, 2}, Shape::hexahedron, 2);
  EXPECT_EQ(h.node_count(), 125);
  // Counting oracle: distinct node ids referenced by the connectivity.
  std::set<int> used(h.connectivity.begin(), h.connectivity.end());
  EXPECT_EQ(used.size(), 125u);
  const auto t4 = structured_mesh(unit_square, {3, 2, 1}, Shape::triangle, 4);
  EXPECT_EQ(t4.node_count(), (4 * 3 + 1) * (4 * 2 + 1));
}

TEST(Mesh, ConnectivityCounts) {
  const auto q = structured_mesh(unit_square, {2, 2, 1}, Shape::quadrilateral, 2);
  const auto cq = build_connectivity(q);
  EXPECT_EQ(cq.interior.size(), 4u);
  EXPECT_EQ(cq.boundary.size(), 8u);
  const auto h = structured_mesh(unit_cube, {2, 2, 2}, Shape::hexahedron, 1);
  const auto ch = build_connectivity(h);
  EXPECT_EQ(ch.interior.size(), 12u);
  EXPECT_EQ(ch.boundary.size(), 24u);
  for (const auto* c : {&cq, &ch})
    for (int fi : c->interior) EXPECT_LT(c->faces[static_cast<std::size_t>(fi)].left, c->faces[static_cast<std::size_t>(fi)].right);
  // Face-table completeness.
  const auto t = structured_mesh(unit_square, {3, 4, 1}, Shape::triangle, 3);
  const auto ct = build_connectivity(t);
  EXPECT_EQ(3 * t.element_count(), static_cast<int>(2 * ct.interior.size() + ct.boundary.size()));
  for (int fi : ct.boundary) EXPECT_GE(ct.faces[static_cast<std::size_t>(fi)].tag, 0);
}

// Physical quadrature points of a face seen from both sides coincide after flipping,
// and normals are opposite.
void check_flip_consistency(const Mesh& mesh, const FaceConnectivity& conn) {
  ReferenceElement re(mesh.shape, mesh.degree);
  for (int fi : conn.interior) {
    const Face& f = conn.faces[static_cast<std::size_t>(fi)];
    const auto gl = physical_geometry(re, mesh.element_coords(f.left), f.left_face);
    const auto gr = physical_geometry(re, mesh.element_coords(f.right), f.right_face);
    const auto perm = flip_permutation(mesh.shape, static_cast<int>(gl.points.size()), f.rotation);
    const double h = element_size(mesh, re, f.left);
    const Vec3 shift = gl.points[static_cast<std::size_t>(perm[0])] - gr.points[0];
    for (std::size_t k = 0; k < gr.points.size(); ++k) {
      const auto kl = static_cast<std::size_t>(perm[k]);
      EXPECT_LT((gl.points[kl] - gr.points[k] - shift).norm(), 1e-12 * h);
      EXPECT_LT((gl.normals[kl] + gr.normals[k]).norm(), 1e-12);
      EXPECT_NEAR(gl.weights[kl], gr.weights[k], 1e-12 * gr.weights[k]);
    }
    if (!f.periodic) EXPECT_LT(shift.norm(), 1e-12 * h);
  }
}

TEST(Mesh, FlipGeometricConsistency) {
  check_flip_consistency(structured_mesh(unit_square, {3, 3, 1}, Shape::triangle, 4),
                         build_connectivity(structured_mesh(unit_square, {3, 3, 1}, Shape::triangle, 4)));
  const auto q = structured_mesh(unit_square, {2, 3, 1}, Shape::quadrilateral, 3);
  check_flip_consistency(q, build_connectivity(q));
  const auto h = structured_mesh(unit_cube, {2, 2, 2}, Shape::hexahedron, 2);
  check_flip_consistency(h, build_connectivity(h));
}

// Hexes with scrambled local orientation exercise all rotation codes.
TEST(Mesh, FlipConsistencyUnderRotatedHexes) {
  auto mesh = structured_mesh(unit_cube, {2, 2, 1}, Shape::hexahedron, 2);
  ReferenceElement re(Shape::hexahedron, 2);
  const int q = 3;
  // Rotate element 1 by 90 degrees about z and element 3 by mirror + rotation about x.
  auto remap = [&](int e, auto map_index) {
    std::vector<int> old(mesh.element(e).begin(), mesh.element(e).end());
    for (int k = 0; k < q; ++k)
      for (int j = 0; j < q; ++j)
        for (int i = 0; i < q; ++i) {
          const auto [a, b, c] = map_index(i, j, k);
          mesh.connectivity[static_cast<std::size_t>(e * 27 + i + q * j + q * q * k)] =
              old[static_cast<std::size_t>(a + q * b + q * q * c)];
        }
  };
  remap(1, [&](int i, int j, int k) { return std::array<int, 3>{j, q - 1 - i, k}; });
  remap(3, [&](int i, int j, int k) { return std::array<int, 3>{i, k, q - 1 - j}; });
  mesh.boundary_faces.clear();
  const auto conn = build_connectivity(mesh);
  std::set<int> rotations;
  for (int fi : conn.interior) rotations.insert(conn.faces[static_cast<std::size_t>(fi)].rotation);
  EXPECT_GT(rotations.size(), 1u);
  for (int e = 0; e < mesh.element_count(); ++e) EXPECT_NO_THROW(physical_geometry(re, mesh.element_coords(e)));
  check_flip_consistency(mesh, conn);
}

TEST(Mesh, EdgeValence) {
  const auto q = structured_mesh(unit_square, {3, 3, 1}, Shape::quadrilateral, 2);
  const auto t = structured_mesh(unit_square, {3, 3, 1}, Shape::triangle, 2);
  for (const auto* m : {&q, &t}) {
    const auto conn = build_connectivity(*m);
    const auto edges = build_edges(*m, conn);
    int interior = 0, sharp = 0;
    for (const auto& e : edges.edges) {
      EXPECT_FALSE(e.elements.empty());
      if (e.kind == EdgeKind::interior) {
        ++interior;
        EXPECT_EQ(e.elements.size(), m->shape == Shape::quadrilateral ? 4u : 6u);
      }
      if (e.kind == EdgeKind::boundary_sharp) ++sharp;
    }
    EXPECT_EQ(interior, 4);
    EXPECT_EQ(sharp, 4);
  }
}

TEST(Mesh, RoundTrip) {
  for (auto shape : {Shape::triangle, Shape::quadrilateral, Shape::hexahedron}) {
    const Box box = shape == Shape::hexahedron ? unit_cube : Box{Vec3(-0.3, 0.1, 0), Vec3(1.7, 0.9, 0)};
    const auto m = structured_mesh(box, {2, 3, 2}, shape, 3);
    const auto m2 = parse_mesh(format_mesh(m));
    EXPECT_TRUE(m == m2);
  }
  const auto path = (std::filesystem::temp_directory_path() / "c0ipm_roundtrip.msh").string();
  const auto m = structured_mesh(unit_square, {2, 2, 1}, Shape::quadrilateral, 2);
  write_mesh(m, path);
  EXPECT_TRUE(read_mesh(path) == m);
  std::filesystem::remove(path);
}

TEST(Mesh, ParseErrors) {
  EXPECT_THROW(parse_mesh("DIM 2\nDEGREE 1\nSHAPE TRI\nNODES 1\n0 0 0\nELEMS 0\n"), ParseError);
  EXPECT_THROW(parse_mesh("DIM 2\nDEGREE 1\nSHAPE HEX\n"), ParseError);
  EXPECT_THROW(parse_mesh("DIM 2\nDEGREE 1\nSHAPE TRI\nNODES 3\n0 0\n1 0\n0 1\nELEMS 1\n0 1 3\n"), ParseError);
  EXPECT_THROW(parse_mesh("DIM 2\nDEGREE 1\nSHAPE TRI\nNODES 3\n0 0\n1 0\n0 1\nELEMS 1\n0 1\n"), ParseError);
  EXPECT_NO_THROW(parse_mesh("DIM 2\nDEGREE 1\nSHAPE TRI\nNODES 3\n0 0\n1 0\n0 1\nELEMS 1\n0 1 2\n"));
  try {
    parse_mesh("DIM 2\nDEGREE 1\nSHAPE TRI\nNODES 1\n0 0 0\nELEMS 0\n");
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 5"), std::string::npos);
  }
  EXPECT_THROW(read_mesh("/nonexistent/file.msh"), IoError);
}

TEST(Mesh, ElementSize) {
  ReferenceElement tri(Shape::triangle, 2), quad(Shape::quadrilateral, 2);
  const auto t = structured_mesh(unit_square, {4, 4, 1}, Shape::triangle, 2);
  const auto q = structured_mesh(unit_square, {4, 4, 1}, Shape::quadrilateral, 2);
  EXPECT_NEAR(element_size(t, tri, 3), 0.25, 1e-14);
  EXPECT_NEAR(element_size(q, quad, 3), 0.25, 1e-14);
}

BoundarySpec dirichlet_everywhere(int dim) {
  BoundarySpec s;
  for (int t = 0; t < 2 * dim; ++t) {
    s.d1.insert(t);
    s.n2.insert(t);
    s.phi_d.insert(t);
  }
  return s;
}

TEST(BoundarySpecTest, FullDirichlet) {
  const auto m = structured_mesh(unit_square, {2, 2, 1}, Shape::triangle, 2);
  ReferenceElement re(m.shape, m.degree);
  const auto tc = apply_boundary_spec(m, re, dirichlet_everywhere(2));
  for (int fi : tc.conn.boundary) EXPECT_TRUE(tc.d1[static_cast<std::size_t>(fi)]);
}

TEST(BoundarySpecTest, CantileverClassification) {
  const Box beam{Vec3(0, -0.5, 0), Vec3(20, 0.5, 0)};
  const auto m = structured_mesh(beam, {40, 2, 1}, Shape::triangle, 4);
  ReferenceElement re(m.shape, m.degree);
  BoundarySpec s;
  s.d1 = {0};
  s.n1 = {1, 2, 3};
  s.n2 = {0, 1, 2, 3};
  s.phi_d = {1};
  s.phi_n = {0, 2, 3};
  const auto tc = apply_boundary_spec(m, re, s);
  int d1 = 0, phid = 0;
  for (int fi : tc.conn.boundary) {
    const auto& f = tc.conn.faces[static_cast<std::size_t>(fi)];
    const Vec3 c = m.nodes[static_cast<std::size_t>(m.element(f.left)[static_cast<std::size_t>(re.face(f.left_face).nodes[0])])];
    if (tc.d1[static_cast<std::size_t>(fi)]) {
      ++d1;
      EXPECT_NEAR(c.x(), 0.0, 1e-14);
    }
    if (tc.phi_d[static_cast<std::size_t>(fi)]) {
      ++phid;
      EXPECT_NEAR(c.x(), 20.0, 1e-14);
    }
  }
  EXPECT_EQ(d1, 2);
  EXPECT_EQ(phid, 2);
  // The loaded corner (L, a/2) is a Neumann sharp vertex.
  bool found = false;
  for (const auto& e : tc.edges.edges) {
    const Vec3& x = m.nodes[static_cast<std::size_t>(e.vertices[0])];
    if ((x - Vec3(20, 0.5, 0)).norm() < 1e-12) {
      found = true;
      EXPECT_EQ(e.kind, EdgeKind::neumann_sharp);
    }
    if ((x - Vec3(0, 0.5, 0)).norm() < 1e-12) EXPECT_EQ(e.kind, EdgeKind::boundary_sharp);
  }
  EXPECT_TRUE(found);
}

TEST(BoundarySpecTest, UnclassifiedTagRejected) {
  const auto m = structured_mesh(unit_square, {2, 2, 1}, Shape::quadrilateral, 1);
  ReferenceElement re(m.shape, m.degree);
  auto s = dirichlet_everywhere(2);
  s.d1.erase(3);
  EXPECT_THROW(apply_boundary_spec(m, re, s), SpecificationError);
  s = dirichlet_everywhere(2);
  s.n1.insert(3);
  EXPECT_THROW(apply_boundary_spec(m, re, s), SpecificationError);
}

TEST(BoundarySpecTest, PeriodicSquare) {
  for (auto shape : {Shape::triangle, Shape::quadrilateral}) {
    const auto m = structured_mesh(unit_square, {4, 3, 1}, shape, 3);
    ReferenceElement re(m.shape, m.degree);
    auto s = dirichlet_everywhere(2);
    s.d1.erase(0);
    s.d1.erase(1);
    s.periodic.push_back({0, 1, Vec3(1, 0, 0)});
    const auto plain = build_connectivity(m);
    const auto tc = apply_boundary_spec(m, re, s);
    EXPECT_EQ(tc.conn.interior.size(), plain.interior.size() + 3);
    EXPECT_EQ(tc.conn.boundary.size(), plain.boundary.size() - 6);
    EXPECT_EQ(tc.periodic.faces.size(), 3u);
    const int fpe = face_count(shape);
    EXPECT_EQ(fpe * m.element_count(), static_cast<int>(2 * tc.conn.interior.size() + tc.conn.boundary.size()));
    // Slave nodes translate onto their masters.
    int slaves = 0;
    for (int i = 0; i < m.node_count(); ++i) {
      const int j = tc.periodic.node_master[static_cast<std::size_t>(i)];
      if (j == i) continue;
      ++slaves;
      EXPECT_LT((m.nodes[static_cast<std::size_t>(i)] + Vec3(1, 0, 0) - m.nodes[static_cast<std::size_t>(j)]).norm(), 1e-10);
    }
    EXPECT_EQ(slaves, 3 * 3 + 1);
    check_flip_consistency(m, tc.conn);
  }
}

TEST(BoundarySpecTest, PeriodicMismatchRejected) {
  const auto m = structured_mesh(unit_square, {2, 2, 1}, Shape::quadrilateral, 2);
  ReferenceElement re(m.shape, m.degree);
  auto s = dirichlet_everywhere(2);
  s.periodic.push_back({0, 1, Vec3(0.9, 0, 0)});
  EXPECT_THROW(apply_boundary_spec(m, re, s), GeometryError);
}

}  // namespace
}  // namespace c0ipm
