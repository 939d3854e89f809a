#include "c0ipm/mesh.hpp"

#include "c0ipm/errors.hpp"
#include "c0ipm/refelem.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace c0ipm {

std::vector<Vec3> Mesh::element_coords(int e) const {
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(nodes_per_element));
  for (int id : element(e)) out.push_back(nodes[static_cast<std::size_t>(id)]);
  return out;
}

namespace {

using Key3 = std::array<long long, 3>;

std::size_t sz(int i) { return static_cast<std::size_t>(i); }

}  // namespace

Mesh structured_mesh(const Box& box, std::array<int, 3> divisions, Shape shape, int degree, TriangleSplit split) {
  const int dim = shape_dim(shape);
  for (int d = 0; d < dim; ++d) {
    if (divisions[sz(d)] < 1) throw ParameterError("structured_mesh: divisions must be >= 1");
    if (!(box.hi[d] > box.lo[d])) throw ParameterError("structured_mesh: empty box");
  }
  ReferenceElement re(shape, degree);
  Mesh mesh;
  mesh.dim = dim;
  mesh.degree = degree;
  mesh.shape = shape;
  mesh.nodes_per_element = re.node_count();

  Vec3 h = Vec3::Zero();
  for (int d = 0; d < dim; ++d) h[d] = (box.hi[d] - box.lo[d]) / divisions[sz(d)];
  const double quantum = 1e-9;
  std::map<Key3, int> lookup;
  // Cell-local coordinates (in units of cells) of an element node, quantized for deduplication.
  auto add_node = [&](const Vec3& cell_units) {
    Key3 key{0, 0, 0};
    for (int d = 0; d < dim; ++d) key[sz(d)] = std::llround(cell_units[d] / quantum);
    auto [it, inserted] = lookup.try_emplace(key, mesh.node_count());
    if (inserted) {
      Vec3 x = Vec3::Zero();
      for (int d = 0; d < dim; ++d) {
        const double t = cell_units[d] / divisions[sz(d)];
        x[d] = t >= 1.0 ? box.hi[d] : box.lo[d] + cell_units[d] * h[d];
      }
      mesh.nodes.push_back(x);
    }
    return it->second;
  };

  const int nx = divisions[0], ny = divisions[1], nz = dim == 3 ? divisions[2] : 1;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const Vec3 origin(i, j, k);
        if (shape == Shape::triangle && split == TriangleSplit::crossed) {
          // Four triangles around the cell center, each counter-clockwise.
          static const std::array<Vec3, 4> corner = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0)};
          const Vec3 center(0.5, 0.5, 0.0);
          for (int t = 0; t < 4; ++t) {
            const Vec3& p0 = corner[sz(t)];
            const Vec3& p1 = corner[sz((t + 1) % 4)];
            for (const auto& xi : re.nodes())
              mesh.connectivity.push_back(add_node(origin + p0 + xi.x() * (p1 - p0) + xi.y() * (center - p0)));
          }
        } else if (shape == Shape::triangle) {
          for (int half = 0; half < 2; ++half) {
            for (const auto& xi : re.nodes()) {
              // Lower-right triangle (a, b, c) and upper-left triangle (a, c, d).
              const Vec3 local = half == 0 ? Vec3(xi.x() + xi.y(), xi.y(), 0.0)
                                           : Vec3(xi.x(), xi.x() + xi.y(), 0.0);
              mesh.connectivity.push_back(add_node(origin + local));
            }
          }
        } else {
          for (const auto& xi : re.nodes()) mesh.connectivity.push_back(add_node(origin + xi));
        }
      }

  // Tag faces lying on the box boundary.
  const double tol = 1e-12;
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto elem = mesh.element(e);
    for (int f = 0; f < face_count(shape); ++f) {
      for (int axis = 0; axis < dim; ++axis)
        for (int side = 0; side < 2; ++side) {
          const double plane = side == 0 ? box.lo[axis] : box.hi[axis];
          bool on = true;
          for (int c : re.face(f).corners) {
            const Vec3& x = mesh.nodes[sz(elem[sz(re.corner_nodes()[sz(c)])])];
            if (std::abs(x[axis] - plane) > tol * (1.0 + std::abs(plane))) on = false;
          }
          if (on) mesh.boundary_faces.push_back({e, f, 2 * axis + side});
        }
    }
  }
  return mesh;
}

void validate_mesh(const Mesh& mesh) {
  if (mesh.dim != shape_dim(mesh.shape)) throw ParseError("mesh: DIM does not match SHAPE");
  if (mesh.degree < 1) throw ParseError("mesh: DEGREE must be >= 1");
  const int np = mesh.shape == Shape::triangle ? (mesh.degree + 1) * (mesh.degree + 2) / 2
                                                : static_cast<int>(std::pow(mesh.degree + 1, mesh.dim));
  if (mesh.nodes_per_element != np) throw ParseError("mesh: nodes per element inconsistent with DEGREE/SHAPE");
  if (mesh.connectivity.size() % sz(np) != 0) throw ParseError("mesh: truncated connectivity");
  for (int id : mesh.connectivity)
    if (id < 0 || id >= mesh.node_count()) throw ParseError("mesh: node id out of range");
  for (const auto& bf : mesh.boundary_faces) {
    if (bf.element < 0 || bf.element >= mesh.element_count()) throw ParseError("mesh: boundary face element out of range");
    if (bf.local_face < 0 || bf.local_face >= face_count(mesh.shape))
      throw ParseError("mesh: boundary local face out of range");
  }
}

namespace {

struct LineReader {
  std::istringstream in;
  int line_no = 0;
  std::vector<std::string> tokens;

  explicit LineReader(const std::string& text) : in(text) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("mesh line " + std::to_string(line_no) + ": " + what);
  }

  // Next non-empty, non-comment line split into tokens.
  bool next() {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      std::istringstream ls(line);
      tokens.clear();
      std::string tok;
      while (ls >> tok) tokens.push_back(tok);
      if (!tokens.empty()) return true;
    }
    return false;
  }

  void require(const char* what) {
    if (!next()) fail(std::string("unexpected end of file, expected ") + what);
  }

  long long integer(std::size_t i) const {
    long long v = 0;
    const auto& t = tokens[i];
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) fail("expected integer, got '" + t + "'");
    return v;
  }

  double real(std::size_t i) const {
    double v = 0.0;
    const auto& t = tokens[i];
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) fail("expected number, got '" + t + "'");
    return v;
  }

  long long header(const char* name) {
    require(name);
    if (tokens.size() != 2 || tokens[0] != name) fail(std::string("expected '") + name + " <value>'");
    return integer(1);
  }
};

}  // namespace

Mesh parse_mesh(const std::string& text) {
  LineReader r(text);
  Mesh mesh;
  const long long dim = r.header("DIM");
  if (dim != 2 && dim != 3) r.fail("DIM must be 2 or 3");
  mesh.dim = static_cast<int>(dim);
  const long long degree = r.header("DEGREE");
  if (degree < 1) r.fail("DEGREE must be >= 1");
  mesh.degree = static_cast<int>(degree);
  r.require("SHAPE");
  if (r.tokens.size() != 2 || r.tokens[0] != "SHAPE") r.fail("expected 'SHAPE <TRI|QUAD|HEX>'");
  if (r.tokens[1] == "TRI") mesh.shape = Shape::triangle;
  else if (r.tokens[1] == "QUAD") mesh.shape = Shape::quadrilateral;
  else if (r.tokens[1] == "HEX") mesh.shape = Shape::hexahedron;
  else r.fail("unknown shape '" + r.tokens[1] + "'");
  if (shape_dim(mesh.shape) != mesh.dim) r.fail("SHAPE inconsistent with DIM");
  mesh.nodes_per_element = mesh.shape == Shape::triangle
                               ? (mesh.degree + 1) * (mesh.degree + 2) / 2
                               : static_cast<int>(std::pow(mesh.degree + 1, mesh.dim));

  const long long nn = r.header("NODES");
  if (nn < 0) r.fail("negative node count");
  for (long long i = 0; i < nn; ++i) {
    r.require("node coordinates");
    if (static_cast<long long>(r.tokens.size()) != dim)
      r.fail("expected " + std::to_string(dim) + " coordinates, got " + std::to_string(r.tokens.size()));
    Vec3 x = Vec3::Zero();
    for (int d = 0; d < mesh.dim; ++d) x[d] = r.real(sz(d));
    mesh.nodes.push_back(x);
  }
  const long long ne = r.header("ELEMS");
  if (ne < 0) r.fail("negative element count");
  for (long long e = 0; e < ne; ++e) {
    r.require("element connectivity");
    if (static_cast<int>(r.tokens.size()) != mesh.nodes_per_element)
      r.fail("expected " + std::to_string(mesh.nodes_per_element) + " node ids, got " +
             std::to_string(r.tokens.size()));
    for (std::size_t i = 0; i < r.tokens.size(); ++i) {
      const long long id = r.integer(i);
      if (id < 0 || id >= nn) r.fail("node id " + std::to_string(id) + " out of range");
      mesh.connectivity.push_back(static_cast<int>(id));
    }
  }
  if (r.next()) {
    if (r.tokens.size() != 2 || r.tokens[0] != "BFACES") r.fail("expected 'BFACES <k>'");
    const long long nb = r.integer(1);
    for (long long b = 0; b < nb; ++b) {
      r.require("boundary face");
      if (r.tokens.size() != 3) r.fail("expected 'elem localface tag'");
      const long long e = r.integer(0), f = r.integer(1), tag = r.integer(2);
      if (e < 0 || e >= ne) r.fail("element id out of range");
      if (f < 0 || f >= face_count(mesh.shape)) r.fail("local face out of range");
      mesh.boundary_faces.push_back({static_cast<int>(e), static_cast<int>(f), static_cast<int>(tag)});
    }
    if (r.next()) r.fail("trailing content");
  }
  return mesh;
}

Mesh read_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_mesh(ss.str());
}

std::string format_mesh(const Mesh& mesh) {
  std::ostringstream out;
  out << "DIM " << mesh.dim << "\nDEGREE " << mesh.degree << "\nSHAPE " << shape_name(mesh.shape) << "\n";
  out << "NODES " << mesh.node_count() << "\n";
  char buf[64];
  for (const auto& x : mesh.nodes) {
    for (int d = 0; d < mesh.dim; ++d) {
      std::snprintf(buf, sizeof buf, "%.17g", x[d]);
      out << (d ? " " : "") << buf;
    }
    out << "\n";
  }
  out << "ELEMS " << mesh.element_count() << "\n";
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto elem = mesh.element(e);
    for (std::size_t i = 0; i < elem.size(); ++i) out << (i ? " " : "") << elem[i];
    out << "\n";
  }
  if (!mesh.boundary_faces.empty()) {
    out << "BFACES " << mesh.boundary_faces.size() << "\n";
    for (const auto& bf : mesh.boundary_faces) out << bf.element << " " << bf.local_face << " " << bf.tag << "\n";
  }
  return out.str();
}

void write_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write mesh file '" + path + "'");
  out << format_mesh(mesh);
  if (!out) throw IoError("write failed for '" + path + "'");
}

double element_size(const Mesh& mesh, const ReferenceElement& re, int e) {
  const auto g = physical_geometry(re, mesh.element_coords(e));
  double vol = 0.0;
  for (double w : g.weights) vol += w;
  const int d = mesh.dim;
  if (mesh.shape == Shape::triangle) vol *= 2.0;
  return std::pow(vol, 1.0 / d);
}

FaceConnectivity build_connectivity(const Mesh& mesh, const std::vector<int>* node_map) {
  ReferenceElement re(mesh.shape, mesh.degree);
  auto mapped = [&](int id) { return node_map ? (*node_map)[sz(id)] : id; };

  std::map<std::pair<int, int>, int> tags;
  for (const auto& bf : mesh.boundary_faces) tags[{bf.element, bf.local_face}] = bf.tag;

  FaceConnectivity conn;
  std::map<std::array<int, 4>, int> lookup;
  std::vector<std::vector<int>> face_corners;  // mapped corner ids of the left element, cyclic order
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto elem = mesh.element(e);
    for (int f = 0; f < face_count(mesh.shape); ++f) {
      // Only faces lying entirely on slave nodes are keyed by their masters, so that
      // other faces of a coarse periodic mesh cannot alias after identification.
      std::vector<int> corners;
      bool all_slave = node_map != nullptr;
      for (int c : re.face(f).corners) {
        const int id = elem[sz(re.corner_nodes()[sz(c)])];
        corners.push_back(id);
        all_slave = all_slave && mapped(id) != id;
      }
      if (all_slave)
        for (int& c : corners) c = mapped(c);
      std::array<int, 4> key{-1, -1, -1, -1};
      std::copy(corners.begin(), corners.end(), key.begin());
      std::sort(key.begin(), key.begin() + static_cast<std::ptrdiff_t>(corners.size()));
      auto [it, inserted] = lookup.try_emplace(key, static_cast<int>(conn.faces.size()));
      if (inserted) {
        Face face;
        face.left = e;
        face.left_face = f;
        conn.faces.push_back(face);
        face_corners.push_back(corners);
        continue;
      }
      Face& face = conn.faces[sz(it->second)];
      if (face.right >= 0) {
        throw ConnectivityError("non-manifold mesh: face shared by more than two elements (element " +
                                std::to_string(e) + ")");
      }
      if (face.left == e) throw ConnectivityError("face shared by element " + std::to_string(e) + " with itself");
      face.right = e;
      face.right_face = f;
      const auto& lc = face_corners[sz(it->second)];
      if (corners.size() == 2) {
        face.rotation = corners[0] == lc[0] ? 0 : 1;
      } else {
        const int k = static_cast<int>(std::find(corners.begin(), corners.end(), lc[0]) - corners.begin());
        const int parity = corners[sz((k + 1) % 4)] == lc[1] ? 0 : 1;
        face.rotation = 2 * k + parity;
      }
    }
  }
  for (int i = 0; i < static_cast<int>(conn.faces.size()); ++i) {
    Face& face = conn.faces[sz(i)];
    if (face.interior()) {
      conn.interior.push_back(i);
    } else {
      auto it = tags.find({face.left, face.left_face});
      face.tag = it == tags.end() ? -1 : it->second;
      conn.boundary.push_back(i);
    }
  }
  return conn;
}

namespace {

// Unit normal of a straight face through its corner nodes (orientation arbitrary).
Vec3 corner_normal(const Mesh& mesh, const ReferenceElement& re, const Face& face) {
  const auto elem = mesh.element(face.left);
  std::vector<Vec3> c;
  for (int k : re.face(face.left_face).corners) c.push_back(mesh.nodes[sz(elem[sz(re.corner_nodes()[sz(k)])])]);
  if (c.size() == 2) {
    const Vec3 t = c[1] - c[0];
    return Vec3(t.y(), -t.x(), 0.0).normalized();
  }
  return (c[2] - c[0]).cross(c[3] - c[1]).normalized();
}

}  // namespace

EdgeSet build_edges(const Mesh& mesh, const FaceConnectivity& conn) {
  ReferenceElement re(mesh.shape, mesh.degree);
  EdgeSet set;
  std::map<std::array<int, 2>, int> lookup;
  auto edge_id = [&](int a, int b) {
    std::array<int, 2> key{std::min(a, b), std::max(a, b)};
    if (b < 0) key = {a, -1};
    auto [it, inserted] = lookup.try_emplace(key, static_cast<int>(set.edges.size()));
    if (inserted) {
      MeshEdge edge;
      edge.vertices = key;
      set.edges.push_back(edge);
    }
    return it->second;
  };
  static constexpr int hex_edges[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                           {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto elem = mesh.element(e);
    const auto& cn = re.corner_nodes();
    if (mesh.dim == 2) {
      for (int c : cn) set.edges[sz(edge_id(elem[sz(c)], -1))].elements.push_back(e);
    } else {
      for (const auto& he : hex_edges)
        set.edges[sz(edge_id(elem[sz(cn[sz(he[0])])], elem[sz(cn[sz(he[1])])]))].elements.push_back(e);
    }
  }
  for (int fi : conn.boundary) {
    const Face& face = conn.faces[sz(fi)];
    const auto elem = mesh.element(face.left);
    std::vector<int> corners;
    for (int k : re.face(face.left_face).corners) corners.push_back(elem[sz(re.corner_nodes()[sz(k)])]);
    if (mesh.dim == 2) {
      for (int v : corners) set.edges[sz(lookup.at({v, -1}))].boundary_faces.push_back(fi);
    } else {
      for (std::size_t m = 0; m < 4; ++m) {
        const int a = corners[m], b = corners[(m + 1) % 4];
        set.edges[sz(lookup.at({std::min(a, b), std::max(a, b)}))].boundary_faces.push_back(fi);
      }
    }
  }
  for (auto& edge : set.edges) {
    if (edge.boundary_faces.empty()) continue;
    edge.kind = EdgeKind::boundary_smooth;
    const Vec3 n0 = corner_normal(mesh, re, conn.faces[sz(edge.boundary_faces[0])]);
    for (int fi : edge.boundary_faces) {
      if (std::abs(corner_normal(mesh, re, conn.faces[sz(fi)]).dot(n0)) < 1.0 - 1e-9) edge.kind = EdgeKind::boundary_sharp;
    }
  }
  return set;
}

std::vector<double> face_sizes(const Mesh& mesh, const ReferenceElement& re, const FaceConnectivity& conn) {
  std::vector<double> elem_h(sz(mesh.element_count()));
  for (int e = 0; e < mesh.element_count(); ++e) elem_h[sz(e)] = element_size(mesh, re, e);
  std::vector<double> out(conn.faces.size());
  for (std::size_t i = 0; i < conn.faces.size(); ++i) {
    const Face& f = conn.faces[i];
    out[i] = f.interior() ? std::min(elem_h[sz(f.left)], elem_h[sz(f.right)]) : elem_h[sz(f.left)];
  }
  return out;
}

TaggedConnectivity apply_boundary_spec(const Mesh& mesh, const ReferenceElement& re, const BoundarySpec& spec) {
  TaggedConnectivity out;
  std::set<int> periodic_tags;
  for (const auto& pp : spec.periodic) {
    periodic_tags.insert(pp.slave_tag);
    periodic_tags.insert(pp.master_tag);
  }

  // Periodic node identification.
  auto& master = out.periodic.node_master;
  master.resize(sz(mesh.node_count()));
  for (int i = 0; i < mesh.node_count(); ++i) master[sz(i)] = i;
  double hmin = std::numeric_limits<double>::max();
  for (int e = 0; e < mesh.element_count(); ++e) hmin = std::min(hmin, element_size(mesh, re, e));
  const double tol = 1e-9 * hmin;
  for (const auto& pp : spec.periodic) {
    std::set<int> slave_nodes, master_nodes;
    for (const auto& bf : mesh.boundary_faces) {
      const auto elem = mesh.element(bf.element);
      if (bf.tag == pp.slave_tag)
        for (int a : re.face(bf.local_face).nodes) slave_nodes.insert(elem[sz(a)]);
      if (bf.tag == pp.master_tag)
        for (int a : re.face(bf.local_face).nodes) master_nodes.insert(elem[sz(a)]);
    }
    if (slave_nodes.empty() || slave_nodes.size() != master_nodes.size()) {
      throw GeometryError("periodic pair " + std::to_string(pp.slave_tag) + "->" + std::to_string(pp.master_tag) +
                          ": node counts differ");
    }
    std::vector<int> masters(master_nodes.begin(), master_nodes.end());
    for (int s : slave_nodes) {
      const Vec3 target = mesh.nodes[sz(s)] + pp.translation;
      int found = -1;
      for (int m : masters)
        if ((mesh.nodes[sz(m)] - target).norm() < tol) {
          found = m;
          break;
        }
      if (found < 0) throw GeometryError("periodic pair: no master node matches slave node " + std::to_string(s));
      master[sz(s)] = found;
    }
  }
  // Resolve chains (corners shared by two periodic directions).
  for (int i = 0; i < mesh.node_count(); ++i) {
    int m = master[sz(i)];
    for (int guard = 0; master[sz(m)] != m; ++guard) {
      if (guard > 8) throw GeometryError("periodic identification has a cycle");
      m = master[sz(m)];
    }
    master[sz(i)] = m;
  }

  out.conn = spec.periodic.empty() ? build_connectivity(mesh) : build_connectivity(mesh, &master);

  std::map<std::pair<int, int>, int> tags;
  for (const auto& bf : mesh.boundary_faces) tags[{bf.element, bf.local_face}] = bf.tag;
  for (int fi : out.conn.interior) {
    Face& face = out.conn.faces[sz(fi)];
    auto lt = tags.find({face.left, face.left_face});
    auto rt = tags.find({face.right, face.right_face});
    if (lt == tags.end() || rt == tags.end()) continue;
    if (!periodic_tags.contains(lt->second) || !periodic_tags.contains(rt->second)) continue;
    face.periodic = true;
    out.periodic.faces.push_back(fi);
    // Congruence: matched face points differ by one constant translation.
    const auto gl = physical_geometry(re, mesh.element_coords(face.left), face.left_face);
    const auto gr = physical_geometry(re, mesh.element_coords(face.right), face.right_face);
    const auto perm = flip_permutation(mesh.shape, static_cast<int>(gl.points.size()), face.rotation);
    const Vec3 shift = gl.points[sz(perm[0])] - gr.points[0];
    for (std::size_t k = 0; k < gr.points.size(); ++k) {
      if ((gl.points[sz(perm[k])] - gr.points[k] - shift).norm() > 1e-10 * hmin + tol) {
        throw GeometryError("periodic faces are not congruent under a translation");
      }
    }
  }

  const std::size_t nf = out.conn.faces.size();
  out.d1.assign(nf, 0);
  out.d2.assign(nf, 0);
  out.phi_d.assign(nf, 0);
  out.electrode.assign(nf, -1);
  auto exactly_one = [](const std::set<int>& a, const std::set<int>& b, int tag) {
    return static_cast<int>(a.contains(tag)) + static_cast<int>(b.contains(tag)) == 1;
  };
  for (int fi : out.conn.boundary) {
    const Face& face = out.conn.faces[sz(fi)];
    if (face.tag < 0) {
      throw SpecificationError("boundary face (element " + std::to_string(face.left) + ", face " +
                               std::to_string(face.left_face) + ") has no tag");
    }
    if (periodic_tags.contains(face.tag)) {
      throw GeometryError("periodic face with tag " + std::to_string(face.tag) + " has no matching partner");
    }
    if (!exactly_one(spec.d1, spec.n1, face.tag) || !exactly_one(spec.d2, spec.n2, face.tag) ||
        !exactly_one(spec.phi_d, spec.phi_n, face.tag)) {
      throw SpecificationError("boundary tag " + std::to_string(face.tag) +
                               " is not classified exactly once per condition family");
    }
    out.d1[sz(fi)] = spec.d1.contains(face.tag);
    out.d2[sz(fi)] = spec.d2.contains(face.tag);
    out.phi_d[sz(fi)] = spec.phi_d.contains(face.tag);
    for (std::size_t g = 0; g < spec.electrodes.size(); ++g)
      if (spec.electrodes[g].contains(face.tag)) out.electrode[sz(fi)] = static_cast<int>(g);
  }

  out.edges = build_edges(mesh, out.conn);
  for (auto& edge : out.edges.edges) {
    if (edge.kind != EdgeKind::boundary_sharp) continue;
    bool all_neumann = true;
    for (int fi : edge.boundary_faces) all_neumann = all_neumann && !out.d1[sz(fi)];
    if (all_neumann) edge.kind = EdgeKind::neumann_sharp;
  }
  return out;
}

}  // namespace c0ipm
