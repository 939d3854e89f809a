#include "c0ipm/errors.hpp"
#include "c0ipm/refelem.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace c0ipm {
namespace {

struct Case {
  Shape shape;
  int p;
};

std::vector<Case> all_cases() {
  std::vector<Case> out;
  for (Shape s : {Shape::triangle, Shape::quadrilateral, Shape::hexahedron})
    for (int p = 1; p <= 4; ++p) out.push_back({s, p});
  return out;
}

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

Vec3 random_point(Shape s, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Vec3 x(u(rng), u(rng), s == Shape::hexahedron ? u(rng) : 0.0);
  if (s == Shape::triangle && x.x() + x.y() > 0.95) {
    x.x() = 0.5 * (1 - x.x());
    x.y() = 0.4 * (1 - x.y());
  }
  return x;
}

TEST(RefElem, NodeCounts) {
  EXPECT_EQ(ReferenceElement(Shape::triangle, 4).node_count(), 15);
  EXPECT_EQ(ReferenceElement(Shape::hexahedron, 2).node_count(), 27);
  EXPECT_EQ(ReferenceElement(Shape::quadrilateral, 3).node_count(), 16);
}

TEST(RefElem, UnsupportedDegree) {
  EXPECT_THROW(ReferenceElement(Shape::triangle, 0), CapabilityError);
  EXPECT_THROW(ReferenceElement(Shape::hexahedron, 9), CapabilityError);
}

TEST(RefElem, PartitionOfUnityAtAllTabulatedPoints) {
  for (const auto& c : all_cases()) {
    ReferenceElement re(c.shape, c.p);
    auto check = [&](const Tabulation& tab) {
      for (int q = 0; q < tab.points(); ++q) {
        EXPECT_NEAR(tab.values.row(q).sum(), 1.0, 1e-12);
        EXPECT_LT(tab.gradients[static_cast<std::size_t>(q)].rowwise().sum().cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT(tab.hessians[static_cast<std::size_t>(q)].rowwise().sum().cwiseAbs().maxCoeff(), 1e-8);
      }
    };
    check(re.volume_tab());
    for (const auto& f : re.faces()) check(f.tab);
  }
}

TEST(RefElem, NodalBasisIsIdentityAtNodes) {
  for (const auto& c : all_cases()) {
    ReferenceElement re(c.shape, c.p);
    const auto tab = re.tabulate(re.nodes(), 0);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(re.node_count(), re.node_count());
    EXPECT_LT((tab.values - I).cwiseAbs().maxCoeff(), 1e-12) << shape_name(c.shape) << c.p;
  }
}

TEST(RefElem, TriangleEdgeNodesAreLobatto) {
  for (int p = 2; p <= 5; ++p) {
    ReferenceElement re(Shape::triangle, p);
    const auto gll = gauss_lobatto_points(p + 1);
    std::vector<double> edge;
    for (const auto& x : re.nodes())
      if (std::abs(x.y()) < 1e-14) edge.push_back(x.x());
    std::sort(edge.begin(), edge.end());
    ASSERT_EQ(edge.size(), gll.size());
    for (std::size_t i = 0; i < gll.size(); ++i) EXPECT_NEAR(edge[i], gll[i], 1e-13);
  }
}

TEST(RefElem, QuadraticEdgeFunctionHasConstantSecondDerivative) {
  ReferenceElement re(Shape::quadrilateral, 2);
  // Node 1 is the midpoint of the bottom edge: N = L1(x) L0(y) with L1 quadratic in x.
  std::vector<Vec3> pts = {Vec3(0.0, 0.0, 0), Vec3(0.3, 0.0, 0), Vec3(0.9, 0.0, 0)};
  const auto tab = re.tabulate(pts, 2);
  const double h0 = tab.hessians[0](0, 1);
  for (int q = 1; q < 3; ++q) EXPECT_NEAR(tab.hessians[static_cast<std::size_t>(q)](0, 1), h0, 1e-12);
  EXPECT_NEAR(h0, -8.0, 1e-12);
}

TEST(RefElem, InterpolationIsExactForPolynomialsOfDegreeP) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  for (const auto& c : all_cases()) {
    ReferenceElement re(c.shape, c.p);
    const int d = re.dim();
    // Random polynomial of total degree <= p.
    std::vector<std::array<int, 3>> exps;
    for (int a = 0; a <= c.p; ++a)
      for (int b = 0; a + b <= c.p; ++b)
        for (int e = 0; a + b + e <= c.p; ++e)
          if (d == 3 || e == 0) exps.push_back({a, b, e});
    std::vector<double> w;
    for (std::size_t i = 0; i < exps.size(); ++i) w.push_back(coef(rng));
    auto poly = [&](const Vec3& x) {
      double v = 0.0;
      for (std::size_t i = 0; i < exps.size(); ++i)
        v += w[i] * std::pow(x.x(), exps[i][0]) * std::pow(x.y(), exps[i][1]) * std::pow(x.z(), exps[i][2]);
      return v;
    };
    Eigen::VectorXd nodal(re.node_count());
    for (int a = 0; a < re.node_count(); ++a) nodal[a] = poly(re.nodes()[static_cast<std::size_t>(a)]);
    std::vector<Vec3> pts;
    for (int k = 0; k < 10; ++k) pts.push_back(random_point(c.shape, rng));
    const auto tab = re.tabulate(pts, 0);
    for (int k = 0; k < 10; ++k) {
      const double exact = poly(pts[static_cast<std::size_t>(k)]);
      EXPECT_NEAR(tab.values.row(k).dot(nodal), exact, 1e-12 * (1 + std::abs(exact)));
    }
  }
}

TEST(RefElem, QuadratureExactness) {
  for (int degree = 0; degree <= 9; ++degree) {
    const auto tri = volume_quadrature(Shape::triangle, degree);
    const auto quad = volume_quadrature(Shape::quadrilateral, degree);
    const auto hex = volume_quadrature(Shape::hexahedron, degree);
    for (double w : tri.weights) EXPECT_GT(w, 0.0);
    for (int a = 0; a <= degree; ++a)
      for (int b = 0; a + b <= degree; ++b) {
        double s = 0.0;
        for (std::size_t q = 0; q < tri.size(); ++q)
          s += tri.weights[q] * std::pow(tri.points[q].x(), a) * std::pow(tri.points[q].y(), b);
        const double exact = factorial(a) * factorial(b) / factorial(a + b + 2);
        EXPECT_NEAR(s, exact, 1e-13 * exact) << a << " " << b;
      }
    for (int a = 0; a <= degree; ++a)
      for (int b = 0; b <= degree; ++b) {
        double s = 0.0;
        for (std::size_t q = 0; q < quad.size(); ++q)
          s += quad.weights[q] * std::pow(quad.points[q].x(), a) * std::pow(quad.points[q].y(), b);
        const double exact = 1.0 / ((a + 1.0) * (b + 1.0));
        EXPECT_NEAR(s, exact, 1e-13 * exact);
        double h = 0.0;
        for (std::size_t q = 0; q < hex.size(); ++q)
          h += hex.weights[q] * std::pow(hex.points[q].x(), a) * std::pow(hex.points[q].z(), b);
        EXPECT_NEAR(h, exact, 1e-13 * exact);
      }
  }
}

TEST(RefElem, FaceQuadratureDegree) {
  for (int p = 1; p <= 4; ++p) {
    ReferenceElement re(Shape::quadrilateral, p);
    const auto& rule = re.face_rule();
    for (int a = 0; a <= 2 * p + 1; ++a) {
      double s = 0.0;
      for (std::size_t q = 0; q < rule.size(); ++q) s += rule.weights[q] * std::pow(rule.points[q].x(), a);
      EXPECT_NEAR(s, 1.0 / (a + 1.0), 1e-14);
    }
  }
}

TEST(RefElem, HessianMatchesFiniteDifferencesOfGradient) {
  std::mt19937 rng(2);
  const double h = 1e-5;
  for (const auto& c : all_cases()) {
    ReferenceElement re(c.shape, c.p);
    const int d = re.dim();
    const Vec3 x = random_point(c.shape, rng);
    const auto tab = re.tabulate({x}, 2);
    for (int b = 0; b < d; ++b) {
      Vec3 e = Vec3::Zero();
      e[b] = h;
      const auto tp = re.tabulate({x + e}, 1);
      const auto tm = re.tabulate({x - e}, 1);
      const Eigen::MatrixXd fd = (tp.gradients[0] - tm.gradients[0]) / (2 * h);
      for (int a = 0; a < d; ++a)
        for (int n = 0; n < re.node_count(); ++n) {
          const double exact = tab.hessians[0](a * d + b, n);
          EXPECT_NEAR(fd(a, n), exact, 1e-6 * std::max(1.0, std::abs(exact)));
        }
    }
  }
}

TEST(RefElem, OutsidePointRejected) {
  ReferenceElement re(Shape::triangle, 2);
  EXPECT_THROW(re.tabulate({Vec3(0.7, 0.7, 0)}, 0), DomainError);
  EXPECT_NO_THROW(re.tabulate({Vec3(0.5, 0.5 + 1e-12, 0)}, 0));
}

TEST(RefElem, FaceNodeLists) {
  ReferenceElement tri(Shape::triangle, 4);
  for (const auto& f : tri.faces()) EXPECT_EQ(f.nodes.size(), 5u);
  ReferenceElement hex(Shape::hexahedron, 3);
  for (const auto& f : hex.faces()) EXPECT_EQ(f.nodes.size(), 16u);
}

TEST(Flip, SegmentReversal) {
  EXPECT_EQ(flip_permutation(Shape::triangle, 5, 1), (std::vector<int>{4, 3, 2, 1, 0}));
  EXPECT_EQ(flip_permutation(Shape::quadrilateral, 4, 0), (std::vector<int>{0, 1, 2, 3}));
  EXPECT_THROW(flip_permutation(Shape::triangle, 5, 2), ConnectivityError);
}

TEST(Flip, SquareRotationsAreBijectiveAndInvertible) {
  for (int n : {1, 2, 3, 5}) {
    for (int rot = 0; rot < 8; ++rot) {
      const auto perm = flip_permutation(Shape::hexahedron, n * n, rot);
      std::vector<int> inv(perm.size(), -1);
      for (std::size_t k = 0; k < perm.size(); ++k) inv[static_cast<std::size_t>(perm[k])] = static_cast<int>(k);
      for (std::size_t k = 0; k < perm.size(); ++k) {
        ASSERT_GE(inv[k], 0);
        EXPECT_EQ(perm[static_cast<std::size_t>(inv[k])], static_cast<int>(k));
      }
    }
    const auto id = flip_permutation(Shape::hexahedron, n * n, 0);
    for (std::size_t k = 0; k < id.size(); ++k) EXPECT_EQ(id[k], static_cast<int>(k));
  }
  EXPECT_THROW(flip_permutation(Shape::hexahedron, 9, 8), ConnectivityError);
  EXPECT_THROW(flip_permutation(Shape::hexahedron, 8, 1), ConnectivityError);
}

TEST(Flip, SquareRotationMatchesCornerCorrespondence) {
  // Rotation code (corner k, parity): right corner sigma(m) sits on left corner m. The point
  // next to left corner 0 along the first axis must land next to right corner k.
  const int n = 3;
  const int cx[4] = {0, 1, 1, 0};
  const int cy[4] = {0, 0, 1, 1};
  for (int rot = 0; rot < 8; ++rot) {
    const auto perm = flip_permutation(Shape::hexahedron, n * n, rot);
    const int k = rot / 2;
    const int right_corner_index = cx[k] * (n - 1) + n * cy[k] * (n - 1);
    EXPECT_EQ(perm[static_cast<std::size_t>(right_corner_index)], 0);
  }
}

TEST(Geometry, ScaledAffineTriangle) {
  ReferenceElement re(Shape::triangle, 1);
  std::vector<Vec3> coords = {Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(0, 2, 0)};
  const auto g = physical_geometry(re, coords);
  for (std::size_t q = 0; q < g.det.size(); ++q) {
    EXPECT_NEAR(g.det[q], 4.0, 1e-14);
    const Eigen::MatrixXd expected = 0.5 * re.volume_tab().gradients[q];
    EXPECT_LT((g.gradients[q] - expected).cwiseAbs().maxCoeff(), 1e-14);
  }
  double area = 0.0;
  for (double w : g.weights) area += w;
  EXPECT_NEAR(area, 2.0, 1e-14);
}

TEST(Geometry, IdentityMapKeepsReferenceHessians) {
  for (Shape s : {Shape::triangle, Shape::quadrilateral, Shape::hexahedron}) {
    ReferenceElement re(s, 3);
    const auto g = physical_geometry(re, re.nodes());
    for (std::size_t q = 0; q < g.hessians.size(); ++q) {
      EXPECT_LT((g.hessians[q] - re.volume_tab().hessians[q]).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(Geometry, InvertedElementRejected) {
  ReferenceElement re(Shape::triangle, 1);
  std::vector<Vec3> coords = {Vec3(0, 0, 0), Vec3(0, 1, 0), Vec3(1, 0, 0)};
  EXPECT_THROW(physical_geometry(re, coords), GeometryError);
}

TEST(Geometry, CurvedElementHessianMatchesFiniteDifferences) {
  // Quadratic triangle/quad with a bulged edge; chain rule: d/dxi_b (grad_x N) = H_x J e_b.
  for (Shape s : {Shape::triangle, Shape::quadrilateral}) {
    ReferenceElement re(s, 2);
    std::vector<Vec3> coords;
    for (const auto& xi : re.nodes()) {
      Vec3 x = 1.3 * xi;
      x.x() += 0.08 * std::sin(3.0 * xi.y());
      x.y() += 0.1 * xi.x() * xi.x();
      coords.push_back(x);
    }
    std::mt19937 rng(4);
    const double h = 1e-5;
    for (int trial = 0; trial < 3; ++trial) {
      const Vec3 xi = random_point(s, rng);
      const auto tab = re.tabulate({xi}, 2);
      const auto g = physical_geometry_at(re, coords, tab);
      for (int b = 0; b < 2; ++b) {
        Vec3 e = Vec3::Zero();
        e[b] = h;
        const auto tp = re.tabulate({xi + e}, 2);
        const auto tm = re.tabulate({xi - e}, 2);
        const auto gp = physical_geometry_at(re, coords, tp);
        const auto gm = physical_geometry_at(re, coords, tm);
        const Eigen::MatrixXd fd = (gp.gradients[0] - gm.gradients[0]) / (2 * h);
        for (int a = 0; a < 2; ++a)
          for (int n = 0; n < re.node_count(); ++n) {
            double exact = 0.0;
            for (int k = 0; k < 2; ++k) exact += g.hessians[0](a * 2 + k, n) * g.jacobian[0](k, b);
            EXPECT_NEAR(fd(a, n), exact, 1e-5 * std::max(1.0, std::abs(exact)));
          }
      }
    }
  }
}

TEST(Geometry, FaceNormalsAndMeasures) {
  ReferenceElement re(Shape::hexahedron, 2);
  std::vector<Vec3> coords;
  for (const auto& xi : re.nodes()) coords.push_back(Vec3(2 * xi.x(), 3 * xi.y(), 0.5 * xi.z()));
  const Vec3 expected_normals[6] = {Vec3(-1, 0, 0), Vec3(1, 0, 0), Vec3(0, -1, 0),
                                    Vec3(0, 1, 0),  Vec3(0, 0, -1), Vec3(0, 0, 1)};
  const double areas[6] = {1.5, 1.5, 1.0, 1.0, 6.0, 6.0};
  for (int f = 0; f < 6; ++f) {
    const auto g = physical_geometry(re, coords, f);
    double area = 0.0;
    for (std::size_t q = 0; q < g.weights.size(); ++q) {
      area += g.weights[q];
      EXPECT_NEAR((g.normals[q] - expected_normals[f]).norm(), 0.0, 1e-14);
    }
    EXPECT_NEAR(area, areas[f], 1e-13);
  }
}

}  // namespace
}  // namespace c0ipm
