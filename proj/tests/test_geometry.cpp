#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "oracles.hpp"
#include "tvdcov/geometry.hpp"

using namespace tvdcov;

namespace {

const Domain kSquare = Domain::box(-1, -1, 1, 1);

bool inside_convex(const Polygon& poly, const Point& q, double tol) {
  for (std::size_t k = 0; k < poly.size(); ++k)
    if (cross(poly[(k + 1) % poly.size()] - poly[k], q - poly[k]) < -tol) return false;
  return true;
}

void expect_same_polygon(const Polygon& got, const Polygon& want, double tol = 1e-12) {
  ASSERT_EQ(got.size(), want.size());
  // Same cyclic order, possibly a different start vertex.
  std::size_t shift = 0;
  while (shift < got.size() && (got[shift] - want[0]).norm() > tol) ++shift;
  ASSERT_LT(shift, got.size());
  for (std::size_t k = 0; k < want.size(); ++k) EXPECT_LT((got[(k + shift) % got.size()] - want[k]).norm(), tol);
}

}  // namespace

TEST(ClipHalfplane, AxisAlignedCut) {
  const Polygon out = clip_halfplane(kSquare.vertices(), Point(1, 0), 0.0);
  EXPECT_NEAR(polygon_area(out), 2.0, 1e-14);
  for (const auto& v : out) {
    EXPECT_LE(v.x(), 1e-15);
    EXPECT_GE(v.x(), -1.0);
  }
  expect_same_polygon(out, {Point(-1, -1), Point(0, -1), Point(0, 1), Point(-1, 1)});
}

TEST(ClipHalfplane, ContainingHalfplaneLeavesPolygon) {
  expect_same_polygon(clip_halfplane(kSquare.vertices(), Point(1, 0), 2.0), kSquare.vertices());
}

TEST(ClipHalfplane, TriangleBecomesQuadrilateral) {
  const Polygon tri{Point(0, 0), Point(1, 0), Point(0, 1)};
  const Polygon out = clip_halfplane(tri, Point(1, 0), 0.5);
  expect_same_polygon(out, {Point(0, 0), Point(0.5, 0), Point(0.5, 0.5), Point(0, 1)});
  EXPECT_NEAR(polygon_area(out), 0.375, 1e-15);
}

TEST(ClipHalfplane, DisjointHalfplaneGivesEmpty) {
  EXPECT_TRUE(clip_halfplane(kSquare.vertices(), Point(1, 0), -5.0).empty());
}

TEST(Domain, RejectsBadPolygons) {
  EXPECT_THROW(Domain({Point(0, 0), Point(1, 0)}), Error);
  // Clockwise.
  EXPECT_THROW(Domain({Point(0, 0), Point(0, 1), Point(1, 1), Point(1, 0)}), Error);
  // Nonconvex arrowhead.
  EXPECT_THROW(Domain({Point(0, 0), Point(2, 0), Point(1, 0.5), Point(2, 2), Point(0, 2)}), Error);
  try {
    Domain({Point(0, 0), Point(1, 0)});
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidDomain);
  }
}

TEST(Domain, ClampProjectsOntoInsetPolygon) {
  const Point c = kSquare.clamp(Point(2.0, 0.3), 1e-6);
  EXPECT_NEAR(c.x(), 1.0 - 1e-6, 1e-15);
  EXPECT_NEAR(c.y(), 0.3, 1e-15);
  const Point corner = kSquare.clamp(Point(5.0, 5.0), 0.1);
  EXPECT_NEAR(corner.x(), 0.9, 1e-14);
  EXPECT_NEAR(corner.y(), 0.9, 1e-14);
  EXPECT_EQ(kSquare.clamp(Point(0.2, 0.1), 1e-6), Point(0.2, 0.1));
}

TEST(Tessellate, SingleRobotOwnsDomain) {
  const Tessellation t = tessellate(std::vector<Point>{Point(0.2, 0.3)}, kSquare);
  EXPECT_NEAR(polygon_area(t.cells[0]), 4.0, 1e-14);
  EXPECT_TRUE(t.adjacency[0].empty());
  EXPECT_TRUE(t.faces.empty());
}

TEST(Tessellate, TwoRobotsSplitAtBisector) {
  const Tessellation t = tessellate(std::vector<Point>{Point(-0.5, 0), Point(0.5, 0)}, kSquare);
  expect_same_polygon(t.cells[0], {Point(-1, -1), Point(0, -1), Point(0, 1), Point(-1, 1)});
  expect_same_polygon(t.cells[1], {Point(0, -1), Point(1, -1), Point(1, 1), Point(0, 1)});
  const auto s = t.boundary_segment(0, 1);
  ASSERT_TRUE(s.has_value());
  EXPECT_NEAR(s->a.x(), 0.0, 1e-15);
  EXPECT_NEAR(s->b.x(), 0.0, 1e-15);
  EXPECT_NEAR(std::min(s->a.y(), s->b.y()), -1.0, 1e-15);
  EXPECT_NEAR(std::max(s->a.y(), s->b.y()), 1.0, 1e-15);
  EXPECT_EQ(t.adjacency[0], std::vector<int>{1});
  EXPECT_EQ(t.adjacency[1], std::vector<int>{0});
}

TEST(Tessellate, MatchesNearestRobotGrid) {
  const Domain d = Domain::box(-3, -3, 3, 3);
  std::mt19937_64 rng(11);
  const auto p = oracle::random_points(rng, 5, -2.9, 2.9, 0.2);
  const Tessellation t = tessellate(p, d);
  const auto g = oracle::grid_moments(p, [](const Point&) { return 1.0; }, -3, 3, 1000);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = polygon_area(t.cells[i]);
    EXPECT_LT(std::abs(a - g.area[i]) / a, 1e-3) << "cell " << i;
  }
}

TEST(Tessellate, RejectsOutsideAndCoincident) {
  try {
    tessellate(std::vector<Point>{Point(1.5, 0)}, kSquare);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PositionOutsideDomain);
  }
  // On the boundary is not strictly inside.
  EXPECT_THROW(tessellate(std::vector<Point>{Point(1.0, 0)}, kSquare), Error);
  try {
    tessellate(std::vector<Point>{Point(0.1, 0), Point(0.1 + 1e-10, 0)}, kSquare);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CoincidentRobots);
  }
  EXPECT_NO_THROW(tessellate(std::vector<Point>{Point(0.1, 0), Point(0.1 + 1e-8, 0)}, kSquare));
}

TEST(BoundarySegment, CollinearEndsAreNotAdjacent) {
  const Tessellation t =
      tessellate(std::vector<Point>{Point(-1, 0), Point(0, 0), Point(1, 0)}, Domain::box(-2, -2, 2, 2));
  EXPECT_FALSE(t.boundary_segment(0, 2).has_value());
  EXPECT_FALSE(t.boundary_segment(2, 0).has_value());
  EXPECT_TRUE(t.boundary_segment(0, 1).has_value());
  EXPECT_TRUE(t.boundary_segment(1, 2).has_value());
}

TEST(BoundarySegment, SquareDiagonalsMeetAtAPoint) {
  const Tessellation t = tessellate(
      std::vector<Point>{Point(-0.5, -0.5), Point(0.5, -0.5), Point(0.5, 0.5), Point(-0.5, 0.5)}, kSquare);
  EXPECT_FALSE(t.boundary_segment(0, 2).has_value());
  EXPECT_FALSE(t.boundary_segment(1, 3).has_value());
  EXPECT_TRUE(t.boundary_segment(0, 1).has_value());
  EXPECT_EQ(t.faces.size(), 4u);
}

TEST(BoundarySegment, IndexChecks) {
  const Tessellation t = tessellate(std::vector<Point>{Point(-0.5, 0), Point(0.5, 0)}, kSquare);
  for (auto [i, j] : {std::pair{0, 0}, std::pair{-1, 0}, std::pair{0, 2}}) {
    try {
      (void)t.boundary_segment(i, j);
      FAIL() << i << "," << j;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::IndexOutOfRange);
    }
  }
}

TEST(TessellateProperties, PartitionOnRandomConfigurations) {
  const Domain d = Domain::box(-3, -3, 3, 3);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 9);
    const auto p = oracle::random_points(rng, n, -2.99, 2.99, 1e-3);
    const Tessellation t = tessellate(p, d);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      total += polygon_area(t.cells[i]);
      EXPECT_TRUE(inside_convex(t.cells[i], p[i], 1e-12)) << "robot outside own cell";
    }
    EXPECT_NEAR(total / d.area(), 1.0, 1e-9) << "trial " << trial;
    // Pairwise disjoint interiors: vertex centroid of a cell lies in no other cell.
    for (std::size_t i = 0; i < n; ++i) {
      const Point g = vertex_centroid(t.cells[i]);
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) {
          EXPECT_FALSE(inside_convex(t.cells[j], g, -1e-9));
        }
    }
    for (const auto& [key, seg] : t.faces) {
      const auto& [i, j] = key;
      for (double s : {0.0, 0.3, 1.0}) {
        const Point q = seg.a + s * (seg.b - seg.a);
        EXPECT_NEAR((q - p[static_cast<std::size_t>(i)]).norm(), (q - p[static_cast<std::size_t>(j)]).norm(), 1e-9);
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      for (int j : t.adjacency[i]) EXPECT_TRUE(t.adjacent(j, static_cast<int>(i)));
  }
}

TEST(TessellateProperties, NearestRobotOwnsEachSample) {
  const Domain d = Domain::box(-3, -3, 3, 3);
  std::mt19937_64 rng(2);
  const auto p = oracle::random_points(rng, 8, -2.9, 2.9, 0.05);
  const Tessellation t = tessellate(p, d);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int s = 0; s < 10000; ++s) {
    const Point q(u(rng), u(rng));
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!inside_convex(t.cells[i], q, 0.0)) continue;
      for (std::size_t j = 0; j < p.size(); ++j) EXPECT_LE((q - p[i]).norm(), (q - p[j]).norm() + 1e-9);
    }
  }
}

TEST(TessellateProperties, AdjacencyMatchesGridDelaunay) {
  const Domain d = Domain::box(-3, -3, 3, 3);
  std::mt19937_64 rng(3);
  constexpr int kGrid = 600;
  const double h = 6.0 / kGrid;
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = oracle::random_points(rng, 7, -2.8, 2.8, 0.3);
    const Tessellation t = tessellate(p, d);
    std::vector<int> owner(kGrid * kGrid);
    for (int a = 0; a < kGrid; ++a)
      for (int b = 0; b < kGrid; ++b)
        owner[a * kGrid + b] = oracle::nearest(p, Point(-3 + (a + 0.5) * h, -3 + (b + 0.5) * h));
    std::set<std::pair<int, int>> grid_pairs;
    for (int a = 0; a < kGrid; ++a)
      for (int b = 0; b < kGrid; ++b) {
        const int o = owner[a * kGrid + b];
        if (a + 1 < kGrid && owner[(a + 1) * kGrid + b] != o)
          grid_pairs.insert({std::min(o, owner[(a + 1) * kGrid + b]), std::max(o, owner[(a + 1) * kGrid + b])});
        if (b + 1 < kGrid && owner[a * kGrid + b + 1] != o)
          grid_pairs.insert({std::min(o, owner[a * kGrid + b + 1]), std::max(o, owner[a * kGrid + b + 1])});
      }
    // Faces clearly longer than the grid spacing show up on the grid, and the
    // grid never sees a contact that is not a face (up to vertex-diagonal hits).
    for (const auto& [key, seg] : t.faces)
      if (seg.length() > 4 * h) {
        EXPECT_TRUE(grid_pairs.count(key)) << key.first << "-" << key.second;
      }
    for (const auto& key : grid_pairs) {
      const auto s = t.boundary_segment(key.first, key.second);
      if (!s) {
        // Only tolerated when the cells do touch at a common vertex.
        bool touch = false;
        for (const auto& u : t.cells[static_cast<std::size_t>(key.first)])
          for (const auto& v : t.cells[static_cast<std::size_t>(key.second)]) touch = touch || (u - v).norm() < 1e-9;
        EXPECT_TRUE(touch) << key.first << "-" << key.second;
      }
    }
  }
}

TEST(TessellateProperties, PermutationEquivariant) {
  const Domain d = Domain::box(-3, -3, 3, 3);
  std::mt19937_64 rng(4);
  const auto p = oracle::random_points(rng, 6, -2.9, 2.9, 0.1);
  const std::vector<int> perm{3, 0, 5, 1, 4, 2};
  std::vector<Point> q(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) q[k] = p[static_cast<std::size_t>(perm[k])];
  const Tessellation a = tessellate(p, d), b = tessellate(q, d);
  for (std::size_t k = 0; k < p.size(); ++k) {
    const auto& ca = a.cells[static_cast<std::size_t>(perm[k])];
    EXPECT_NEAR(polygon_area(b.cells[k]), polygon_area(ca), 1e-12);
    EXPECT_LT((vertex_centroid(b.cells[k]) - vertex_centroid(ca)).norm(), 1e-12);
    std::vector<int> mapped;
    for (int j : b.adjacency[k]) mapped.push_back(perm[static_cast<std::size_t>(j)]);
    std::sort(mapped.begin(), mapped.end());
    EXPECT_EQ(mapped, a.adjacency[static_cast<std::size_t>(perm[k])]);
  }
}

TEST(HopDistances, CollinearChain) {
  const Tessellation t = tessellate(
      std::vector<Point>{Point(-1.5, 0), Point(-0.5, 0), Point(0.5, 0), Point(1.5, 0)}, Domain::box(-2, -2, 2, 2));
  EXPECT_EQ(hop_distances(t, 0), (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(hop_distances(t, 2), (std::vector<int>{2, 1, 0, 1}));
}
