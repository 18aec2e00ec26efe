#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace cconn {

using Vec3 = Eigen::Vector3d;

enum class Hemisphere : std::uint8_t { Left = 0, Right = 1 };

char hemisphere_code(Hemisphere h);
Hemisphere hemisphere_from_code(char c);

// A point on Omega, the disjoint union of two labelled unit spheres.
struct SurfacePoint {
  Hemisphere hemisphere = Hemisphere::Left;
  Vec3 direction = Vec3::UnitZ();

  // Normalizes `direction`; throws GeometryError for a zero vector.
  static SurfacePoint on(Hemisphere h, const Vec3& direction);
};

// Geodesic distance in radians. Points on different spheres are infinitely
// far apart.
double geodesic_distance(const SurfacePoint& p, const SurfacePoint& q);

using Triangle = std::array<int, 3>;

struct Location {
  int triangle = -1;
  // Homogeneous (cone) coordinates: b0 v0 + b1 v1 + b2 v2 = point. They are
  // nonnegative inside the triangle but do not sum to one.
  Vec3 barycentric = Vec3::Zero();
};

// Triangulation of the unit sphere. Immutable after construction; the
// constructor validates unit vertices, outward orientation, Euler
// characteristic 2 and that every edge is shared by exactly two triangles.
class SphericalTriangulation {
 public:
  SphericalTriangulation(std::vector<Vec3> vertices, std::vector<Triangle> triangles);

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_triangles() const { return static_cast<int>(triangles_.size()); }
  int num_edges() const { return num_edges_; }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const Vec3& vertex(int i) const { return vertices_[i]; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const Triangle& triangle(int t) const { return triangles_[t]; }
  const std::vector<int>& triangles_of_vertex(int v) const { return vertex_to_triangles_[v]; }
  // neighbor(t, i) is the triangle across the edge opposite corner i.
  int neighbor(int t, int i) const { return neighbors_[t][i]; }

  // Matrix T with the triangle's vertices as columns; coordinates of p are T^{-1} p.
  Eigen::Matrix3d corner_matrix(int t) const;
  const Eigen::Matrix3d& inverse_corner_matrix(int t) const { return inverse_corners_[t]; }
  Vec3 barycentric(int t, const Vec3& point) const { return inverse_corners_[t] * point; }

  // Distance from the origin to the plane of the flat triangle.
  double plane_distance(int t) const { return plane_distance_[t]; }
  double min_plane_distance() const;

  // Exact area of the geodesic triangle (solid angle).
  double spherical_area(int t) const;
  double total_area() const;

  Location locate(const Vec3& point) const;
  int nearest_vertex(const Vec3& point) const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<std::vector<int>> vertex_to_triangles_;
  std::vector<std::array<int, 3>> neighbors_;
  std::vector<Eigen::Matrix3d> inverse_corners_;
  std::vector<double> plane_distance_;
  int num_edges_ = 0;
};

// Recursive midpoint subdivision of the icosahedron: 10*4^L+2 vertices.
SphericalTriangulation build_icosphere(int subdivision_level);

// Spherical Delaunay triangulation as the convex hull of points on the
// sphere. Points are normalized first. Throws GeometryError on degenerate
// input (fewer than 4 points, coincident points, all on one great circle).
SphericalTriangulation build_delaunay(std::span<const Vec3> points);

// Quasi-uniform spiral lattice of `count` unit vectors.
std::vector<Vec3> fibonacci_sphere(int count);

// Plain-text mesh: "V F", V lines "x y z", F lines "i j k" (0-based).
void write_mesh(std::ostream& out, const SphericalTriangulation& tri);
SphericalTriangulation read_mesh(std::istream& in);

}  // namespace cconn
