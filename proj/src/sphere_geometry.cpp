#include "cconn/sphere_geometry.hpp"

#include "cconn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>

namespace cconn {

namespace {

constexpr double kUnitTolerance = 1e-12;
constexpr double kLocateSlack = 1e-12;

std::uint64_t edge_key(int a, int b) {
  auto lo = static_cast<std::uint64_t>(std::min(a, b));
  auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

}  // namespace

char hemisphere_code(Hemisphere h) { return h == Hemisphere::Left ? 'L' : 'R'; }

Hemisphere hemisphere_from_code(char c) {
  if (c == 'L' || c == 'l') return Hemisphere::Left;
  if (c == 'R' || c == 'r') return Hemisphere::Right;
  throw DataError(std::string("unknown hemisphere code '") + c + "'");
}

SurfacePoint SurfacePoint::on(Hemisphere h, const Vec3& direction) {
  const double norm = direction.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw GeometryError("surface point direction must be a finite nonzero vector");
  }
  return SurfacePoint{h, direction / norm};
}

double geodesic_distance(const SurfacePoint& p, const SurfacePoint& q) {
  if (p.hemisphere != q.hemisphere) return std::numeric_limits<double>::infinity();
  const double dot = std::clamp(p.direction.dot(q.direction), -1.0, 1.0);
  return std::acos(dot);
}

SphericalTriangulation::SphericalTriangulation(std::vector<Vec3> vertices,
                                               std::vector<Triangle> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  const int nv = num_vertices();
  const int nt = num_triangles();
  if (nv < 4 || nt < 4) throw GeometryError("triangulation needs at least 4 vertices and 4 triangles");

  for (int i = 0; i < nv; ++i) {
    if (std::abs(vertices_[i].norm() - 1.0) > kUnitTolerance) {
      throw GeometryError("triangulation vertex " + std::to_string(i) + " is not unit length");
    }
  }

  vertex_to_triangles_.assign(nv, {});
  neighbors_.assign(nt, {-1, -1, -1});
  inverse_corners_.resize(nt);
  plane_distance_.resize(nt);

  // directed edge (a->b) -> (triangle, corner opposite the edge)
  std::unordered_map<std::uint64_t, std::pair<int, int>> directed;
  std::unordered_map<std::uint64_t, int> undirected_count;
  directed.reserve(3 * nt);

  for (int t = 0; t < nt; ++t) {
    const Triangle& tri = triangles_[t];
    for (int v : tri) {
      if (v < 0 || v >= nv) throw GeometryError("triangle references an invalid vertex index");
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
      throw GeometryError("triangle " + std::to_string(t) + " has repeated vertices");
    }
    const Eigen::Matrix3d corners = corner_matrix(t);
    const double det = corners.determinant();
    if (!(det > 0.0)) {
      throw GeometryError("triangle " + std::to_string(t) + " is not outward oriented");
    }
    inverse_corners_[t] = corners.inverse();
    const Vec3 normal = (vertices_[tri[1]] - vertices_[tri[0]]).cross(vertices_[tri[2]] - vertices_[tri[0]]);
    plane_distance_[t] = normal.normalized().dot(vertices_[tri[0]]);

    for (int i = 0; i < 3; ++i) {
      vertex_to_triangles_[tri[i]].push_back(t);
      const int a = tri[(i + 1) % 3];
      const int b = tri[(i + 2) % 3];
      const std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
      if (!directed.emplace(key, std::make_pair(t, i)).second) {
        throw GeometryError("directed edge appears twice; orientation is inconsistent");
      }
      ++undirected_count[edge_key(a, b)];
    }
  }

  for (const auto& [key, count] : undirected_count) {
    if (count != 2) throw GeometryError("edge is not shared by exactly two triangles");
  }
  num_edges_ = static_cast<int>(undirected_count.size());

  for (const auto& [key, where] : directed) {
    const int a = static_cast<int>(key >> 32);
    const int b = static_cast<int>(key & 0xffffffffu);
    const std::uint64_t reverse = (static_cast<std::uint64_t>(b) << 32) | static_cast<std::uint64_t>(a);
    auto it = directed.find(reverse);
    if (it == directed.end()) throw GeometryError("edge orientation is inconsistent between neighbours");
    neighbors_[where.first][where.second] = it->second.first;
  }

  for (int v = 0; v < nv; ++v) {
    if (vertex_to_triangles_[v].empty()) {
      throw GeometryError("vertex " + std::to_string(v) + " is not used by any triangle");
    }
  }
  if (nv - num_edges_ + nt != 2) throw GeometryError("Euler characteristic is not 2");
}

Eigen::Matrix3d SphericalTriangulation::corner_matrix(int t) const {
  Eigen::Matrix3d m;
  const Triangle& tri = triangles_[t];
  m.col(0) = vertices_[tri[0]];
  m.col(1) = vertices_[tri[1]];
  m.col(2) = vertices_[tri[2]];
  return m;
}

double SphericalTriangulation::min_plane_distance() const {
  return *std::min_element(plane_distance_.begin(), plane_distance_.end());
}

double SphericalTriangulation::spherical_area(int t) const {
  const Triangle& tri = triangles_[t];
  const Vec3& a = vertices_[tri[0]];
  const Vec3& b = vertices_[tri[1]];
  const Vec3& c = vertices_[tri[2]];
  const double numerator = std::abs(a.dot(b.cross(c)));
  const double denominator = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
  return 2.0 * std::atan2(numerator, denominator);
}

double SphericalTriangulation::total_area() const {
  double total = 0.0;
  for (int t = 0; t < num_triangles(); ++t) total += spherical_area(t);
  return total;
}

int SphericalTriangulation::nearest_vertex(const Vec3& point) const {
  int best = 0;
  double best_dot = -2.0;
  for (int i = 0; i < num_vertices(); ++i) {
    const double d = vertices_[i].dot(point);
    if (d > best_dot) {
      best_dot = d;
      best = i;
    }
  }
  return best;
}

Location SphericalTriangulation::locate(const Vec3& point) const {
  int current = vertex_to_triangles_[nearest_vertex(point)].front();
  const int max_steps = 2 * num_triangles() + 8;
  for (int step = 0; step < max_steps; ++step) {
    const Vec3 b = barycentric(current, point);
    int worst = 0;
    b.minCoeff(&worst);
    if (b[worst] >= -kLocateSlack) return Location{current, b};
    current = neighbors_[current][worst];
  }

  // The walk can cycle on non-Delaunay meshes; fall back to a full scan.
  int best = -1;
  double best_min = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < num_triangles(); ++t) {
    const double m = barycentric(t, point).minCoeff();
    if (m > best_min) {
      best_min = m;
      best = t;
    }
  }
  if (best < 0 || best_min < -1e-10) throw GeometryError("point location failed");
  return Location{best, barycentric(best, point)};
}

SphericalTriangulation build_icosphere(int subdivision_level) {
  if (subdivision_level < 0 || subdivision_level > 7) {
    throw ConfigError("icosphere subdivision level must be in [0, 7]");
  }
  const double phi = std::numbers::phi;
  std::vector<Vec3> vertices = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0}, {0, -1, phi}, {0, 1, phi},
      {0, -1, -phi}, {0, 1, -phi}, {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : vertices) v.normalize();
  std::vector<Triangle> faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                 {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                 {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                 {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (auto& f : faces) {
    if (vertices[f[0]].dot(vertices[f[1]].cross(vertices[f[2]])) < 0.0) std::swap(f[1], f[2]);
  }

  for (int level = 0; level < subdivision_level; ++level) {
    std::unordered_map<std::uint64_t, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = edge_key(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      vertices.push_back((vertices[a] + vertices[b]).normalized());
      const int index = static_cast<int>(vertices.size()) - 1;
      midpoint.emplace(key, index);
      return index;
    };
    std::vector<Triangle> refined;
    refined.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      refined.push_back({f[0], ab, ca});
      refined.push_back({f[1], bc, ab});
      refined.push_back({f[2], ca, bc});
      refined.push_back({ab, bc, ca});
    }
    faces = std::move(refined);
  }
  return SphericalTriangulation(std::move(vertices), std::move(faces));
}

std::vector<Vec3> fibonacci_sphere(int count) {
  if (count < 1) throw ConfigError("fibonacci lattice needs at least one point");
  std::vector<Vec3> points;
  points.reserve(count);
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double angle = golden_angle * i;
    points.emplace_back(Vec3(r * std::cos(angle), r * std::sin(angle), z).normalized());
  }
  return points;
}

void write_mesh(std::ostream& out, const SphericalTriangulation& tri) {
  out.precision(17);
  out << tri.num_vertices() << ' ' << tri.num_triangles() << '\n';
  for (const auto& v : tri.vertices()) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : tri.triangles()) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

SphericalTriangulation read_mesh(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::istringstream {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return std::istringstream(line);
    }
    throw ParseError("unexpected end of mesh file", line_no);
  };

  int nv = 0;
  int nf = 0;
  {
    auto header = next_line();
    if (!(header >> nv >> nf) || nv < 0 || nf < 0) throw ParseError("bad mesh header", line_no);
  }
  std::vector<Vec3> vertices(nv);
  for (auto& v : vertices) {
    auto row = next_line();
    if (!(row >> v.x() >> v.y() >> v.z())) throw ParseError("bad vertex line", line_no);
    const double norm = v.norm();
    if (std::abs(norm - 1.0) > 1e-6) throw ParseError("mesh vertex is not on the unit sphere", line_no);
    v /= norm;
  }
  std::vector<Triangle> faces(nf);
  for (auto& f : faces) {
    auto row = next_line();
    if (!(row >> f[0] >> f[1] >> f[2])) throw ParseError("bad triangle line", line_no);
  }
  return SphericalTriangulation(std::move(vertices), std::move(faces));
}

}  // namespace cconn
