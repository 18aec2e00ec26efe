// Incremental 3D convex hull. For points on the unit sphere the hull faces are
// exactly the spherical Delaunay triangles.

#include "cconn/errors.hpp"
#include "cconn/sphere_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace cconn {

namespace {

constexpr double kCoincident = 1e-12;
constexpr double kVisible = 1e-12;

struct HullFace {
  int a, b, c;
  Vec3 normal;
  double offset;
  bool alive = true;
};

std::uint64_t directed_key(int a, int b) {
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

class Hull {
 public:
  explicit Hull(const std::vector<Vec3>& points) : points_(points) {}

  std::vector<Triangle> run() {
    const auto seed = initial_tetrahedron();
    std::vector<bool> used(points_.size(), false);
    for (int s : seed) used[s] = true;
    for (int i = 0; i < static_cast<int>(points_.size()); ++i) {
      if (!used[i]) insert(i);
    }
    std::vector<Triangle> out;
    for (const auto& f : faces_) {
      if (f.alive) out.push_back({f.a, f.b, f.c});
    }
    return out;
  }

 private:
  std::array<int, 4> initial_tetrahedron() {
    const int n = static_cast<int>(points_.size());
    const int p0 = 0;
    int p1 = -1;
    double best = -1.0;
    for (int i = 1; i < n; ++i) {
      const double d = (points_[i] - points_[p0]).squaredNorm();
      if (d > best) best = d, p1 = i;
    }
    int p2 = -1;
    best = -1.0;
    const Vec3 axis = (points_[p1] - points_[p0]).normalized();
    for (int i = 0; i < n; ++i) {
      const Vec3 r = points_[i] - points_[p0];
      const double d = (r - r.dot(axis) * axis).squaredNorm();
      if (d > best) best = d, p2 = i;
    }
    if (best < kCoincident) throw GeometryError("points are collinear");
    int p3 = -1;
    best = -1.0;
    const Vec3 normal = (points_[p1] - points_[p0]).cross(points_[p2] - points_[p0]).normalized();
    for (int i = 0; i < n; ++i) {
      const double d = std::abs(normal.dot(points_[i] - points_[p0]));
      if (d > best) best = d, p3 = i;
    }
    if (best < 1e-10) throw GeometryError("points are coplanar; no closed hull exists");

    interior_ = (points_[p0] + points_[p1] + points_[p2] + points_[p3]) / 4.0;
    add_face(p0, p1, p2);
    add_face(p0, p2, p3);
    add_face(p0, p3, p1);
    add_face(p1, p3, p2);
    return {p0, p1, p2, p3};
  }

  void add_face(int a, int b, int c) {
    Vec3 normal = (points_[b] - points_[a]).cross(points_[c] - points_[a]);
    if (normal.dot(points_[a] - interior_) < 0.0) {
      std::swap(b, c);
      normal = -normal;
    }
    normal.normalize();
    const int index = static_cast<int>(faces_.size());
    faces_.push_back(HullFace{a, b, c, normal, normal.dot(points_[a])});
    edges_[directed_key(a, b)] = index;
    edges_[directed_key(b, c)] = index;
    edges_[directed_key(c, a)] = index;
  }

  void insert(int p) {
    const Vec3& point = points_[p];
    std::vector<int> visible;
    for (int f = 0; f < static_cast<int>(faces_.size()); ++f) {
      if (faces_[f].alive && faces_[f].normal.dot(point) - faces_[f].offset > kVisible) visible.push_back(f);
    }
    if (visible.empty()) throw GeometryError("point lies inside the hull (coincident points?)");

    std::vector<bool> is_visible(faces_.size(), false);
    for (int f : visible) is_visible[f] = true;

    std::vector<std::pair<int, int>> horizon;
    for (int f : visible) {
      const HullFace& face = faces_[f];
      const int corners[3] = {face.a, face.b, face.c};
      for (int i = 0; i < 3; ++i) {
        const int u = corners[i];
        const int v = corners[(i + 1) % 3];
        const auto twin = edges_.find(directed_key(v, u));
        if (twin == edges_.end()) throw GeometryError("hull adjacency is broken");
        if (!is_visible[twin->second]) horizon.emplace_back(u, v);
      }
    }
    for (int f : visible) {
      HullFace& face = faces_[f];
      face.alive = false;
      edges_.erase(directed_key(face.a, face.b));
      edges_.erase(directed_key(face.b, face.c));
      edges_.erase(directed_key(face.c, face.a));
    }
    for (const auto& [u, v] : horizon) {
      Vec3 normal = (points_[v] - points_[u]).cross(point - points_[u]);
      normal.normalize();
      const int index = static_cast<int>(faces_.size());
      faces_.push_back(HullFace{u, v, p, normal, normal.dot(points_[u])});
      edges_[directed_key(u, v)] = index;
      edges_[directed_key(v, p)] = index;
      edges_[directed_key(p, u)] = index;
    }
  }

  const std::vector<Vec3>& points_;
  Vec3 interior_ = Vec3::Zero();
  std::vector<HullFace> faces_;
  std::unordered_map<std::uint64_t, int> edges_;
};

}  // namespace

SphericalTriangulation build_delaunay(std::span<const Vec3> input) {
  if (input.size() < 4) throw GeometryError("Delaunay triangulation needs at least 4 points");
  std::vector<Vec3> points;
  points.reserve(input.size());
  for (const auto& p : input) {
    const double norm = p.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw GeometryError("point is zero or non-finite");
    points.push_back(p / norm);
  }

  // Coincidence check on a sorted copy keeps this O(n log n) in practice.
  std::vector<int> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return points[a].z() < points[b].z(); });
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      if (points[order[j]].z() - points[order[i]].z() > kCoincident) break;
      if ((points[order[i]] - points[order[j]]).norm() < kCoincident) {
        throw GeometryError("coincident points in Delaunay input");
      }
    }
  }

  Hull hull(points);
  auto triangles = hull.run();
  return SphericalTriangulation(std::move(points), std::move(triangles));
}

}  // namespace cconn
