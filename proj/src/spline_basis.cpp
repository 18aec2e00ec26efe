#include "cconn/spline_basis.hpp"

#include "cconn/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cconn {

namespace {

constexpr double kSnap = 1e-12;

// 7-point degree-5 rule on the reference triangle (barycentric nodes, weights summing to 1).
struct RuleNode {
  double l0, l1, l2, weight;
};

constexpr double kA1 = 0.059715871789770, kB1 = 0.470142064105115, kW1 = 0.132394152788506;
constexpr double kA2 = 0.797426985353087, kB2 = 0.101286507323456, kW2 = 0.125939180544827;
constexpr RuleNode kRule[7] = {
    {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.225},
    {kA1, kB1, kB1, kW1}, {kB1, kA1, kB1, kW1}, {kB1, kB1, kA1, kW1},
    {kA2, kB2, kB2, kW2}, {kB2, kA2, kB2, kW2}, {kB2, kB2, kA2, kW2},
};

// Quadrature node on a spherical triangle: unit point, weight (area element
// included) and the flat barycentric coordinates of its central projection.
struct SphereNode {
  Vec3 point;
  Vec3 flat;
  double weight;
};

// Nodes for one spherical triangle. The flat triangle is split into
// 4^refinement pieces, the rule is applied on each, and nodes are pushed
// radially to the sphere with the area factor h / |q|^3.
std::vector<SphereNode> triangle_nodes(const SphericalTriangulation& tri, int t, int refinement) {
  const Eigen::Matrix3d corners = tri.corner_matrix(t);
  const Vec3 e1 = corners.col(1) - corners.col(0);
  const Vec3 e2 = corners.col(2) - corners.col(0);
  const double flat_area = 0.5 * e1.cross(e2).norm();
  const double h = tri.plane_distance(t);

  const int divisions = 1 << refinement;
  const double sub_area = flat_area / (divisions * divisions);
  std::vector<SphereNode> nodes;
  nodes.reserve(7 * divisions * divisions);

  auto emit = [&](const Vec3& a, const Vec3& b, const Vec3& c) {
    for (const auto& r : kRule) {
      const Vec3 lambda = r.l0 * a + r.l1 * b + r.l2 * c;
      const Vec3 q = corners * lambda;
      const double qn = q.norm();
      nodes.push_back(SphereNode{q / qn, lambda, r.weight * sub_area * h / (qn * qn * qn)});
    }
  };

  // Regular split of the barycentric simplex into upward and downward pieces.
  const double step = 1.0 / divisions;
  for (int i = 0; i < divisions; ++i) {
    for (int j = 0; j < divisions - i; ++j) {
      auto bary = [&](int a, int b) { return Vec3(1.0 - (a + b) * step, a * step, b * step); };
      emit(bary(i, j), bary(i + 1, j), bary(i, j + 1));
      if (j < divisions - i - 1) emit(bary(i + 1, j), bary(i + 1, j + 1), bary(i, j + 1));
    }
  }
  return nodes;
}

using Triplets = std::vector<Eigen::Triplet<double>>;

void add_local(Triplets& out, const Triangle& tri, int offset, const Eigen::Matrix3d& local) {
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) out.emplace_back(offset + tri[a], offset + tri[b], local(a, b));
  }
}

SparseMatrix assemble(const BasisSystem& sys, const QuadratureOptions& opts,
                      Eigen::Matrix3d (*local)(const SphericalTriangulation&, int, int)) {
  if (opts.refinement < 0 || opts.refinement > 8) throw ConfigError("quadrature refinement must be in [0, 8]");
  Triplets triplets;
  for (Hemisphere h : {Hemisphere::Left, Hemisphere::Right}) {
    const auto& tri = sys.triangulation(h);
    for (int t = 0; t < tri.num_triangles(); ++t) {
      add_local(triplets, tri.triangle(t), sys.offset(h), local(tri, t, opts.refinement));
    }
  }
  SparseMatrix m(sys.size(), sys.size());
  m.setFromTriplets(triplets.begin(), triplets.end());
  // Exact symmetry regardless of summation order.
  SparseMatrix mt = m.transpose();
  m = 0.5 * (m + mt);
  m.prune(0.0);
  return m;
}

Eigen::Matrix3d local_gram(const SphericalTriangulation& tri, int t, int refinement) {
  Eigen::Matrix3d local = Eigen::Matrix3d::Zero();
  for (const auto& node : triangle_nodes(tri, t, refinement)) {
    const Vec3 b = tri.barycentric(t, node.point);
    local.noalias() += node.weight * b * b.transpose();
  }
  return local;
}

Eigen::Matrix3d local_roughness(const SphericalTriangulation& tri, int t, int refinement) {
  // lambda_i(x) = (r_i . x) / (s . x) with r_i the rows of T^{-1} and s their
  // sum; the gradient is tangential because lambda is 0-homogeneous.
  const Eigen::Matrix3d& inv = tri.inverse_corner_matrix(t);
  const Vec3 s = inv.colwise().sum().transpose();
  Eigen::Matrix3d local = Eigen::Matrix3d::Zero();
  for (const auto& node : triangle_nodes(tri, t, refinement)) {
    const Vec3& p = node.point;
    const double sp = s.dot(p);
    Eigen::Matrix3d grads;  // row i = gradient of lambda_i
    for (int i = 0; i < 3; ++i) {
      const Vec3 r = inv.row(i).transpose();
      grads.row(i) = ((r * sp - r.dot(p) * s) / (sp * sp)).transpose();
    }
    local.noalias() += node.weight * grads * grads.transpose();
  }
  return local;
}

}  // namespace

double Grid::weight() const {
  return points.empty() ? 0.0 : 8.0 * std::numbers::pi / static_cast<double>(points.size());
}

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t Grid::hash() const {
  std::uint64_t h = fnv1a(nullptr, 0);
  for (const auto& p : points) {
    const auto code = static_cast<unsigned char>(p.hemisphere);
    h = fnv1a(&code, 1, h);
    h = fnv1a(p.direction.data(), 3 * sizeof(double), h);
  }
  return h;
}

Grid make_fibonacci_grid(int n) {
  if (n < 2) throw ConfigError("grid needs at least one point per sphere");
  Grid grid;
  grid.points.reserve(n);
  const int left = (n + 1) / 2;
  for (const auto& d : fibonacci_sphere(left)) grid.points.push_back(SurfacePoint{Hemisphere::Left, d});
  for (const auto& d : fibonacci_sphere(n - left)) grid.points.push_back(SurfacePoint{Hemisphere::Right, d});
  return grid;
}

BasisValues evaluate_hats(const SurfacePoint& point, const BasisSystem& sys) {
  const auto& tri = sys.triangulation(point.hemisphere);
  const Location loc = tri.locate(point.direction);
  BasisValues out;
  const Triangle& corners = tri.triangle(loc.triangle);
  const int offset = sys.offset(point.hemisphere);
  for (int i = 0; i < 3; ++i) {
    out.index[i] = offset + corners[i];
    // Snap roundoff at edges and vertices to exact zeros.
    out.value[i] = loc.barycentric[i] > kSnap ? loc.barycentric[i] : 0.0;
  }
  return out;
}

Eigen::SparseVector<double> evaluate_basis(const SurfacePoint& point, const BasisSystem& sys) {
  const BasisValues hats = evaluate_hats(point, sys);
  Eigen::SparseVector<double> v(sys.size());
  for (int i = 0; i < 3; ++i) {
    if (hats.value[i] != 0.0) v.coeffRef(hats.index[i]) += hats.value[i];
  }
  return v;
}

SparseRowMatrix evaluation_matrix(std::span<const SurfacePoint> grid, const BasisSystem& sys) {
  if (grid.empty()) throw ConfigError("evaluation grid is empty");
  Triplets triplets;
  triplets.reserve(3 * grid.size());
  for (std::size_t row = 0; row < grid.size(); ++row) {
    const BasisValues hats = evaluate_hats(grid[row], sys);
    for (int i = 0; i < 3; ++i) {
      if (hats.value[i] != 0.0) triplets.emplace_back(static_cast<int>(row), hats.index[i], hats.value[i]);
    }
  }
  SparseRowMatrix phi(static_cast<int>(grid.size()), sys.size());
  phi.setFromTriplets(triplets.begin(), triplets.end());
  return phi;
}

SparseMatrix gram_matrix(const BasisSystem& sys, const QuadratureOptions& opts) {
  SparseMatrix gram = assemble(sys, opts, &local_gram);
  Eigen::SimplicialLLT<SparseMatrix> chol(gram);
  if (chol.info() != Eigen::Success) {
    throw NumericalError("Gram matrix is not positive definite; raise the quadrature refinement");
  }
  return gram;
}

SparseMatrix roughness_matrix(const BasisSystem& sys, const QuadratureOptions& opts) {
  return assemble(sys, opts, &local_roughness);
}

BasisSystem::BasisSystem(SphericalTriangulation left, SphericalTriangulation right, Grid grid,
                         QuadratureOptions quadrature)
    : left_(std::move(left)), right_(std::move(right)), grid_(std::move(grid)) {
  bool has_left = false;
  bool has_right = false;
  for (const auto& p : grid_.points) (p.hemisphere == Hemisphere::Left ? has_left : has_right) = true;
  if (!has_left || !has_right) throw ConfigError("evaluation grid must cover both spheres");

  phi_ = evaluation_matrix(grid_.points, *this);
  gram_ = gram_matrix(*this, quadrature);
  roughness_ = roughness_matrix(*this, quadrature);
  SparseMatrix phi_col = phi_;
  grid_gram_ = grid_.weight() * SparseMatrix(phi_col.transpose() * phi_col);

  std::uint64_t h = grid_.hash();
  for (const auto* tri : {&left_, &right_}) {
    for (const auto& v : tri->vertices()) h = fnv1a(v.data(), 3 * sizeof(double), h);
    for (const auto& t : tri->triangles()) h = fnv1a(t.data(), 3 * sizeof(int), h);
  }
  hash_ = h;
}

SurfacePoint BasisSystem::basis_location(int basis_index) const {
  const Hemisphere h = hemisphere_of(basis_index);
  return SurfacePoint{h, triangulation(h).vertex(basis_index - offset(h))};
}

double evaluate_spline(const SurfacePoint& point, const BasisSystem& sys, const Eigen::VectorXd& coeffs) {
  const BasisValues hats = evaluate_hats(point, sys);
  double value = 0.0;
  for (int i = 0; i < 3; ++i) value += hats.value[i] * coeffs[hats.index[i]];
  return value;
}

double spline_sup_bound(const BasisSystem& sys, const Eigen::VectorXd& coeffs) {
  if (coeffs.size() == 0) return 0.0;
  const double h = std::min(sys.triangulation(Hemisphere::Left).min_plane_distance(),
                            sys.triangulation(Hemisphere::Right).min_plane_distance());
  return coeffs.cwiseAbs().maxCoeff() / h;
}

}  // namespace cconn
