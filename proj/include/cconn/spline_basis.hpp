#pragma once

#include "cconn/sphere_geometry.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <span>
#include <vector>

namespace cconn {

using SparseMatrix = Eigen::SparseMatrix<double>;
using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Evaluation grid X on Omega with uniform quadrature weight 8*pi/n per point.
struct Grid {
  std::vector<SurfacePoint> points;

  int size() const { return static_cast<int>(points.size()); }
  double weight() const;
  std::uint64_t hash() const;
};

// Fibonacci lattice with ceil(n/2) points on the left sphere and floor(n/2)
// on the right.
Grid make_fibonacci_grid(int n);

struct QuadratureOptions {
  // Each flat triangle is split into 4^refinement pieces before the 7-point
  // rule is applied.
  int refinement = 1;
};

// Nonzero hat-function values at one point: at most three entries, all on
// the point's sphere.
struct BasisValues {
  std::array<int, 3> index{};
  Vec3 value = Vec3::Zero();
};

class BasisSystem;

BasisValues evaluate_hats(const SurfacePoint& point, const BasisSystem& sys);
Eigen::SparseVector<double> evaluate_basis(const SurfacePoint& point, const BasisSystem& sys);
SparseRowMatrix evaluation_matrix(std::span<const SurfacePoint> grid, const BasisSystem& sys);

// L2(Omega) inner products of the hat functions; cross-sphere entries are
// structurally zero. Throws NumericalError when the assembled matrix is not
// positive definite.
SparseMatrix gram_matrix(const BasisSystem& sys, const QuadratureOptions& opts = {});

// Surface Dirichlet energy of the partition-of-unity hats (the homogeneous
// hats divided by their sum). Constants per sphere are in its null space.
SparseMatrix roughness_matrix(const BasisSystem& sys, const QuadratureOptions& opts = {});

// Degree-1 spherical spline basis on two triangulated spheres together with
// its evaluation, Gram and roughness matrices. Immutable after assembly.
// Basis index j < M1 refers to left vertex j, otherwise to right vertex j-M1.
class BasisSystem {
 public:
  BasisSystem(SphericalTriangulation left, SphericalTriangulation right, Grid grid,
              QuadratureOptions quadrature = {});

  const SphericalTriangulation& triangulation(Hemisphere h) const {
    return h == Hemisphere::Left ? left_ : right_;
  }
  int size(Hemisphere h) const { return triangulation(h).num_vertices(); }
  int size() const { return left_.num_vertices() + right_.num_vertices(); }
  int offset(Hemisphere h) const { return h == Hemisphere::Left ? 0 : left_.num_vertices(); }
  Hemisphere hemisphere_of(int basis_index) const {
    return basis_index < left_.num_vertices() ? Hemisphere::Left : Hemisphere::Right;
  }
  SurfacePoint basis_location(int basis_index) const;

  const Grid& grid() const { return grid_; }
  int grid_size() const { return grid_.size(); }
  double grid_weight() const { return grid_.weight(); }

  const SparseRowMatrix& evaluation() const { return phi_; }
  const SparseMatrix& gram() const { return gram_; }
  const SparseMatrix& roughness() const { return roughness_; }
  // w * Phi^T Phi: the Gram matrix under the grid quadrature.
  const SparseMatrix& grid_gram() const { return grid_gram_; }

  std::uint64_t hash() const { return hash_; }

 private:
  SphericalTriangulation left_;
  SphericalTriangulation right_;
  Grid grid_;
  SparseRowMatrix phi_;
  SparseMatrix gram_;
  SparseMatrix roughness_;
  SparseMatrix grid_gram_;
  std::uint64_t hash_ = 0;
};

// Value of the spline with coefficients `coeffs` (length M) at `point`.
double evaluate_spline(const SurfacePoint& point, const BasisSystem& sys, const Eigen::VectorXd& coeffs);

// Upper bound on |spline| over Omega: max|c| divided by the smallest
// face-plane distance.
double spline_sup_bound(const BasisSystem& sys, const Eigen::VectorXd& coeffs);

// 64-bit FNV-1a, used to fingerprint grids and basis systems.
std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed = 1469598103934665603ull);

}  // namespace cconn
