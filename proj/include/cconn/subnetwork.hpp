#pragma once

#include "cconn/greedy_basis.hpp"
#include "cconn/spline_basis.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace cconn {

// Labels of grid points by parcel. Parcels are indexed 0..P-1 in order of
// increasing external id; `areas` are point counts times the grid weight.
struct Parcellation {
  std::vector<int> parcel_of;  // per grid point, index into ids/names/areas
  std::vector<int> ids;
  std::vector<std::string> names;
  std::vector<int> counts;
  std::vector<double> areas;

  int size() const { return static_cast<int>(ids.size()); }
};

// Builds a parcellation from per-point external ids. Parcels named in
// `names_by_id` that receive no points are dropped with a warning.
Parcellation make_parcellation(const std::vector<int>& point_ids, const std::vector<std::pair<int, std::string>>& names_by_id,
                               double grid_weight);

// Sixteen parcels: hemisphere x sign pattern of (x, y, z).
Parcellation octant_parcellation(const Grid& grid);

// CSV with header `grid_index,parcel_id,parcel_name`, one row per grid point.
Parcellation read_parcellation(std::istream& in, const Grid& grid);
Parcellation read_parcellation(const std::filesystem::path& path, const Grid& grid);
void write_parcellation(std::ostream& out, const Parcellation& parc);

// Grid points where |Phi c| > 1e-10.
std::vector<bool> support_set(const Eigen::VectorXd& c, const BasisSystem& sys);

// A_ab = sum_k n_a^k n_b^k / (|E_a| |E_b|) w^2, with n_a^k the number of
// points of parcel a inside the support of component k. `selected` holds
// zero-based component indices.
Eigen::MatrixXd coarsen(std::span<const int> selected, const ReducedRankBasis& basis, const BasisSystem& sys,
                        const Parcellation& parc);

struct Edge {
  int a = 0;
  int b = 0;
  double weight = 0.0;
};

// Nonzero entries with a <= b, heaviest first (ties by row, then column),
// truncated to ceil(fraction * count).
std::vector<Edge> top_edges(const Eigen::MatrixXd& A, double fraction);

void write_adjacency_csv(std::ostream& out, const Eigen::MatrixXd& A, const Parcellation& parc);
void write_edges_csv(std::ostream& out, const std::vector<Edge>& edges, const Parcellation& parc);

}  // namespace cconn
