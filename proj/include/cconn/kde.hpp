#pragma once

#include "cconn/point_process.hpp"
#include "cconn/spline_basis.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cconn {

inline constexpr double kDefaultBandwidth = 0.005;

// Heat kernel on the unit sphere as a truncated Legendre series:
//   K_t(u) = sum_l (2l+1)/(4 pi) exp(-l(l+1) t) P_l(u),  u = p . q
// Terms are kept while their coefficient is >= 1e-12, up to degree 400.
// Values are clamped at zero. A table in the chord variable sqrt(2(1-u))
// backs the fast lookup() path used by the estimators.
class HeatKernel {
 public:
  explicit HeatKernel(double bandwidth, int max_degree = 400, bool tabulate = true);

  double bandwidth() const { return bandwidth_; }
  int degree() const { return static_cast<int>(coefficients_.size()) - 1; }

  double operator()(double cos_angle) const;
  // Zero for points on different spheres.
  double operator()(const SurfacePoint& p, const SurfacePoint& q) const;
  // Linear interpolation in the table; falls back to the series without one.
  double lookup(double cos_angle) const;

 private:
  double bandwidth_;
  std::vector<double> coefficients_;
  std::vector<double> table_;
};

double heat_kernel(const SurfacePoint& p, const SurfacePoint& q, double bandwidth);

// Discretized connectivity Y on a grid: an n x n symmetric matrix.
struct IntensityField {
  std::string subject_id;
  Eigen::MatrixXd values;
  std::uint64_t grid_id = 0;
  std::size_t pair_count = 0;
  double bandwidth = kDefaultBandwidth;
};

struct KdeOptions {
  double bandwidth = kDefaultBandwidth;
  // Multiply the density by the pair count (count intensity instead of a
  // probability density over Omega x Omega).
  bool count_scale = false;
  // Use the tabulated kernel; exact series otherwise.
  bool tabulated = true;
};

// kernel(a, o) = K_t(grid_a, points_o); n x |points|.
Eigen::MatrixXd kernel_columns(const Grid& grid, std::span<const SurfacePoint> points, const HeatKernel& kernel,
                               bool tabulated);

// Y[a,b] = 1/(2|O|) sum_(x,y) [K(a,x)K(b,y) + K(a,y)K(b,x)].
IntensityField kde_estimate(const PointPattern& pattern, const Grid& grid, const KdeOptions& opts = {});
IntensityField kde_estimate(const PointPattern& pattern, const Grid& grid, const KdeOptions& opts,
                            const HeatKernel& kernel);

// W^T Y W for the estimate Y of `pattern`, without forming the n x n matrix.
// `left` is n x r.
Eigen::MatrixXd kde_projected(const PointPattern& pattern, const Grid& grid, const Eigen::MatrixXd& left,
                              const KdeOptions& opts, const HeatKernel& kernel);

struct CenteredSample {
  std::vector<IntensityField> fields;
  IntensityField mean;
};

// Subtracts the elementwise mean. Requires N >= 2 fields on one grid.
CenteredSample center_sample(std::vector<IntensityField> fields);

// Double grid quadrature w^2 sum_ab Y_ab.
double field_mass(const IntensityField& field, double grid_weight);

// <dir>/<subject>.ccmx plus <dir>/<subject>.json sidecar.
void write_field(const std::filesystem::path& dir, const IntensityField& field);
IntensityField read_field(const std::filesystem::path& ccmx_path);

}  // namespace cconn
