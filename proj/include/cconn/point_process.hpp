#pragma once

#include "cconn/spline_basis.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace cconn {

struct EndpointPair {
  SurfacePoint first;
  SurfacePoint second;
};

// Lexicographic by hemisphere, then x, y, z.
bool point_less(const SurfacePoint& a, const SurfacePoint& b);
EndpointPair canonical_pair(const SurfacePoint& a, const SurfacePoint& b);

// Endpoint pairs of one subject's streamlines, stored as unordered pairs in
// canonical order.
struct PointPattern {
  std::string subject_id;
  std::vector<EndpointPair> pairs;

  void add(const SurfacePoint& a, const SurfacePoint& b) { pairs.push_back(canonical_pair(a, b)); }
};

bool operator==(const SurfacePoint& a, const SurfacePoint& b);
bool operator==(const EndpointPair& a, const EndpointPair& b);
bool operator==(const PointPattern& a, const PointPattern& b);

// Symmetric nonnegative intensity on Omega x Omega with a known finite bound.
class IntensityFunction {
 public:
  virtual ~IntensityFunction() = default;
  virtual double operator()(const SurfacePoint& a, const SurfacePoint& b) const = 0;
  virtual double upper_bound() const = 0;
};

// Karhunen-Loeve style generator in spline coordinates. The mean is the
// separable function m(w1) m(w2) with m = sum_j mean_coeffs[j] b_j.
struct LatentModel {
  Eigen::VectorXd mean_coeffs;      // M
  Eigen::MatrixXd components;       // M x K*, orthonormal under the chosen metric
  Eigen::VectorXd score_variances;  // K*, zero-mean Gaussian scores
  double baseline_rate = 1.0;

  int rank() const { return static_cast<int>(components.cols()); }
};

struct LatentModelSpec {
  int components = 5;
  double leading_variance = 1.0;
  double decay_exponent = 3.0;  // rho_k = leading_variance * k^-decay_exponent
  double width = 0.5;           // angular radius (rad) of each component bump
  double mean_level = 0.0;      // <= 0 picks a level that keeps clipping rare
  double baseline_rate = 1.0;
};

// Random localized bumps, orthonormalized under `metric` (dense M x M SPD).
LatentModel make_latent_model(const BasisSystem& sys, const Eigen::MatrixXd& metric, const LatentModelSpec& spec,
                              std::uint64_t seed);

// Throws ModelError unless components^T metric components = I within 1e-8.
void validate_latent_model(const LatentModel& model, const Eigen::MatrixXd& metric);

// One draw U_i: baseline * max(0, mu + sum_k z_k xi_k (x) xi_k).
class SampledIntensity final : public IntensityFunction {
 public:
  SampledIntensity(const LatentModel& model, const BasisSystem& sys, Eigen::VectorXd scores);

  double operator()(const SurfacePoint& a, const SurfacePoint& b) const override;
  double upper_bound() const override { return bound_; }

  const Eigen::VectorXd& scores() const { return scores_; }
  // Values on the basis system's grid (n x n), exactly symmetric.
  Eigen::MatrixXd on_grid() const;
  // Same as on_grid() but without the clip at zero; useful to measure how
  // much mass the clip removes.
  Eigen::MatrixXd on_grid_unclipped() const;

 private:
  const LatentModel* model_;
  const BasisSystem* sys_;
  Eigen::VectorXd scores_;
  double bound_ = 0.0;
};

struct IntensityDraw {
  Eigen::VectorXd scores;
  SampledIntensity intensity;
};

IntensityDraw sample_intensity(const LatentModel& model, const BasisSystem& sys, std::uint64_t seed);

// Inhomogeneous Poisson pattern by thinning. The pair count is
// Poisson(expected_count); each pair is drawn proportionally to the
// intensity by rejection from uniform pairs on Omega x Omega.
PointPattern sample_pattern(const IntensityFunction& intensity, double expected_count, std::uint64_t seed,
                            std::string subject_id = {});

// CSV: subject_id,hemi1,x1,y1,z1,hemi2,x2,y2,z2
std::vector<PointPattern> read_endpoints(std::istream& in);
std::vector<PointPattern> read_endpoints(const std::filesystem::path& path);
void write_endpoints(std::ostream& out, const std::vector<PointPattern>& patterns);

// Independent stream for subject `index` derived from a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace cconn
