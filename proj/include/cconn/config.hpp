#pragma once

#include "cconn/greedy_basis.hpp"
#include "cconn/kde.hpp"
#include "cconn/point_process.hpp"
#include "cconn/spline_basis.hpp"
#include "cconn/stat_inference.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>

namespace cconn {

// Run configuration. Text form is one `key = value` per line; `#` starts a
// comment. Triangulations are written as `fib:<vertices>` (Delaunay mesh of a
// Fibonacci point set), `ico:<level>` or `file:<path>` (mesh file).
struct RunConfig {
  std::string left_mesh = "fib:410";
  std::string right_mesh = "fib:410";
  int grid_points = 4121;
  int quadrature_refinement = 1;
  std::string metric = "grid";  // grid | quadrature

  double bandwidth = kDefaultBandwidth;
  bool count_scale = false;

  int rank = 100;
  double alpha1 = 1e-8;
  int alpha2 = 40;
  double ao_tolerance = 1e-8;
  int ao_max_iterations = 200;
  double power_tolerance = 1e-10;
  int power_max_iterations = 500;

  int permutations = 10000;
  double fdr_level = 0.05;
  double fwer_level = 0.10;
  std::string mmd_kernel = "gaussian";  // gaussian | distance
  double edge_fraction = 0.5;

  std::uint64_t seed = 0;
  int workers = 1;

  int subjects = 20;
  double expected_pairs = 2000.0;
  int true_rank = 5;
  double leading_variance = 1.0;
  double decay_exponent = 3.0;
  double bump_width = 0.5;
};

// Sets one key; throws ConfigError for unknown keys or malformed values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
// Parses `key=value` (used for command-line overrides).
void apply_override(RunConfig& cfg, const std::string& assignment);

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);
void write_config(std::ostream& out, const RunConfig& cfg);

// Throws ConfigError naming the first invalid field.
void validate(const RunConfig& cfg);

SphericalTriangulation make_triangulation(const std::string& spec);
std::unique_ptr<BasisSystem> make_basis_system(const RunConfig& cfg);
MetricKind metric_kind(const RunConfig& cfg);
MmdKernel mmd_kernel(const RunConfig& cfg);
FitOptions fit_options(const RunConfig& cfg);
KdeOptions kde_options(const RunConfig& cfg);
LatentModelSpec latent_spec(const RunConfig& cfg);

}  // namespace cconn
