#pragma once

#include "cconn/kde.hpp"
#include "cconn/spline_basis.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cconn {

// Thin SVD Phi = U diag(D) V^T of a full-column-rank evaluation matrix.
struct SvdFactors {
  Eigen::MatrixXd U;  // n x M, orthonormal columns
  Eigen::VectorXd D;  // M, strictly positive, descending
  Eigen::MatrixXd V;  // M x M, orthogonal
};

// Throws NumericalError when the matrix is rank deficient.
SvdFactors decompose(const Eigen::MatrixXd& phi);

// Which Gram matrix defines orthonormality of the learned coefficients.
//   Grid:       w Phi^T Phi, the grid quadrature of the L2 inner product. Makes
//               the compressed representation exactly isometric.
//   Quadrature: the spherical-triangle quadrature Gram of the basis.
enum class MetricKind { Grid, Quadrature };

// Everything the alternating updates need, derived once from a basis: the SVD
// of the weighted evaluation matrix sqrt(w) Phi, the metric J, the roughness
// Q and their compressed forms. Immutable after construction.
class CompressedSystem {
 public:
  explicit CompressedSystem(const BasisSystem& sys, MetricKind metric = MetricKind::Grid);
  // Direct construction from factors; `weight` is the grid quadrature weight
  // already folded into `svd`.
  CompressedSystem(SvdFactors svd, Eigen::MatrixXd metric, Eigen::MatrixXd roughness, double weight);

  int size() const { return static_cast<int>(svd_.D.size()); }
  int grid_size() const { return static_cast<int>(svd_.U.rows()); }
  double weight() const { return weight_; }
  const SvdFactors& svd() const { return svd_; }
  const Eigen::MatrixXd& metric() const { return metric_; }
  const Eigen::LLT<Eigen::MatrixXd>& metric_factor() const { return metric_factor_; }
  const Eigen::MatrixXd& roughness() const { return roughness_; }
  // D^{-1} V^T Q V D^{-1}
  const Eigen::MatrixXd& compressed_roughness() const { return compressed_roughness_; }
  // D V^T: coefficient vector -> compressed coordinates.
  const Eigen::MatrixXd& image() const { return image_; }
  // V D^{-1}: compressed coordinates -> coefficient vector.
  const Eigen::MatrixXd& preimage() const { return preimage_; }
  std::uint64_t basis_hash() const { return basis_hash_; }

 private:
  void derive();

  SvdFactors svd_;
  Eigen::MatrixXd metric_;
  Eigen::LLT<Eigen::MatrixXd> metric_factor_;
  Eigen::MatrixXd roughness_;
  Eigen::MatrixXd compressed_roughness_;
  Eigen::MatrixXd image_;
  Eigen::MatrixXd preimage_;
  double weight_ = 1.0;
  std::uint64_t basis_hash_ = 0;
};

// Stack of per-subject compressed residuals G_{k,i} = U^T R_{k,i} U.
struct ResidualTensor {
  std::vector<Eigen::MatrixXd> slices;
  int step = 0;

  int subjects() const { return static_cast<int>(slices.size()); }
  double squared_norm() const;
  double norm() const;
};

// G_i = w U^T Y_i U for centered fields on the basis grid.
Eigen::MatrixXd compress_field(const Eigen::MatrixXd& values, const CompressedSystem& sys);
ResidualTensor compress(std::span<const IntensityField> fields, const CompressedSystem& sys);

// Centers already-compressed slices; compress is linear, so this equals
// compress(center_sample(fields)). `mean` receives the removed mean slice.
ResidualTensor center_compressed(std::vector<Eigen::MatrixXd> slices, Eigen::MatrixXd* mean = nullptr);

// P = D V^T C (C^T J C)^{-1} C^T J V D^{-1}; the zero matrix for empty C.
Eigen::MatrixXd deflation_projector(const Eigen::MatrixXd& previous, const CompressedSystem& sys);

// Per-step data shared by every c-update of one greedy step.
struct Deflation {
  Eigen::MatrixXd previous;     // C_{k-1}
  Eigen::MatrixXd projector;    // P_{k-1}
  Eigen::MatrixXd left;         // V D (I - P); the update matrix is left X left^T
  Eigen::MatrixXd constraints;  // J C_{k-1}; feasible c satisfy constraints^T c = 0
};

Deflation make_deflation(const Eigen::MatrixXd& previous, const CompressedSystem& sys);

struct SparsePowerOptions {
  double alpha1 = 0.0;   // roughness weight
  int alpha2 = 0;        // max nonzeros per component (<= 0 means dense)
  double tolerance = 1e-10;  // relative objective change
  int max_iterations = 500;
};

struct CUpdateResult {
  Eigen::VectorXd c;
  double objective = 0.0;
  std::vector<double> trace;  // objective after each accepted iteration
  int iterations = 0;
  bool degenerate = false;
};

// Sparse generalized eigenvector step: approximately maximizes
//   c^T [V D (I-P) (G x_3 s - alpha1 D^-1 V^T Q V D^-1) (I-P^T) D V^T] c
// subject to c^T J c = 1, |c|_0 <= alpha2 and J-orthogonality to the
// previous components, by truncated power iterations. The objective trace is
// non-decreasing.
CUpdateResult c_update(const ResidualTensor& residual, const Eigen::VectorXd& s, const SparsePowerOptions& opts,
                       const Deflation& deflation, const CompressedSystem& sys, const Eigen::VectorXd& c_init);

// Evaluates the c-update objective for a given c.
double c_objective(const ResidualTensor& residual, const Eigen::VectorXd& s, double alpha1,
                   const Deflation& deflation, const CompressedSystem& sys, const Eigen::VectorXd& c);

// s_i = (D V^T c)^T G_i (D V^T c).
Eigen::VectorXd s_update(const ResidualTensor& residual, const Eigen::VectorXd& c, const CompressedSystem& sys,
                         int workers = 1);

// G_i <- G_i - s_i (D V^T c)(D V^T c)^T; advances `step`.
void residual_update(ResidualTensor& residual, const Eigen::VectorXd& c, const Eigen::VectorXd& s,
                     const CompressedSystem& sys, int workers = 1);

struct ReducedRankBasis {
  Eigen::MatrixXd C;  // M x K
  double alpha1 = 0.0;
  int alpha2 = 0;
  std::uint64_t basis_hash = 0;

  int rank() const { return static_cast<int>(C.cols()); }
};

struct ScoreMatrix {
  Eigen::MatrixXd S;  // N x K
  std::vector<std::string> subject_ids;
};

struct FitOptions {
  int rank = 100;
  double alpha1 = 1e-8;
  int alpha2 = 40;
  double ao_tolerance = 1e-8;
  int ao_max_iterations = 200;
  double power_tolerance = 1e-10;
  int power_max_iterations = 500;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct StepDiagnostics {
  std::vector<double> objective_trace;  // AO objective sum_i s_i^2 - alpha1 c^T Q c per sweep
  int ao_iterations = 0;
  int power_iterations = 0;
  double residual_norm = 0.0;  // ||G_k||_F after the step
  bool degenerate = false;
};

struct FitDiagnostics {
  std::vector<double> residual_norms;  // ||G_k||_F for k = 0..K
  std::vector<StepDiagnostics> steps;
  std::string stop_reason;
};

struct FitResult {
  ReducedRankBasis basis;
  ScoreMatrix scores;
  FitDiagnostics diagnostics;
  ResidualTensor residual;  // G_K
  Eigen::MatrixXd mean_slice;  // compressed sample mean, when fit centered the data
};

// Greedy rank-K construction over compressed centered data G_0.
FitResult fit(ResidualTensor initial, const CompressedSystem& sys, const FitOptions& opts,
              std::vector<std::string> subject_ids = {});
// Compresses the fields and centers them in compressed space.
FitResult fit(std::span<const IntensityField> fields, const CompressedSystem& sys, const FitOptions& opts);

// 1 - ||G_K||^2 / ||G_0||^2 for the given rank (default: the fitted rank).
double variance_explained(const FitDiagnostics& diagnostics, int rank = -1);
// ||G_K||^2 / ||G_0||^2.
double residual_ratio(const FitDiagnostics& diagnostics, int rank = -1);

// Greedy projection of a centered field (or its compressed slice) on the
// learned components: project, subtract, repeat.
Eigen::VectorXd embed(const IntensityField& field, const ReducedRankBasis& basis, const CompressedSystem& sys);
Eigen::VectorXd embed_compressed(Eigen::MatrixXd slice, const ReducedRankBasis& basis, const CompressedSystem& sys);

// sum_k s_k (Phi c_k)(Phi c_k)^T on the grid, unweighted.
Eigen::MatrixXd reconstruct(const Eigen::VectorXd& scores, const ReducedRankBasis& basis, const BasisSystem& sys);

// Flips c so that its largest-magnitude entry (lowest index on ties) is positive.
void fix_sign(Eigen::VectorXd& c);

// Indices of the `count` largest |v| entries, ties broken by lower index,
// returned in ascending index order.
std::vector<int> top_support(const Eigen::VectorXd& v, int count);

}  // namespace cconn
