#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace cconn {

// Two-group assignment of N subjects; both groups nonempty.
class GroupLabels {
 public:
  explicit GroupLabels(std::vector<int> labels);

  const std::vector<int>& labels() const { return labels_; }
  int size() const { return static_cast<int>(labels_.size()); }
  int group_size(int group) const { return group == 0 ? n0_ : n1_; }

 private:
  std::vector<int> labels_;
  int n0_ = 0;
  int n1_ = 0;
};

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;  // (1 + #{permuted >= observed}) / (1 + n_permutations)
  int n_permutations = 0;
  std::uint64_t seed = 0;
};

struct PermutationOptions {
  int permutations = 10000;
  std::uint64_t seed = 0;
  int workers = 1;
};

enum class MmdKernel {
  Gaussian,  // exp(-d^2 / 2 sigma^2), sigma = median nonzero pairwise distance
  Distance,  // -d, which turns MMD^2 into the energy distance
};

// Euclidean distances between the rows of S.
Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& S);

// Biased V-statistic MMD^2 for a precomputed kernel matrix.
double mmd_statistic(const Eigen::MatrixXd& kernel, std::span<const int> labels);

TestResult mmd_test(const Eigen::MatrixXd& S, const GroupLabels& labels, const PermutationOptions& opts = {},
                    MmdKernel kernel = MmdKernel::Gaussian);

// |mean of group 1 - mean of group 0| per column, each with a permutation p.
std::vector<TestResult> per_dimension_tests(const Eigen::MatrixXd& S, const GroupLabels& labels,
                                            const PermutationOptions& opts = {});

struct Correction {
  std::vector<bool> rejected;
  std::vector<double> adjusted;
};

// Benjamini-Hochberg step-up at FDR level q.
Correction bh_fdr(std::span<const double> p_values, double q);
// Holm step-down at family-wise level alpha.
Correction holm_correction(std::span<const double> p_values, double alpha);

// Add-one permutation p-value with ties counted as exceedances.
double permutation_p_value(double observed, std::span<const double> permuted);

}  // namespace cconn
