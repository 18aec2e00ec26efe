#include "cconn/stat_inference.hpp"

#include "cconn/errors.hpp"
#include "cconn/parallel.hpp"
#include "cconn/point_process.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace cconn {

namespace {

constexpr double kTieTolerance = 1e-12;

void check_options(const PermutationOptions& opts) {
  if (opts.permutations < 100) throw ConfigError("at least 100 permutations are required");
}

void check_rows(const Eigen::MatrixXd& S, const GroupLabels& labels) {
  if (S.rows() != labels.size()) throw DataError("label count does not match the number of subjects");
}

std::vector<int> permuted_labels(const GroupLabels& labels, std::uint64_t seed, int index) {
  std::vector<int> out = labels.labels();
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(index)));
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

std::vector<int> sort_order(std::span<const double> p) {
  std::vector<int> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p[a] < p[b]; });
  return order;
}

void check_p_values(std::span<const double> p) {
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("p-values must lie in [0, 1]");
  }
}

double median(std::vector<double> v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

GroupLabels::GroupLabels(std::vector<int> labels) : labels_(std::move(labels)) {
  for (int v : labels_) {
    if (v == 0) {
      ++n0_;
    } else if (v == 1) {
      ++n1_;
    } else {
      throw ConfigError("group labels must be 0 or 1");
    }
  }
  if (n0_ == 0 || n1_ == 0) throw ConfigError("both groups must be nonempty");
}

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& S) {
  const auto n = S.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = (S.row(i) - S.row(j)).norm();
    }
  }
  return d;
}

double mmd_statistic(const Eigen::MatrixXd& kernel, std::span<const int> labels) {
  double sums[3] = {0.0, 0.0, 0.0};  // within 0, within 1, between
  double counts[2] = {0.0, 0.0};
  const auto n = static_cast<Eigen::Index>(labels.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    counts[labels[i]] += 1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const int a = labels[i], b = labels[j];
      sums[a == b ? a : 2] += kernel(i, j);
    }
  }
  return sums[0] / (counts[0] * counts[0]) + sums[1] / (counts[1] * counts[1]) - sums[2] / (counts[0] * counts[1]);
}

double permutation_p_value(double observed, std::span<const double> permuted) {
  const double threshold = observed - kTieTolerance * std::abs(observed);
  const auto exceed = std::count_if(permuted.begin(), permuted.end(), [&](double v) { return v >= threshold; });
  return (1.0 + static_cast<double>(exceed)) / (1.0 + static_cast<double>(permuted.size()));
}

TestResult mmd_test(const Eigen::MatrixXd& S, const GroupLabels& labels, const PermutationOptions& opts,
                    MmdKernel kernel) {
  check_options(opts);
  check_rows(S, labels);
  TestResult out;
  out.n_permutations = opts.permutations;
  out.seed = opts.seed;

  const Eigen::MatrixXd d = pairwise_distances(S);
  std::vector<double> nonzero;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < d.cols(); ++j) {
      if (d(i, j) > 0.0) nonzero.push_back(d(i, j));
    }
  }
  if (nonzero.empty()) {
    warn("all embeddings are identical; MMD statistic is degenerate");
    out.statistic = 0.0;
    out.p_value = 1.0;
    return out;
  }
  Eigen::MatrixXd k;
  if (kernel == MmdKernel::Gaussian) {
    const double sigma = median(std::move(nonzero));
    k = (-d.array().square() / (2.0 * sigma * sigma)).exp().matrix();
  } else {
    k = -d;
  }

  out.statistic = mmd_statistic(k, labels.labels());
  std::vector<double> permuted(static_cast<std::size_t>(opts.permutations));
  parallel_for(permuted.size(), opts.workers, [&](std::size_t b) {
    const auto perm = permuted_labels(labels, opts.seed, static_cast<int>(b));
    permuted[b] = mmd_statistic(k, perm);
  });
  out.p_value = permutation_p_value(out.statistic, permuted);
  return out;
}

std::vector<TestResult> per_dimension_tests(const Eigen::MatrixXd& S, const GroupLabels& labels,
                                            const PermutationOptions& opts) {
  check_options(opts);
  check_rows(S, labels);
  const auto dims = S.cols();
  auto mean_gaps = [&](std::span<const int> lab) {
    Eigen::VectorXd sum0 = Eigen::VectorXd::Zero(dims), sum1 = Eigen::VectorXd::Zero(dims);
    for (Eigen::Index i = 0; i < S.rows(); ++i) {
      if (lab[i] == 0) {
        sum0 += S.row(i).transpose();
      } else {
        sum1 += S.row(i).transpose();
      }
    }
    return Eigen::VectorXd((sum1 / labels.group_size(1) - sum0 / labels.group_size(0)).cwiseAbs());
  };

  const Eigen::VectorXd observed = mean_gaps(labels.labels());
  Eigen::MatrixXd permuted(opts.permutations, dims);
  parallel_for(static_cast<std::size_t>(opts.permutations), opts.workers, [&](std::size_t b) {
    const auto perm = permuted_labels(labels, opts.seed, static_cast<int>(b));
    permuted.row(static_cast<Eigen::Index>(b)) = mean_gaps(perm).transpose();
  });

  std::vector<TestResult> out(static_cast<std::size_t>(dims));
  std::vector<double> column(static_cast<std::size_t>(opts.permutations));
  for (Eigen::Index k = 0; k < dims; ++k) {
    for (int b = 0; b < opts.permutations; ++b) column[b] = permuted(b, k);
    auto& r = out[static_cast<std::size_t>(k)];
    r.statistic = observed[k];
    r.p_value = permutation_p_value(observed[k], column);
    r.n_permutations = opts.permutations;
    r.seed = opts.seed;
  }
  return out;
}

Correction bh_fdr(std::span<const double> p, double q) {
  check_p_values(p);
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("FDR level must lie in (0, 1]");
  const auto m = p.size();
  Correction out{std::vector<bool>(m, false), std::vector<double>(m, 1.0)};
  if (m == 0) return out;
  const auto order = sort_order(p);
  const double md = static_cast<double>(m);
  std::size_t last = 0;  // 1-based largest i with p_(i) <= i q / m
  for (std::size_t i = 1; i <= m; ++i) {
    if (p[order[i - 1]] <= static_cast<double>(i) * q / md) last = i;
  }
  for (std::size_t i = 0; i < last; ++i) out.rejected[order[i]] = true;
  double running = 1.0;
  for (std::size_t i = m; i >= 1; --i) {
    running = std::min(running, std::min(1.0, p[order[i - 1]] * (md / static_cast<double>(i))));
    out.adjusted[order[i - 1]] = running;
  }
  return out;
}

Correction holm_correction(std::span<const double> p, double alpha) {
  check_p_values(p);
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("family-wise level must lie in (0, 1]");
  const auto m = p.size();
  Correction out{std::vector<bool>(m, false), std::vector<double>(m, 1.0)};
  const auto order = sort_order(p);
  const double md = static_cast<double>(m);
  bool rejecting = true;
  double running = 0.0;
  for (std::size_t i = 1; i <= m; ++i) {
    const double v = p[order[i - 1]];
    const double remaining = md - static_cast<double>(i) + 1.0;
    rejecting = rejecting && v <= alpha / remaining;
    out.rejected[order[i - 1]] = rejecting;
    running = std::max(running, std::min(1.0, remaining * v));
    out.adjusted[order[i - 1]] = running;
  }
  return out;
}

}  // namespace cconn
