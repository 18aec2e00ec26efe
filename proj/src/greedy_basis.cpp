#include "cconn/greedy_basis.hpp"

#include "cconn/errors.hpp"
#include "cconn/parallel.hpp"
#include "cconn/point_process.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

namespace cconn {

namespace {

constexpr double kRankTolerance = 1e-10;
constexpr double kEarlyStop = 1e-12;
constexpr int kShiftIterations = 30;
constexpr int kInitIterations = 300;
constexpr double kInitTolerance = 1e-12;
constexpr Eigen::Index kColumnBlock = 64;

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

Eigen::MatrixXd dense(const SparseMatrix& m) { return Eigen::MatrixXd(m); }

// sum_i s_i G_i, summed in subject order per column block.
Eigen::MatrixXd weighted_sum(const ResidualTensor& g, const Eigen::VectorXd& s, int workers) {
  const Eigen::Index m = g.slices.front().rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, m);
  const std::size_t blocks = static_cast<std::size_t>((m + kColumnBlock - 1) / kColumnBlock);
  parallel_for(blocks, workers, [&](std::size_t b) {
    const Eigen::Index begin = static_cast<Eigen::Index>(b) * kColumnBlock;
    const Eigen::Index width = std::min(kColumnBlock, m - begin);
    auto block = out.middleCols(begin, width);
    for (int i = 0; i < g.subjects(); ++i) {
      if (s[i] != 0.0) block += s[i] * g.slices[i].middleCols(begin, width);
    }
  });
  return out;
}

// sum_i G_i (G_i v), summed in subject order.
Eigen::VectorXd squared_apply(const ResidualTensor& g, const Eigen::VectorXd& v, int workers) {
  std::vector<Eigen::VectorXd> parts(g.slices.size());
  parallel_for(g.slices.size(), workers, [&](std::size_t i) { parts[i] = g.slices[i] * (g.slices[i] * v); });
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
  for (const auto& p : parts) out += p;
  return out;
}

Eigen::VectorXd random_unit(Eigen::Index size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(size);
  for (auto& x : v) x = normal(rng);
  return v / v.norm();
}

// Feasible set of one c-update: c^T J c = 1 and constraints^T c = 0 on a
// given support.
class FeasibleSet {
 public:
  FeasibleSet(const CompressedSystem& sys, const Deflation& deflation)
      : sys_(sys), constraints_(deflation.constraints) {
    const Eigen::Index m = sys.size();
    if (constraints_.cols() > 0) {
      // L^{-1} J C = L^T C for the full support.
      const Eigen::MatrixXd b = sys.metric_factor().matrixU() * deflation.previous;
      full_basis_ = orthonormal_range(b);
    } else {
      full_basis_.resize(m, 0);
    }
    free_.reserve(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      if (constraints_.cols() == 0 || constraints_.row(j).cwiseAbs().maxCoeff() == 0.0) free_.push_back(static_cast<int>(j));
    }
  }

  const std::vector<int>& free_indices() const { return free_; }

  // Maximizer of g^T c over the feasible set restricted to `support`.
  std::optional<Eigen::VectorXd> solve(const std::vector<int>& support, const Eigen::VectorXd& g) const {
    const Eigen::Index m = sys_.size();
    const auto k = static_cast<Eigen::Index>(support.size());
    if (k == 0) return std::nullopt;
    if (k == m) {
      const auto& llt = sys_.metric_factor();
      Eigen::VectorXd h = llt.matrixL().solve(g);
      const double h_norm = h.norm();
      if (full_basis_.cols() > 0) h -= full_basis_ * (full_basis_.transpose() * h);
      const double y_norm = h.norm();
      if (!(h_norm > 0.0) || y_norm <= 1e-12 * h_norm) return std::nullopt;
      Eigen::VectorXd c = llt.matrixU().solve(h);
      return Eigen::VectorXd(c / y_norm);
    }
    Eigen::MatrixXd jss(k, k);
    Eigen::VectorXd gs(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      gs[a] = g[support[a]];
      for (Eigen::Index b = 0; b < k; ++b) jss(a, b) = sys_.metric()(support[a], support[b]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(jss);
    if (llt.info() != Eigen::Success) return std::nullopt;
    Eigen::VectorXd h = llt.matrixL().solve(gs);
    const double h_norm = h.norm();
    if (constraints_.cols() > 0) {
      Eigen::MatrixXd cs(k, constraints_.cols());
      for (Eigen::Index a = 0; a < k; ++a) cs.row(a) = constraints_.row(support[a]);
      if (cs.cwiseAbs().maxCoeff() > 0.0) {
        const Eigen::MatrixXd basis = orthonormal_range(llt.matrixL().solve(cs));
        h -= basis * (basis.transpose() * h);
      }
    }
    const double y_norm = h.norm();
    if (!(h_norm > 0.0) || y_norm <= 1e-12 * h_norm) return std::nullopt;
    const Eigen::VectorXd cs = llt.matrixU().solve(h) / y_norm;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(m);
    for (Eigen::Index a = 0; a < k; ++a) c[support[a]] = cs[a];
    return c;
  }

 private:
  static Eigen::MatrixXd orthonormal_range(const Eigen::MatrixXd& b) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(b);
    qr.setThreshold(kRankTolerance);
    const Eigen::Index r = qr.rank();
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(b.rows(), r);
    return q;
  }

  const CompressedSystem& sys_;
  const Eigen::MatrixXd& constraints_;
  Eigen::MatrixXd full_basis_;
  std::vector<int> free_;
};

// The c-update matrix A = left M left^T, applied without forming it.
class UpdateOperator {
 public:
  UpdateOperator(Eigen::MatrixXd inner, const Deflation& deflation) : inner_(std::move(inner)), left_(deflation.left) {}

  Eigen::VectorXd apply(const Eigen::VectorXd& c) const { return left_ * (inner_ * (left_.transpose() * c)); }
  double value(const Eigen::VectorXd& c) const {
    const Eigen::VectorXd y = left_.transpose() * c;
    return y.dot(inner_ * y);
  }
  Eigen::VectorXd diagonal() const { return (left_ * inner_).cwiseProduct(left_).rowwise().sum(); }
  bool zero() const { return inner_.cwiseAbs().maxCoeff() == 0.0; }

 private:
  Eigen::MatrixXd inner_;
  const Eigen::MatrixXd& left_;
};

// Shift sigma making A + sigma J positive semidefinite, from power iterations
// on J^{-1} A. Underestimates are caught by the monotonicity guard.
double estimate_shift(const UpdateOperator& op, const CompressedSystem& sys) {
  const auto& llt = sys.metric_factor();
  const auto& j = sys.metric();
  auto normalized = [&](Eigen::VectorXd v) {
    const double n = std::sqrt(std::max(0.0, v.dot(j * v)));
    return n > 0.0 ? Eigen::VectorXd(v / n) : v;
  };
  Eigen::VectorXd v = normalized(random_unit(sys.size(), 0x5eedULL));
  double dominant = 0.0;
  for (int it = 0; it < kShiftIterations; ++it) {
    Eigen::VectorXd w = llt.solve(op.apply(v));
    const double n = std::sqrt(std::max(0.0, w.dot(j * w)));
    if (!(n > 0.0)) break;
    dominant = n;
    v = w / n;
  }
  if (dominant == 0.0) return 0.0;
  const double rayleigh = op.value(v);
  if (rayleigh < 0.0) return 1.1 * dominant;
  // Largest eigenvalue of dominant*I - J^{-1}A gives the smallest of J^{-1}A.
  Eigen::VectorXd u = normalized(random_unit(sys.size(), 0x5eed2ULL));
  double spread = 0.0;
  for (int it = 0; it < kShiftIterations; ++it) {
    Eigen::VectorXd w = dominant * u - llt.solve(op.apply(u));
    const double n = std::sqrt(std::max(0.0, w.dot(j * w)));
    if (!(n > 0.0)) break;
    spread = n;
    u = w / n;
  }
  const double smallest = dominant - spread;
  if (smallest >= 0.0) return 0.0;
  return 1.1 * (-smallest) + 0.01 * dominant;
}

std::vector<int> support_of(const Eigen::VectorXd& c) {
  std::vector<int> out;
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    if (c[j] != 0.0) out.push_back(static_cast<int>(j));
  }
  return out;
}

std::vector<int> top_support_within(const Eigen::VectorXd& v, const std::vector<int>& pool, int count) {
  std::vector<int> order = pool;
  const auto k = std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max(0, count)));
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), [&](int a, int b) {
    const double fa = std::abs(v[a]), fb = std::abs(v[b]);
    return fa != fb ? fa > fb : a < b;
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

int effective_budget(int alpha2, int m) { return alpha2 <= 0 ? m : std::min(alpha2, m); }

bool is_feasible(const Eigen::VectorXd& c, const Deflation& d, const CompressedSystem& sys, int budget) {
  if (c.size() != sys.size() || !c.allFinite()) return false;
  if (static_cast<int>(support_of(c).size()) > budget) return false;
  if (std::abs(c.dot(sys.metric() * c) - 1.0) > 1e-10) return false;
  if (d.constraints.cols() > 0 && (d.constraints.transpose() * c).cwiseAbs().maxCoeff() > 1e-10) return false;
  return true;
}

// Closest feasible point to a dense direction, in the J inner product.
std::optional<Eigen::VectorXd> make_feasible(const Eigen::VectorXd& direction, const FeasibleSet& set,
                                             const CompressedSystem& sys, int budget) {
  const Eigen::VectorXd g = sys.metric() * direction;
  const int m = sys.size();
  if (budget >= m) {
    std::vector<int> all(m);
    std::iota(all.begin(), all.end(), 0);
    return set.solve(all, g);
  }
  if (auto c = set.solve(top_support(direction, budget), g)) return c;
  if (auto c = set.solve(top_support_within(direction, set.free_indices(), budget), g)) return c;
  return std::nullopt;
}

// alpha2 = 1: the best single coordinate by enumeration.
CUpdateResult single_coordinate(const UpdateOperator& op, const FeasibleSet& set, const CompressedSystem& sys) {
  const Eigen::VectorXd diag = op.diagonal();
  CUpdateResult out;
  int best = -1;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int j : set.free_indices()) {
    const double v = diag[j] / sys.metric()(j, j);
    if (v > best_value) {
      best_value = v;
      best = j;
    }
  }
  if (best < 0) {
    out.degenerate = true;
    return out;
  }
  out.c = Eigen::VectorXd::Zero(sys.size());
  out.c[best] = 1.0 / std::sqrt(sys.metric()(best, best));
  out.objective = op.value(out.c);
  out.trace = {out.objective};
  out.iterations = 1;
  return out;
}

}  // namespace

SvdFactors decompose(const Eigen::MatrixXd& phi) {
  if (phi.rows() < phi.cols() || phi.cols() == 0) throw NumericalError("evaluation matrix must have at least as many rows as columns");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(phi, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdFactors out{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  if (!(out.D.minCoeff() > kRankTolerance * out.D.maxCoeff())) {
    throw NumericalError("evaluation matrix is rank deficient; add grid points or coarsen the triangulation");
  }
  return out;
}

CompressedSystem::CompressedSystem(const BasisSystem& sys, MetricKind metric) {
  weight_ = sys.grid_weight();
  const Eigen::MatrixXd phi = std::sqrt(weight_) * Eigen::MatrixXd(sys.evaluation());
  svd_ = decompose(phi);
  metric_ = metric == MetricKind::Grid ? dense(sys.grid_gram()) : dense(sys.gram());
  roughness_ = dense(sys.roughness());
  basis_hash_ = sys.hash();
  derive();
}

CompressedSystem::CompressedSystem(SvdFactors svd, Eigen::MatrixXd metric, Eigen::MatrixXd roughness, double weight)
    : svd_(std::move(svd)), metric_(std::move(metric)), roughness_(std::move(roughness)), weight_(weight) {
  const auto m = svd_.D.size();
  if (svd_.U.cols() != m || svd_.V.rows() != m || svd_.V.cols() != m || metric_.rows() != m || metric_.cols() != m ||
      roughness_.rows() != m || roughness_.cols() != m) {
    throw DataError("inconsistent factor dimensions");
  }
  if (!(weight_ > 0.0)) throw ConfigError("grid weight must be positive");
  if (!(svd_.D.minCoeff() > kRankTolerance * svd_.D.maxCoeff())) throw NumericalError("singular values must be positive");
  basis_hash_ = fnv1a(svd_.D.data(), sizeof(double) * static_cast<std::size_t>(m));
  derive();
}

void CompressedSystem::derive() {
  metric_factor_.compute(metric_);
  if (metric_factor_.info() != Eigen::Success) throw NumericalError("metric matrix is not positive definite");
  image_ = svd_.D.asDiagonal() * svd_.V.transpose();
  preimage_ = svd_.V * svd_.D.cwiseInverse().asDiagonal();
  compressed_roughness_ = preimage_.transpose() * roughness_ * preimage_;
  compressed_roughness_ = 0.5 * (compressed_roughness_ + compressed_roughness_.transpose()).eval();
}

double ResidualTensor::squared_norm() const {
  double total = 0.0;
  for (const auto& g : slices) total += g.squaredNorm();
  return total;
}

double ResidualTensor::norm() const { return std::sqrt(squared_norm()); }

Eigen::MatrixXd compress_field(const Eigen::MatrixXd& values, const CompressedSystem& sys) {
  if (values.rows() != sys.grid_size() || values.cols() != sys.grid_size()) {
    throw DataError("field does not match the basis grid");
  }
  const auto& u = sys.svd().U;
  Eigen::MatrixXd g = sys.weight() * (u.transpose() * (values * u));
  return 0.5 * (g + g.transpose());
}

ResidualTensor compress(std::span<const IntensityField> fields, const CompressedSystem& sys) {
  ResidualTensor out;
  out.slices.reserve(fields.size());
  for (const auto& f : fields) out.slices.push_back(compress_field(f.values, sys));
  return out;
}

ResidualTensor center_compressed(std::vector<Eigen::MatrixXd> slices, Eigen::MatrixXd* mean) {
  if (slices.size() < 2) throw DataError("centering needs at least two subjects");
  Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(slices.front().rows(), slices.front().cols());
  for (const auto& g : slices) {
    if (g.rows() != avg.rows() || g.cols() != avg.cols()) throw DataError("compressed slices differ in size");
    avg += g;
  }
  avg /= static_cast<double>(slices.size());
  for (auto& g : slices) g -= avg;
  if (mean) *mean = avg;
  ResidualTensor out;
  out.slices = std::move(slices);
  return out;
}

Eigen::MatrixXd deflation_projector(const Eigen::MatrixXd& previous, const CompressedSystem& sys) {
  const int m = sys.size();
  if (previous.cols() == 0) return Eigen::MatrixXd::Zero(m, m);
  if (previous.rows() != m) throw DataError("component matrix does not match the basis");
  const Eigen::MatrixXd jc = sys.metric() * previous;
  const Eigen::MatrixXd inner = previous.transpose() * jc;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(inner);
  const Eigen::VectorXd d = ldlt.vectorD().cwiseAbs();
  if (ldlt.info() != Eigen::Success || !(d.minCoeff() > 1e-10 * std::max(1.0, d.maxCoeff()))) {
    throw NumericalError("previous components are not J-independent");
  }
  const Eigen::MatrixXd x = sys.image() * previous;
  return x * ldlt.solve(jc.transpose() * sys.preimage());
}

Deflation make_deflation(const Eigen::MatrixXd& previous, const CompressedSystem& sys) {
  Deflation d;
  d.previous = previous.cols() == 0 ? Eigen::MatrixXd(sys.size(), 0) : previous;
  d.projector = deflation_projector(d.previous, sys);
  const Eigen::MatrixXd complement = Eigen::MatrixXd::Identity(sys.size(), sys.size()) - d.projector;
  d.left = sys.image().transpose() * complement;
  d.constraints = sys.metric() * d.previous;
  return d;
}

double c_objective(const ResidualTensor& residual, const Eigen::VectorXd& s, double alpha1, const Deflation& deflation,
                   const CompressedSystem& sys, const Eigen::VectorXd& c) {
  Eigen::MatrixXd inner = weighted_sum(residual, s, 1);
  if (alpha1 != 0.0) inner -= alpha1 * sys.compressed_roughness();
  return UpdateOperator(std::move(inner), deflation).value(c);
}

CUpdateResult c_update(const ResidualTensor& residual, const Eigen::VectorXd& s, const SparsePowerOptions& opts,
                       const Deflation& deflation, const CompressedSystem& sys, const Eigen::VectorXd& c_init) {
  const int m = sys.size();
  if (residual.subjects() == 0 || s.size() != residual.subjects()) throw DataError("score vector does not match the tensor");
  if (!s.allFinite()) throw NumericalError("non-finite scores in c-update");
  for (const auto& g : residual.slices) {
    if (!all_finite(g)) throw NumericalError("non-finite residual in c-update");
  }
  if (!(opts.alpha1 >= 0.0)) throw ConfigError("alpha1 must be nonnegative");
  const int budget = effective_budget(opts.alpha2, m);

  Eigen::MatrixXd inner = weighted_sum(residual, s, 1);
  if (opts.alpha1 != 0.0) inner -= opts.alpha1 * sys.compressed_roughness();
  const UpdateOperator op(std::move(inner), deflation);
  const FeasibleSet set(sys, deflation);

  CUpdateResult out;
  if (op.zero()) {
    out.degenerate = true;
    auto c = is_feasible(c_init, deflation, sys, budget) ? std::optional<Eigen::VectorXd>(c_init)
                                                         : make_feasible(c_init, set, sys, budget);
    out.c = c ? *c : c_init;
    out.trace = {0.0};
    return out;
  }
  if (budget == 1 && m > 1) {
    out = single_coordinate(op, set, sys);
    if (out.degenerate) out.c = c_init;
    return out;
  }

  Eigen::VectorXd c;
  if (is_feasible(c_init, deflation, sys, budget)) {
    c = c_init;
  } else if (auto start = make_feasible(c_init, set, sys, budget)) {
    c = *start;
  } else {
    out.c = c_init;
    out.degenerate = true;
    return out;
  }

  const double shift = estimate_shift(op, sys);
  std::vector<int> all;
  if (budget >= m) {
    all.resize(m);
    std::iota(all.begin(), all.end(), 0);
  }
  const bool constrained = deflation.previous.cols() > 0;
  Eigen::LDLT<Eigen::MatrixXd> prev_gram;
  if (constrained) prev_gram.compute(deflation.previous.transpose() * deflation.constraints);

  double f = op.value(c);
  out.trace.push_back(f);
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    const Eigen::VectorXd g = op.apply(c) + shift * (sys.metric() * c);
    if (!g.allFinite()) throw NumericalError("non-finite iterate in c-update");
    if (g.norm() == 0.0) break;

    std::vector<std::vector<int>> supports;
    if (budget >= m) {
      supports.push_back(all);
    } else {
      const Eigen::VectorXd u = sys.metric_factor().solve(g);
      supports.push_back(top_support(u, budget));
      if (constrained) {
        const Eigen::VectorXd projected = u - deflation.previous * prev_gram.solve(deflation.previous.transpose() * g);
        supports.push_back(top_support(projected, budget));
        supports.push_back(top_support_within(projected, set.free_indices(), budget));
      }
      supports.push_back(support_of(c));
    }

    std::optional<Eigen::VectorXd> best;
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < supports.size(); ++k) {
      if (std::find(supports.begin(), supports.begin() + static_cast<std::ptrdiff_t>(k), supports[k]) !=
          supports.begin() + static_cast<std::ptrdiff_t>(k)) {
        continue;
      }
      auto candidate = set.solve(supports[k], g);
      if (!candidate) continue;
      const double v = op.value(*candidate);
      if (v > best_value) {
        best_value = v;
        best = std::move(candidate);
      }
    }
    if (!best || !(best_value >= f)) break;
    const double change = best_value - f;
    c = std::move(*best);
    f = best_value;
    out.trace.push_back(f);
    if (change <= opts.tolerance * std::max(std::abs(f), std::numeric_limits<double>::min())) {
      ++it;
      break;
    }
  }
  out.c = std::move(c);
  out.objective = f;
  out.iterations = it;
  return out;
}

Eigen::VectorXd s_update(const ResidualTensor& residual, const Eigen::VectorXd& c, const CompressedSystem& sys,
                         int workers) {
  const Eigen::VectorXd x = sys.image() * c;
  Eigen::VectorXd s(residual.subjects());
  parallel_for(residual.slices.size(), workers, [&](std::size_t i) { s[i] = x.dot(residual.slices[i] * x); });
  return s;
}

void residual_update(ResidualTensor& residual, const Eigen::VectorXd& c, const Eigen::VectorXd& s,
                     const CompressedSystem& sys, int workers) {
  if (s.size() != residual.subjects()) throw DataError("score vector does not match the tensor");
  const Eigen::VectorXd x = sys.image() * c;
  const Eigen::MatrixXd outer = x * x.transpose();
  parallel_for(residual.slices.size(), workers, [&](std::size_t i) {
    if (s[i] != 0.0) residual.slices[i] -= s[i] * outer;
  });
  ++residual.step;
}

void fix_sign(Eigen::VectorXd& c) {
  if (c.size() == 0) return;
  Eigen::Index arg = 0;
  c.cwiseAbs().maxCoeff(&arg);
  if (c[arg] < 0.0) c = -c;
}

std::vector<int> top_support(const Eigen::VectorXd& v, int count) {
  std::vector<int> all(static_cast<std::size_t>(v.size()));
  std::iota(all.begin(), all.end(), 0);
  return top_support_within(v, all, count);
}

namespace {

// Leading eigenvector of (I-P) (sum_i G_i^2) (I-P)^T, mapped to coefficients.
Eigen::VectorXd initial_direction(const ResidualTensor& g, const Deflation& d, const CompressedSystem& sys,
                                  std::uint64_t seed, int workers) {
  const Eigen::MatrixXd& p = d.projector;
  auto apply = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd w = v - p.transpose() * v;
    w = squared_apply(g, w, workers);
    return Eigen::VectorXd(w - p * w);
  };
  Eigen::VectorXd x = random_unit(sys.size(), seed);
  double previous = 0.0;
  for (int it = 0; it < kInitIterations; ++it) {
    Eigen::VectorXd y = apply(x);
    const double n = y.norm();
    if (!(n > 0.0)) break;
    x = y / n;
    if (std::abs(n - previous) <= kInitTolerance * n) break;
    previous = n;
  }
  return sys.preimage() * x;
}

double ao_objective(const Eigen::VectorXd& s, const Eigen::VectorXd& c, double alpha1, const CompressedSystem& sys) {
  double f = s.squaredNorm();
  if (alpha1 != 0.0) f -= alpha1 * c.dot(sys.roughness() * c);
  return f;
}

}  // namespace

FitResult fit(ResidualTensor initial, const CompressedSystem& sys, const FitOptions& opts,
              std::vector<std::string> subject_ids) {
  if (opts.rank < 1) throw ConfigError("rank K must be at least 1");
  if (opts.alpha2 < 1) throw ConfigError("alpha2 must be at least 1");
  if (!(opts.alpha1 >= 0.0)) throw ConfigError("alpha1 must be nonnegative");
  if (!(opts.ao_tolerance > 0.0) || opts.ao_max_iterations < 1) throw ConfigError("invalid AO stopping rule");
  if (initial.subjects() == 0) throw DataError("no subjects to fit");
  for (const auto& g : initial.slices) {
    if (g.rows() != sys.size() || g.cols() != sys.size()) throw DataError("compressed slice does not match the basis");
    if (!all_finite(g)) throw NumericalError("non-finite compressed data");
  }
  if (subject_ids.empty()) {
    for (int i = 0; i < initial.subjects(); ++i) subject_ids.push_back("subject" + std::to_string(i));
  }
  if (static_cast<int>(subject_ids.size()) != initial.subjects()) throw DataError("subject id count mismatch");

  const int m = sys.size();
  const int n = initial.subjects();
  FitResult out;
  out.basis.alpha1 = opts.alpha1;
  out.basis.alpha2 = opts.alpha2;
  out.basis.basis_hash = sys.basis_hash();
  out.scores.subject_ids = std::move(subject_ids);
  out.residual = std::move(initial);
  out.residual.step = 0;

  const double g0 = out.residual.norm();
  out.diagnostics.residual_norms.push_back(g0);
  std::vector<Eigen::VectorXd> components;
  std::vector<Eigen::VectorXd> score_columns;
  const SparsePowerOptions popts{opts.alpha1, opts.alpha2, opts.power_tolerance, opts.power_max_iterations};
  out.diagnostics.stop_reason = "reached rank " + std::to_string(opts.rank);

  for (int k = 1; k <= opts.rank; ++k) {
    const double current = out.diagnostics.residual_norms.back();
    if (g0 == 0.0 || current < kEarlyStop * g0) {
      out.diagnostics.stop_reason = "residual exhausted before step " + std::to_string(k);
      break;
    }
    Eigen::MatrixXd previous(m, static_cast<Eigen::Index>(components.size()));
    for (std::size_t j = 0; j < components.size(); ++j) previous.col(static_cast<Eigen::Index>(j)) = components[j];
    const Deflation deflation = make_deflation(previous, sys);
    const FeasibleSet set(sys, deflation);

    StepDiagnostics step;
    const Eigen::VectorXd direction =
        initial_direction(out.residual, deflation, sys, derive_seed(opts.seed, static_cast<std::uint64_t>(k)), opts.workers);
    auto start = make_feasible(direction, set, sys, effective_budget(opts.alpha2, m));
    if (!start) {
      out.diagnostics.stop_reason = "no feasible component at step " + std::to_string(k);
      break;
    }
    Eigen::VectorXd c = *start;
    Eigen::VectorXd s = s_update(out.residual, c, sys, opts.workers);
    double f = ao_objective(s, c, opts.alpha1, sys);
    step.objective_trace.push_back(f);
    for (int it = 0; it < opts.ao_max_iterations; ++it) {
      if (s.cwiseAbs().maxCoeff() == 0.0) {
        step.degenerate = true;
        break;
      }
      CUpdateResult update = c_update(out.residual, s, popts, deflation, sys, c);
      step.power_iterations += update.iterations;
      if (update.degenerate) {
        step.degenerate = true;
        break;
      }
      const Eigen::VectorXd s_new = s_update(out.residual, update.c, sys, opts.workers);
      const double f_new = ao_objective(s_new, update.c, opts.alpha1, sys);
      if (!std::isfinite(f_new) || !s_new.allFinite()) {
        throw NumericalError("non-finite value at step " + std::to_string(k));
      }
      ++step.ao_iterations;
      if (f_new < f) break;
      const double change = f_new - f;
      c = std::move(update.c);
      s = s_new;
      f = f_new;
      step.objective_trace.push_back(f);
      if (change <= opts.ao_tolerance * std::max(std::abs(f), std::numeric_limits<double>::min())) break;
    }
    fix_sign(c);
    s = s_update(out.residual, c, sys, opts.workers);
    if (!c.allFinite() || !s.allFinite()) throw NumericalError("non-finite value at step " + std::to_string(k));
    residual_update(out.residual, c, s, sys, opts.workers);
    step.residual_norm = out.residual.norm();
    out.diagnostics.residual_norms.push_back(step.residual_norm);
    out.diagnostics.steps.push_back(std::move(step));
    components.push_back(std::move(c));
    score_columns.push_back(std::move(s));
  }

  const auto rank = static_cast<Eigen::Index>(components.size());
  out.basis.C.resize(m, rank);
  out.scores.S.resize(n, rank);
  for (Eigen::Index k = 0; k < rank; ++k) {
    out.basis.C.col(k) = components[k];
    out.scores.S.col(k) = score_columns[k];
  }
  return out;
}

FitResult fit(std::span<const IntensityField> fields, const CompressedSystem& sys, const FitOptions& opts) {
  std::vector<Eigen::MatrixXd> slices;
  std::vector<std::string> ids;
  slices.reserve(fields.size());
  for (const auto& f : fields) {
    slices.push_back(compress_field(f.values, sys));
    ids.push_back(f.subject_id);
  }
  Eigen::MatrixXd mean;
  ResidualTensor g = center_compressed(std::move(slices), &mean);
  FitResult out = fit(std::move(g), sys, opts, std::move(ids));
  out.mean_slice = std::move(mean);
  return out;
}

double residual_ratio(const FitDiagnostics& diagnostics, int rank) {
  const auto& r = diagnostics.residual_norms;
  if (r.empty()) return 1.0;
  const int last = static_cast<int>(r.size()) - 1;
  const int k = rank < 0 ? last : std::min(rank, last);
  if (r[0] == 0.0) return 0.0;
  return (r[k] * r[k]) / (r[0] * r[0]);
}

double variance_explained(const FitDiagnostics& diagnostics, int rank) {
  if (rank == 0 || diagnostics.residual_norms.empty() || diagnostics.residual_norms[0] == 0.0) return 0.0;
  return 1.0 - residual_ratio(diagnostics, rank);
}

Eigen::VectorXd embed_compressed(Eigen::MatrixXd slice, const ReducedRankBasis& basis, const CompressedSystem& sys) {
  if (slice.rows() != sys.size() || slice.cols() != sys.size()) throw DataError("compressed slice does not match the basis");
  if (basis.C.rows() != sys.size()) throw DataError("components do not match the basis");
  Eigen::VectorXd scores(basis.rank());
  for (int k = 0; k < basis.rank(); ++k) {
    const Eigen::VectorXd x = sys.image() * basis.C.col(k);
    scores[k] = x.dot(slice * x);
    slice.noalias() -= scores[k] * (x * x.transpose());
  }
  return scores;
}

Eigen::VectorXd embed(const IntensityField& field, const ReducedRankBasis& basis, const CompressedSystem& sys) {
  if (basis.basis_hash != 0 && sys.basis_hash() != 0 && basis.basis_hash != sys.basis_hash()) {
    throw DataError("components were fitted on a different basis");
  }
  return embed_compressed(compress_field(field.values, sys), basis, sys);
}

Eigen::MatrixXd reconstruct(const Eigen::VectorXd& scores, const ReducedRankBasis& basis, const BasisSystem& sys) {
  if (scores.size() != basis.rank()) throw DataError("score vector does not match the rank");
  if (basis.C.rows() != sys.size()) throw DataError("components do not match the basis");
  const Eigen::MatrixXd xi = sys.evaluation() * basis.C;
  return xi * scores.asDiagonal() * xi.transpose();
}

}  // namespace cconn
