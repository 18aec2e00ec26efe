#include "cconn/errors.hpp"
#include "cconn/greedy_basis.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

using namespace cconn;

namespace {

struct Fixture {
  BasisSystem basis;
  CompressedSystem sys;
  Eigen::MatrixXd J;

  explicit Fixture(int level = 1, int grid = 600, MetricKind metric = MetricKind::Grid)
      : basis(build_icosphere(level), build_icosphere(level), make_fibonacci_grid(grid)), sys(basis, metric),
        J(sys.metric()) {}
  int m() const { return sys.size(); }
};

Eigen::MatrixXd random_symmetric(int m, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(m, m);
  for (int i = 0; i < m * m; ++i) a.data()[i] = g(rng);
  return 0.5 * (a + a.transpose());
}

Eigen::VectorXd random_vector(int m, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(m);
  for (auto& x : v) x = g(rng);
  return v;
}

Eigen::MatrixXd orthonormal_in(const Eigen::MatrixXd& J, int k, std::mt19937_64& rng) {
  Eigen::MatrixXd c(J.rows(), k);
  for (int j = 0; j < k; ++j) c.col(j) = random_vector(static_cast<int>(J.rows()), rng);
  const Eigen::MatrixXd gram = c.transpose() * J * c;
  const Eigen::MatrixXd l = gram.llt().matrixL();
  return c * l.transpose().inverse();
}

double metric_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::MatrixXd& J) {
  return std::abs(a.dot(J * b)) / std::sqrt(a.dot(J * a) * b.dot(J * b));
}

int nonzeros(const Eigen::VectorXd& v) { return static_cast<int>((v.array() != 0.0).count()); }

// N subjects whose compressed slices are exact combinations of K ground-truth
// components with zero-mean scores of variance k^-3.
ResidualTensor low_rank_sample(const Fixture& f, int subjects, int components, std::uint64_t seed,
                               Eigen::MatrixXd* truth = nullptr) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  const Eigen::MatrixXd c = orthonormal_in(f.J, components, rng);
  if (truth) *truth = c;
  const Eigen::MatrixXd x = f.sys.image() * c;
  ResidualTensor t;
  for (int i = 0; i < subjects; ++i) {
    Eigen::VectorXd z(components);
    for (int k = 0; k < components; ++k) z[k] = std::pow(k + 1.0, -1.5) * g(rng);
    t.slices.push_back(x * z.asDiagonal() * x.transpose());
  }
  return t;
}

FitOptions dense_options(int rank, int m) {
  FitOptions o;
  o.rank = rank;
  o.alpha1 = 0.0;
  o.alpha2 = m;
  return o;
}

}  // namespace

TEST_CASE("decompose reconstructs the matrix") {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd phi = Eigen::MatrixXd::Random(60, 25);
  const auto f = decompose(phi);
  const Eigen::MatrixXd back = f.U * f.D.asDiagonal() * f.V.transpose();
  CHECK((phi - back).norm() / phi.norm() <= 1e-10);
  CHECK(f.D.minCoeff() > 0.0);
  for (int i = 1; i < f.D.size(); ++i) CHECK(f.D[i] <= f.D[i - 1]);
  CHECK((f.U.transpose() * f.U - Eigen::MatrixXd::Identity(25, 25)).cwiseAbs().maxCoeff() < 1e-12);

  Eigen::MatrixXd deficient = phi;
  deficient.col(3) = deficient.col(1) + deficient.col(2);
  CHECK_THROWS_AS(decompose(deficient), NumericalError);
  CHECK_THROWS_AS(decompose(Eigen::MatrixXd::Random(5, 8)), NumericalError);
}

TEST_CASE("grid metric is the weighted evaluation Gram") {
  const Fixture f;
  const Eigen::MatrixXd grid_gram = Eigen::MatrixXd(f.basis.grid_gram());
  CHECK((f.J - grid_gram).cwiseAbs().maxCoeff() < 1e-10 * grid_gram.cwiseAbs().maxCoeff());
  CHECK((f.sys.image() * f.sys.preimage() - Eigen::MatrixXd::Identity(f.m(), f.m())).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("compress_field examples") {
  const Fixture f;
  const int n = f.basis.grid_size();
  CHECK(compress_field(Eigen::MatrixXd::Zero(n, n), f.sys).cwiseAbs().maxCoeff() == 0.0);

  std::mt19937_64 rng(2);
  const Eigen::VectorXd c = random_vector(f.m(), rng);
  const Eigen::VectorXd values = f.basis.evaluation() * c;
  const Eigen::MatrixXd slice = compress_field(values * values.transpose(), f.sys);
  const Eigen::VectorXd x = f.sys.image() * c;
  CHECK((slice - x * x.transpose()).cwiseAbs().maxCoeff() < 1e-10 * x.squaredNorm());

  const Eigen::MatrixXd y = random_symmetric(n, rng);
  const Eigen::MatrixXd g = compress_field(y, f.sys);
  CHECK((g - g.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * g.cwiseAbs().maxCoeff());
}

TEST_CASE("compressed centering matches field centering") {
  const Fixture f;
  const int n = f.basis.grid_size();
  std::mt19937_64 rng(3);
  std::vector<IntensityField> fields(4);
  std::vector<Eigen::MatrixXd> slices;
  for (auto& field : fields) {
    field.values = random_symmetric(n, rng);
    field.grid_id = f.basis.grid().hash();
    slices.push_back(compress_field(field.values, f.sys));
  }
  const auto centered = center_sample(fields);
  const ResidualTensor direct = compress(centered.fields, f.sys);
  Eigen::MatrixXd mean;
  const ResidualTensor fast = center_compressed(slices, &mean);
  for (int i = 0; i < 4; ++i) CHECK((direct.slices[i] - fast.slices[i]).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((mean - compress_field(centered.mean.values, f.sys)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(center_compressed({slices[0]}), DataError);
}

TEST_CASE("deflation projector") {
  const Fixture f;
  CHECK(deflation_projector(Eigen::MatrixXd(f.m(), 0), f.sys).cwiseAbs().maxCoeff() == 0.0);
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd c = orthonormal_in(f.J, 4, rng);
  const Eigen::MatrixXd p = deflation_projector(c, f.sys);
  CHECK((p * p - p).cwiseAbs().maxCoeff() < 1e-8);
  for (int j = 0; j < 4; ++j) {
    const Eigen::VectorXd w = f.sys.image() * c.col(j);
    CHECK((p * w - w).norm() < 1e-8 * w.norm());
  }
}

TEST_CASE("c_update recovers a rank-one slice") {
  const Fixture f(0, 300);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd u = random_vector(f.m(), rng);
    const Eigen::VectorXd x = f.sys.image() * u;
    ResidualTensor t;
    t.slices.push_back(x * x.transpose());
    const auto defl = make_deflation(Eigen::MatrixXd(f.m(), 0), f.sys);
    SparsePowerOptions opts;
    opts.alpha2 = f.m();
    const auto r = c_update(t, Eigen::VectorXd::Ones(1), opts, defl, f.sys, random_vector(f.m(), rng));
    CHECK(metric_cosine(r.c, u, f.J) >= 0.999);

    // Dense generalized eigenvector of the same pencil.
    const Eigen::MatrixXd a = f.sys.image().transpose() * t.slices[0] * f.sys.image();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(a, f.J);
    CHECK(metric_cosine(r.c, ges.eigenvectors().col(f.m() - 1), f.J) >= 0.999);
  }
}

TEST_CASE("c_update with one nonzero matches enumeration") {
  const Fixture f(0, 300);
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    ResidualTensor t;
    for (int i = 0; i < 3; ++i) t.slices.push_back(random_symmetric(f.m(), rng));
    const Eigen::VectorXd s = random_vector(3, rng);
    const auto defl = make_deflation(Eigen::MatrixXd(f.m(), 0), f.sys);
    SparsePowerOptions opts;
    opts.alpha2 = 1;
    opts.alpha1 = 0.01;
    const auto r = c_update(t, s, opts, defl, f.sys, random_vector(f.m(), rng));
    CHECK(nonzeros(r.c) == 1);
    int best = -1;
    double best_value = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < f.m(); ++j) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(f.m());
      e[j] = 1.0 / std::sqrt(f.J(j, j));
      const double v = c_objective(t, s, opts.alpha1, defl, f.sys, e);
      if (v > best_value) best_value = v, best = j;
    }
    Eigen::Index chosen;
    r.c.cwiseAbs().maxCoeff(&chosen);
    CHECK(chosen == best);
    CHECK(r.objective == doctest::Approx(best_value).epsilon(1e-10));
  }
}

TEST_CASE("c_update on a zero tensor is degenerate") {
  const Fixture f(0, 300);
  ResidualTensor t;
  t.slices.assign(2, Eigen::MatrixXd::Zero(f.m(), f.m()));
  const auto defl = make_deflation(Eigen::MatrixXd(f.m(), 0), f.sys);
  SparsePowerOptions opts;
  opts.alpha2 = 5;
  std::mt19937_64 rng(7);
  const auto r = c_update(t, Eigen::VectorXd::Ones(2), opts, defl, f.sys, random_vector(f.m(), rng));
  CHECK(r.degenerate);
  CHECK(r.objective == 0.0);
  CHECK(r.c.dot(f.J * r.c) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("c_update rejects non-finite input") {
  const Fixture f(0, 300);
  ResidualTensor t;
  t.slices.push_back(Eigen::MatrixXd::Identity(f.m(), f.m()));
  t.slices[0](1, 1) = std::numeric_limits<double>::quiet_NaN();
  const auto defl = make_deflation(Eigen::MatrixXd(f.m(), 0), f.sys);
  CHECK_THROWS_AS(c_update(t, Eigen::VectorXd::Ones(1), SparsePowerOptions{}, defl, f.sys, Eigen::VectorXd::Ones(f.m())),
                  NumericalError);
}

TEST_CASE("c_update feasibility and monotone trace") {
  const Fixture f;
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const int previous = trial % 4;
    const Eigen::MatrixXd c_prev = orthonormal_in(f.J, previous, rng);
    const auto defl = make_deflation(c_prev, f.sys);
    ResidualTensor t;
    for (int i = 0; i < 4; ++i) t.slices.push_back(random_symmetric(f.m(), rng));
    SparsePowerOptions opts;
    opts.alpha2 = 3 + trial;
    opts.alpha1 = trial % 2 == 0 ? 0.0 : 1e-3;
    const auto r = c_update(t, random_vector(4, rng), opts, defl, f.sys, random_vector(f.m(), rng));
    CHECK(r.c.dot(f.J * r.c) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(nonzeros(r.c) <= opts.alpha2);
    if (previous > 0) CHECK((c_prev.transpose() * f.J * r.c).cwiseAbs().maxCoeff() < 1e-8);
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] >= r.trace[i - 1] - 1e-12 * std::abs(r.trace[i - 1]));
  }
}

TEST_CASE("s_update examples") {
  const Fixture f;
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd c = orthonormal_in(f.J, 1, rng);
  const Eigen::VectorXd x = f.sys.image() * c.col(0);
  ResidualTensor t;
  t.slices.push_back(x * x.transpose());
  t.slices.push_back(Eigen::MatrixXd::Zero(f.m(), f.m()));
  t.slices.push_back(random_symmetric(f.m(), rng));
  const Eigen::VectorXd s = s_update(t, c.col(0), f.sys);
  CHECK(s[0] == doctest::Approx(std::pow(x.squaredNorm(), 2)));
  CHECK(s[1] == 0.0);
  CHECK(s[2] == doctest::Approx(x.dot(t.slices[2] * x)));
  CHECK(s_update(t, -c.col(0), f.sys) == s);
  CHECK(s_update(t, c.col(0), f.sys, 3) == s);
}

TEST_CASE("residual_update examples") {
  const Fixture f;
  std::mt19937_64 rng(10);
  const Eigen::VectorXd c = orthonormal_in(f.J, 1, rng).col(0);
  const Eigen::VectorXd x = f.sys.image() * c;
  ResidualTensor t;
  t.slices.push_back(2.5 * x * x.transpose());
  t.slices.push_back(random_symmetric(f.m(), rng));
  const ResidualTensor before = t;

  ResidualTensor unchanged = t;
  residual_update(unchanged, c, Eigen::VectorXd::Zero(2), f.sys);
  CHECK(unchanged.slices[1] == t.slices[1]);

  const Eigen::VectorXd s = s_update(t, c, f.sys);
  residual_update(t, c, s, f.sys);
  CHECK(t.step == 1);
  CHECK(t.slices[0].cwiseAbs().maxCoeff() < 1e-10 * before.slices[0].cwiseAbs().maxCoeff());
  for (int i = 0; i < 2; ++i) CHECK(t.slices[i].norm() <= before.slices[i].norm());
}

TEST_CASE("fit preconditions and defaults") {
  const FitOptions defaults;
  CHECK(defaults.rank == 100);
  CHECK(defaults.alpha1 == 1e-8);
  CHECK(defaults.alpha2 == 40);
  const Fixture f(0, 300);
  ResidualTensor t;
  t.slices.push_back(Eigen::MatrixXd::Identity(f.m(), f.m()));
  FitOptions zero;
  zero.rank = 0;
  CHECK_THROWS_AS(fit(t, f.sys, zero), ConfigError);
  CHECK_THROWS_AS(fit(ResidualTensor{}, f.sys, defaults), DataError);
}

TEST_CASE("single-subject rank-one fit recovers its component") {
  const Fixture f;
  std::mt19937_64 rng(11);
  const Eigen::VectorXd u = random_vector(f.m(), rng);
  const Eigen::VectorXd values = f.basis.evaluation() * u;
  ResidualTensor t;
  t.slices.push_back(compress_field(values * values.transpose(), f.sys));
  const auto r = fit(t, f.sys, dense_options(1, f.m()));
  REQUIRE(r.basis.rank() == 1);
  CHECK(metric_cosine(r.basis.C.col(0), u, f.J) >= 0.999);
}

TEST_CASE("noiseless low-rank sample is captured") {
  const Fixture f;
  Eigen::MatrixXd truth;
  const auto t = low_rank_sample(f, 20, 5, 12, &truth);
  const auto r = fit(t, f.sys, dense_options(5, f.m()));
  CHECK(residual_ratio(r.diagnostics) < 0.05);
  const Eigen::MatrixXd ctjc = r.basis.C.transpose() * f.J * r.basis.C;
  CHECK((ctjc - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("sparse fit invariants") {
  const Fixture f;
  std::mt19937_64 rng(13);
  ResidualTensor t;
  for (int i = 0; i < 8; ++i) t.slices.push_back(random_symmetric(f.m(), rng));
  FitOptions o;
  o.rank = 6;
  o.alpha2 = 7;
  o.alpha1 = 1e-8;
  const auto r = fit(t, f.sys, o);
  REQUIRE(r.basis.rank() == 6);
  const Eigen::MatrixXd ctjc = r.basis.C.transpose() * f.J * r.basis.C;
  CHECK((ctjc - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-6);
  for (int k = 0; k < 6; ++k) {
    const Eigen::VectorXd c = r.basis.C.col(k);
    CHECK(nonzeros(c) <= 7);
    Eigen::Index top;
    c.cwiseAbs().maxCoeff(&top);
    CHECK(c[top] > 0.0);
  }
  const auto& norms = r.diagnostics.residual_norms;
  for (std::size_t k = 1; k < norms.size(); ++k) CHECK(norms[k] <= norms[k - 1]);
  for (const auto& step : r.diagnostics.steps) {
    for (std::size_t i = 1; i < step.objective_trace.size(); ++i)
      CHECK(step.objective_trace[i] >= step.objective_trace[i - 1] - 1e-12 * std::abs(step.objective_trace[i - 1]));
  }
  // Scores are the s-update against the residual before each step.
  ResidualTensor replay = t;
  for (int k = 0; k < 6; ++k) {
    const Eigen::VectorXd s = s_update(replay, r.basis.C.col(k), f.sys);
    CHECK((s - r.scores.S.col(k)).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + s.cwiseAbs().maxCoeff()));
    residual_update(replay, r.basis.C.col(k), s, f.sys);
  }
}

TEST_CASE("quadrature metric orthonormality") {
  const Fixture f(1, 600, MetricKind::Quadrature);
  const Eigen::MatrixXd quad = Eigen::MatrixXd(f.basis.gram());
  CHECK((f.J - quad).cwiseAbs().maxCoeff() == 0.0);
  std::mt19937_64 rng(14);
  ResidualTensor t;
  for (int i = 0; i < 6; ++i) t.slices.push_back(random_symmetric(f.m(), rng));
  FitOptions o;
  o.rank = 4;
  o.alpha2 = 10;
  const auto r = fit(t, f.sys, o);
  const Eigen::MatrixXd ctjc = r.basis.C.transpose() * quad * r.basis.C;
  CHECK((ctjc - Eigen::MatrixXd::Identity(r.basis.rank(), r.basis.rank())).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("zero residual stops early") {
  const Fixture f(0, 300);
  ResidualTensor t;
  t.slices.assign(3, Eigen::MatrixXd::Zero(f.m(), f.m()));
  const auto r = fit(t, f.sys, dense_options(3, f.m()));
  CHECK(r.basis.rank() == 0);
  CHECK(!r.diagnostics.stop_reason.empty());
  CHECK(variance_explained(r.diagnostics) == 0.0);
}

TEST_CASE("variance explained") {
  FitDiagnostics exact;
  exact.residual_norms = {3.0, 0.0};
  CHECK(variance_explained(exact) == 1.0);
  CHECK(variance_explained(exact, 0) == 0.0);

  const Fixture f;
  std::mt19937_64 rng(15);
  ResidualTensor t;
  for (int i = 0; i < 5; ++i) t.slices.push_back(random_symmetric(f.m(), rng));
  const auto r = fit(t, f.sys, dense_options(4, f.m()));
  const double direct = r.residual.squared_norm() / t.squared_norm();
  CHECK(std::abs(variance_explained(r.diagnostics) - (1.0 - direct)) <= 1e-12);
  for (int k = 1; k <= r.basis.rank(); ++k) CHECK(variance_explained(r.diagnostics, k) >= variance_explained(r.diagnostics, k - 1));
}

TEST_CASE("embedding") {
  const Fixture f;
  std::mt19937_64 rng(16);
  ResidualTensor t;
  for (int i = 0; i < 6; ++i) t.slices.push_back(random_symmetric(f.m(), rng));
  FitOptions o;
  o.rank = 5;
  o.alpha2 = 20;
  const auto r = fit(t, f.sys, o);
  CHECK(r.basis.basis_hash == f.sys.basis_hash());

  CHECK(embed_compressed(Eigen::MatrixXd::Zero(f.m(), f.m()), r.basis, f.sys).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < 6; ++i) {
    const Eigen::VectorXd e = embed_compressed(t.slices[i], r.basis, f.sys);
    CHECK((e.transpose() - r.scores.S.row(i)).cwiseAbs().maxCoeff() <= 1e-8);
  }
  const Eigen::VectorXd e1 = embed_compressed(t.slices[0], r.basis, f.sys);
  const Eigen::VectorXd e2 = embed_compressed(t.slices[1], r.basis, f.sys);
  const Eigen::VectorXd mix = embed_compressed(2.0 * t.slices[0] - 0.5 * t.slices[1], r.basis, f.sys);
  CHECK((mix - (2.0 * e1 - 0.5 * e2)).cwiseAbs().maxCoeff() <= 1e-8);

  const int n = f.basis.grid_size();
  IntensityField field;
  field.values = random_symmetric(n, rng);
  field.grid_id = f.basis.grid().hash();
  const Eigen::VectorXd direct = embed(field, r.basis, f.sys);
  const Eigen::VectorXd compressed = embed_compressed(compress_field(field.values, f.sys), r.basis, f.sys);
  CHECK((direct - compressed).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + compressed.cwiseAbs().maxCoeff()));
}

TEST_CASE("reconstruction") {
  const Fixture f;
  Eigen::MatrixXd truth;
  const auto t = low_rank_sample(f, 10, 3, 17, &truth);
  const auto r = fit(t, f.sys, dense_options(3, f.m()));
  const int n = f.basis.grid_size();
  CHECK(reconstruct(Eigen::VectorXd::Zero(3), r.basis, f.basis).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::VectorXd phi_c = f.basis.evaluation() * r.basis.C.col(1);
  const Eigen::MatrixXd one_hot = reconstruct(Eigen::Vector3d(0, 1, 0), r.basis, f.basis);
  CHECK((one_hot - phi_c * phi_c.transpose()).cwiseAbs().maxCoeff() < 1e-12 * phi_c.squaredNorm());

  std::mt19937_64 rng(18);
  const double w = f.basis.grid_weight();
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd s = random_vector(3, rng);
    const Eigen::VectorXd s2 = random_vector(3, rng);
    IntensityField field;
    field.values = reconstruct(s, r.basis, f.basis);
    field.grid_id = f.basis.grid().hash();
    REQUIRE(field.values.rows() == n);
    CHECK((embed(field, r.basis, f.sys) - s).cwiseAbs().maxCoeff() <= 1e-8);
    const double inner = w * w * (field.values.array() * reconstruct(s2, r.basis, f.basis).array()).sum();
    CHECK(inner == doctest::Approx(s.dot(s2)).epsilon(1e-6));
  }
}

TEST_CASE("residual decay on a decaying spectrum") {
  const Fixture f;
  const auto t = low_rank_sample(f, 20, 5, 19);
  const auto r = fit(t, f.sys, dense_options(10, f.m()));
  const auto& norms = r.diagnostics.residual_norms;
  const double r0 = norms[0] * norms[0];
  for (std::size_t k = 1; k < norms.size(); ++k) CHECK((k + 1.0) * norms[k] * norms[k] <= 2.0 * r0);
}

TEST_CASE("sign convention and thresholding order") {
  Eigen::VectorXd c(4);
  c << 0.5, -2.0, 2.0, 1.0;
  fix_sign(c);
  CHECK(c[1] == 2.0);
  CHECK(c[2] == -2.0);
  Eigen::VectorXd v(6);
  v << 1.0, -3.0, 3.0, 0.5, -1.0, 2.0;
  CHECK(top_support(v, 3) == std::vector<int>{1, 2, 5});
  CHECK(top_support(v, 4) == std::vector<int>{0, 1, 2, 5});
  CHECK(top_support(v, 10).size() == 6);
}

TEST_CASE("fit is independent of the worker count") {
  const Fixture f;
  std::mt19937_64 rng(20);
  ResidualTensor t;
  for (int i = 0; i < 5; ++i) t.slices.push_back(random_symmetric(f.m(), rng));
  FitOptions o;
  o.rank = 3;
  o.alpha2 = 10;
  const auto a = fit(t, f.sys, o);
  o.workers = 3;
  const auto b = fit(t, f.sys, o);
  CHECK(a.basis.C == b.basis.C);
  CHECK(a.scores.S == b.scores.S);
}
