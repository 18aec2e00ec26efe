#include "cconn/point_process.hpp"

#include "cconn/errors.hpp"
#include "cconn/matrix_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <unordered_map>

namespace cconn {

namespace {

constexpr const char* kEndpointHeader = "subject_id,hemi1,x1,y1,z1,hemi2,x2,y2,z2";

Vec3 uniform_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vec3 v;
  do {
    v = Vec3(normal(rng), normal(rng), normal(rng));
  } while (v.squaredNorm() < 1e-24);
  return v.normalized();
}

SurfacePoint uniform_point(std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  const Hemisphere h = coin(rng) ? Hemisphere::Right : Hemisphere::Left;
  return SurfacePoint{h, uniform_direction(rng)};
}

double parse_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw ParseError("trailing characters in number '" + s + "'", line);
    return v;
  } catch (const std::logic_error&) {
    throw ParseError("not a number: '" + s + "'", line);
  }
}

SurfacePoint parse_point(const std::string& hemi, const std::string& x, const std::string& y,
                         const std::string& z, std::size_t line) {
  if (hemi.size() != 1 || (hemi[0] != 'L' && hemi[0] != 'R')) throw ParseError("hemisphere must be L or R", line);
  const Vec3 v(parse_double(x, line), parse_double(y, line), parse_double(z, line));
  const double deviation = std::abs(v.norm() - 1.0);
  if (!std::isfinite(deviation) || deviation > 1e-3) {
    throw DataError("endpoint is not on the unit sphere (line " + std::to_string(line) + ")");
  }
  if (deviation > 1e-6) warn("renormalizing endpoint on line " + std::to_string(line));
  // Within the unit-norm invariant already; keep the stored bits so writes round-trip.
  if (deviation <= 1e-12) return SurfacePoint{hemisphere_from_code(hemi[0]), v};
  return SurfacePoint{hemisphere_from_code(hemi[0]), v / v.norm()};
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

bool point_less(const SurfacePoint& a, const SurfacePoint& b) {
  if (a.hemisphere != b.hemisphere) return a.hemisphere < b.hemisphere;
  for (int i = 0; i < 3; ++i) {
    if (a.direction[i] != b.direction[i]) return a.direction[i] < b.direction[i];
  }
  return false;
}

EndpointPair canonical_pair(const SurfacePoint& a, const SurfacePoint& b) {
  return point_less(b, a) ? EndpointPair{b, a} : EndpointPair{a, b};
}

bool operator==(const SurfacePoint& a, const SurfacePoint& b) {
  return a.hemisphere == b.hemisphere && a.direction == b.direction;
}
bool operator==(const EndpointPair& a, const EndpointPair& b) { return a.first == b.first && a.second == b.second; }
bool operator==(const PointPattern& a, const PointPattern& b) {
  return a.subject_id == b.subject_id && a.pairs == b.pairs;
}

LatentModel make_latent_model(const BasisSystem& sys, const Eigen::MatrixXd& metric, const LatentModelSpec& spec,
                              std::uint64_t seed) {
  const int m = sys.size();
  if (spec.components < 0 || spec.components > m) throw ConfigError("component count must be in [0, M]");
  if (!(spec.width > 0.0)) throw ConfigError("component width must be positive");
  if (!(spec.leading_variance > 0.0)) throw ConfigError("leading score variance must be positive");
  if (metric.rows() != m || metric.cols() != m) throw ConfigError("metric size does not match the basis");

  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  LatentModel model;
  model.baseline_rate = spec.baseline_rate;
  model.components.resize(m, spec.components);
  model.score_variances.resize(spec.components);

  const double two_w2 = 2.0 * spec.width * spec.width;
  for (int k = 0; k < spec.components; ++k) {
    model.score_variances[k] = spec.leading_variance * std::pow(k + 1.0, -spec.decay_exponent);
    bool accepted = false;
    for (int attempt = 0; attempt < 100 && !accepted; ++attempt) {
      const Hemisphere h = coin(rng) ? Hemisphere::Right : Hemisphere::Left;
      const Vec3 centre = uniform_direction(rng);
      Eigen::VectorXd c = Eigen::VectorXd::Zero(m);
      const auto& tri = sys.triangulation(h);
      for (int v = 0; v < tri.num_vertices(); ++v) {
        const double angle = std::acos(std::clamp(tri.vertex(v).dot(centre), -1.0, 1.0));
        const double value = std::exp(-angle * angle / two_w2);
        if (value > 1e-3) c[sys.offset(h) + v] = value;
      }
      const double original = std::sqrt(c.dot(metric * c));
      if (!(original > 0.0)) continue;
      // Two passes of Gram-Schmidt in the metric.
      for (int pass = 0; pass < 2; ++pass) {
        for (int j = 0; j < k; ++j) {
          const auto prev = model.components.col(j);
          c -= prev.dot(metric * c) * prev;
        }
      }
      const double norm = std::sqrt(c.dot(metric * c));
      if (norm > 0.1 * original) {
        model.components.col(k) = c / norm;
        accepted = true;
      }
    }
    if (!accepted) throw ModelError("could not draw a well-conditioned latent component");
  }

  double level = spec.mean_level;
  if (!(level > 0.0)) {
    double spread = 0.0;
    for (int k = 0; k < spec.components; ++k) {
      const double sup = spline_sup_bound(sys, model.components.col(k));
      spread += std::sqrt(model.score_variances[k]) * sup * sup;
    }
    level = std::sqrt(std::max(3.0 * spread, 1e-12));
  }
  model.mean_coeffs = Eigen::VectorXd::Constant(m, level);
  return model;
}

void validate_latent_model(const LatentModel& model, const Eigen::MatrixXd& metric) {
  if (model.rank() == 0) return;
  const Eigen::MatrixXd gram = model.components.transpose() * metric * model.components;
  const double err = (gram - Eigen::MatrixXd::Identity(model.rank(), model.rank())).cwiseAbs().maxCoeff();
  if (err > 1e-8) throw ModelError("latent components are not orthonormal");
  if (model.score_variances.size() != model.rank()) throw ModelError("one score variance per component required");
  if (model.mean_coeffs.size() != model.components.rows()) throw ModelError("mean coefficients have the wrong size");
}

SampledIntensity::SampledIntensity(const LatentModel& model, const BasisSystem& sys, Eigen::VectorXd scores)
    : model_(&model), sys_(&sys), scores_(std::move(scores)) {
  const double mean_sup = spline_sup_bound(sys, model.mean_coeffs);
  double bound = mean_sup * mean_sup;
  for (int k = 0; k < model.rank(); ++k) {
    const double sup = spline_sup_bound(sys, model.components.col(k));
    bound += std::abs(scores_[k]) * sup * sup;
  }
  bound_ = model.baseline_rate * bound;
}

double SampledIntensity::operator()(const SurfacePoint& a, const SurfacePoint& b) const {
  const BasisValues ha = evaluate_hats(a, *sys_);
  const BasisValues hb = evaluate_hats(b, *sys_);
  auto eval = [](const BasisValues& h, const auto& coeffs) {
    return h.value[0] * coeffs[h.index[0]] + h.value[1] * coeffs[h.index[1]] + h.value[2] * coeffs[h.index[2]];
  };
  double value = eval(ha, model_->mean_coeffs) * eval(hb, model_->mean_coeffs);
  for (int k = 0; k < model_->rank(); ++k) {
    const auto col = model_->components.col(k);
    value += scores_[k] * eval(ha, col) * eval(hb, col);
  }
  return model_->baseline_rate * std::max(0.0, value);
}

Eigen::MatrixXd SampledIntensity::on_grid_unclipped() const {
  const auto& phi = sys_->evaluation();
  const Eigen::VectorXd mean = phi * model_->mean_coeffs;
  const Eigen::MatrixXd xi = phi * model_->components;
  Eigen::MatrixXd values = mean * mean.transpose();
  values.noalias() += xi * scores_.asDiagonal() * xi.transpose();
  values = 0.5 * (values + values.transpose()).eval();
  return model_->baseline_rate * values;
}

Eigen::MatrixXd SampledIntensity::on_grid() const { return on_grid_unclipped().cwiseMax(0.0); }

IntensityDraw sample_intensity(const LatentModel& model, const BasisSystem& sys, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd scores(model.rank());
  for (int k = 0; k < model.rank(); ++k) scores[k] = std::sqrt(model.score_variances[k]) * normal(rng);
  return IntensityDraw{scores, SampledIntensity(model, sys, scores)};
}

PointPattern sample_pattern(const IntensityFunction& intensity, double expected_count, std::uint64_t seed,
                            std::string subject_id) {
  if (!(expected_count >= 0.0) || !std::isfinite(expected_count)) {
    throw ConfigError("expected pair count must be a finite nonnegative number");
  }
  PointPattern pattern{std::move(subject_id), {}};
  const double bound = intensity.upper_bound();
  if (!std::isfinite(bound) || bound < 0.0) throw ModelError("intensity bound is not finite");
  if (expected_count == 0.0) return pattern;
  if (bound == 0.0) throw ModelError("intensity is identically zero but a positive pair count was requested");

  std::mt19937_64 rng(seed);
  std::poisson_distribution<long long> poisson(expected_count);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const long long count = poisson(rng);
  pattern.pairs.reserve(static_cast<std::size_t>(count));

  const long long proposal_cap = 1000000 + 100000 * count;
  long long proposals = 0;
  while (static_cast<long long>(pattern.pairs.size()) < count) {
    if (++proposals > proposal_cap) throw ModelError("thinning stalled: intensity is zero almost everywhere");
    const SurfacePoint a = uniform_point(rng);
    const SurfacePoint b = uniform_point(rng);
    const double u = unit(rng);
    if (u * bound < intensity(a, b)) pattern.add(a, b);
  }
  return pattern;
}

std::vector<PointPattern> read_endpoints(std::istream& in) {
  std::vector<PointPattern> patterns;
  std::unordered_map<std::string, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv(line);
    if (!header_seen) {
      header_seen = true;
      if (fields.size() == 9 && fields[0] == "subject_id") continue;
      throw ParseError(std::string("expected header '") + kEndpointHeader + "'", line_no);
    }
    if (fields.size() != 9) throw ParseError("expected 9 comma-separated fields", line_no);
    if (fields[0].empty()) throw ParseError("empty subject_id", line_no);
    const SurfacePoint a = parse_point(fields[1], fields[2], fields[3], fields[4], line_no);
    const SurfacePoint b = parse_point(fields[5], fields[6], fields[7], fields[8], line_no);
    auto [it, inserted] = index.emplace(fields[0], patterns.size());
    if (inserted) patterns.push_back(PointPattern{fields[0], {}});
    patterns[it->second].add(a, b);
  }
  return patterns;
}

std::vector<PointPattern> read_endpoints(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open endpoint file " + path.string());
  return read_endpoints(in);
}

void write_endpoints(std::ostream& out, const std::vector<PointPattern>& patterns) {
  out.precision(17);
  out << kEndpointHeader << '\n';
  for (const auto& p : patterns) {
    for (const auto& pair : p.pairs) {
      out << p.subject_id;
      for (const SurfacePoint* s : {&pair.first, &pair.second}) {
        out << ',' << hemisphere_code(s->hemisphere) << ',' << s->direction.x() << ',' << s->direction.y() << ','
            << s->direction.z();
      }
      out << '\n';
    }
  }
}

}  // namespace cconn
