#include "cconn/kde.hpp"

#include "cconn/errors.hpp"
#include "cconn/matrix_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace cconn {

namespace {

constexpr double kTermCutoff = 1e-12;
constexpr int kTableSize = (1 << 16) + 1;
constexpr std::size_t kPairBlock = 512;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string file_stem(const std::string& subject) {
  std::string stem = subject;
  std::replace(stem.begin(), stem.end(), '/', '_');
  return stem;
}

}  // namespace

HeatKernel::HeatKernel(double bandwidth, int max_degree, bool tabulate) : bandwidth_(bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw ConfigError("heat kernel bandwidth must be positive");
  if (max_degree < 0) throw ConfigError("heat kernel degree cap must be nonnegative");
  for (int l = 0; l <= max_degree; ++l) {
    const double a = (2.0 * l + 1.0) / (4.0 * std::numbers::pi) * std::exp(-l * (l + 1.0) * bandwidth);
    if (l > 0 && a < kTermCutoff) break;
    coefficients_.push_back(a);
  }
  if (!tabulate) return;
  table_.resize(kTableSize);
  for (int i = 0; i < kTableSize; ++i) {
    const double chord = 2.0 * i / (kTableSize - 1);
    table_[i] = (*this)(1.0 - 0.5 * chord * chord);
  }
}

double HeatKernel::operator()(double u) const {
  u = std::clamp(u, -1.0, 1.0);
  // Upward recurrence: (l+1) P_{l+1} = (2l+1) u P_l - l P_{l-1}.
  double p_prev = 1.0;
  double p = u;
  double sum = coefficients_[0];
  if (coefficients_.size() > 1) sum += coefficients_[1] * u;
  for (std::size_t l = 1; l + 1 < coefficients_.size(); ++l) {
    const double next = ((2.0 * l + 1.0) * u * p - l * p_prev) / (l + 1.0);
    p_prev = p;
    p = next;
    sum += coefficients_[l + 1] * p;
  }
  return std::max(0.0, sum);
}

double HeatKernel::operator()(const SurfacePoint& p, const SurfacePoint& q) const {
  if (p.hemisphere != q.hemisphere) return 0.0;
  return (*this)(p.direction.dot(q.direction));
}

double HeatKernel::lookup(double u) const {
  if (table_.empty()) return (*this)(u);
  const double chord = std::sqrt(std::max(0.0, 2.0 * (1.0 - u)));
  const double x = std::min(chord, 2.0) * 0.5 * (kTableSize - 1);
  const int i = std::min(static_cast<int>(x), kTableSize - 2);
  const double f = x - i;
  return (1.0 - f) * table_[i] + f * table_[i + 1];
}

double heat_kernel(const SurfacePoint& p, const SurfacePoint& q, double bandwidth) {
  return HeatKernel(bandwidth, 400, false)(p, q);
}

Eigen::MatrixXd kernel_columns(const Grid& grid, std::span<const SurfacePoint> points, const HeatKernel& kernel,
                               bool tabulated) {
  Eigen::MatrixXd out(grid.size(), static_cast<Eigen::Index>(points.size()));
  for (Eigen::Index o = 0; o < out.cols(); ++o) {
    const SurfacePoint& x = points[o];
    for (Eigen::Index a = 0; a < out.rows(); ++a) {
      const SurfacePoint& g = grid.points[a];
      if (g.hemisphere != x.hemisphere) {
        out(a, o) = 0.0;
      } else {
        const double u = g.direction.dot(x.direction);
        out(a, o) = tabulated ? kernel.lookup(u) : kernel(u);
      }
    }
  }
  return out;
}

namespace {

void split_pattern(const PointPattern& pattern, std::size_t begin, std::size_t end, std::vector<SurfacePoint>& firsts,
                   std::vector<SurfacePoint>& seconds) {
  firsts.clear();
  seconds.clear();
  for (std::size_t i = begin; i < end; ++i) {
    firsts.push_back(pattern.pairs[i].first);
    seconds.push_back(pattern.pairs[i].second);
  }
}

void check_kernel(const KdeOptions& opts, const HeatKernel& kernel) {
  if (!(opts.bandwidth > 0.0)) throw ConfigError("KDE bandwidth must be positive");
  if (kernel.bandwidth() != opts.bandwidth) throw ConfigError("kernel bandwidth does not match KDE options");
}

}  // namespace

IntensityField kde_estimate(const PointPattern& pattern, const Grid& grid, const KdeOptions& opts) {
  return kde_estimate(pattern, grid, opts, HeatKernel(opts.bandwidth));
}

IntensityField kde_estimate(const PointPattern& pattern, const Grid& grid, const KdeOptions& opts,
                            const HeatKernel& kernel) {
  check_kernel(opts, kernel);
  if (pattern.pairs.empty()) throw DataError("cannot estimate connectivity from an empty pattern: " + pattern.subject_id);
  const auto n = grid.size();
  Eigen::MatrixXd product = Eigen::MatrixXd::Zero(n, n);
  std::vector<SurfacePoint> firsts, seconds;
  for (std::size_t begin = 0; begin < pattern.pairs.size(); begin += kPairBlock) {
    const std::size_t end = std::min(pattern.pairs.size(), begin + kPairBlock);
    split_pattern(pattern, begin, end, firsts, seconds);
    const Eigen::MatrixXd kx = kernel_columns(grid, firsts, kernel, opts.tabulated);
    const Eigen::MatrixXd ky = kernel_columns(grid, seconds, kernel, opts.tabulated);
    product.noalias() += kx * ky.transpose();
  }
  const double count = static_cast<double>(pattern.pairs.size());
  const double scale = (opts.count_scale ? count : 1.0) / (2.0 * count);
  IntensityField field;
  field.subject_id = pattern.subject_id;
  field.values = scale * (product + product.transpose());
  field.grid_id = grid.hash();
  field.pair_count = pattern.pairs.size();
  field.bandwidth = opts.bandwidth;
  return field;
}

Eigen::MatrixXd kde_projected(const PointPattern& pattern, const Grid& grid, const Eigen::MatrixXd& left,
                              const KdeOptions& opts, const HeatKernel& kernel) {
  check_kernel(opts, kernel);
  if (pattern.pairs.empty()) throw DataError("cannot estimate connectivity from an empty pattern: " + pattern.subject_id);
  if (left.rows() != grid.size()) throw DataError("projection factor does not match the grid");
  const auto r = left.cols();
  Eigen::MatrixXd product = Eigen::MatrixXd::Zero(r, r);
  std::vector<SurfacePoint> firsts, seconds;
  for (std::size_t begin = 0; begin < pattern.pairs.size(); begin += kPairBlock) {
    const std::size_t end = std::min(pattern.pairs.size(), begin + kPairBlock);
    split_pattern(pattern, begin, end, firsts, seconds);
    const Eigen::MatrixXd ax = left.transpose() * kernel_columns(grid, firsts, kernel, opts.tabulated);
    const Eigen::MatrixXd ay = left.transpose() * kernel_columns(grid, seconds, kernel, opts.tabulated);
    product.noalias() += ax * ay.transpose();
  }
  const double count = static_cast<double>(pattern.pairs.size());
  const double scale = (opts.count_scale ? count : 1.0) / (2.0 * count);
  return scale * (product + product.transpose());
}

CenteredSample center_sample(std::vector<IntensityField> fields) {
  if (fields.size() < 2) throw DataError("centering needs at least two fields");
  const auto grid = fields.front().grid_id;
  const auto rows = fields.front().values.rows();
  const auto cols = fields.front().values.cols();
  for (const auto& f : fields) {
    if (f.grid_id != grid || f.values.rows() != rows || f.values.cols() != cols) {
      throw DataError("fields are defined on different grids");
    }
  }
  CenteredSample out;
  out.mean.subject_id = "mean";
  out.mean.grid_id = grid;
  out.mean.bandwidth = fields.front().bandwidth;
  out.mean.values = Eigen::MatrixXd::Zero(rows, cols);
  for (const auto& f : fields) out.mean.values += f.values;
  out.mean.values /= static_cast<double>(fields.size());
  for (auto& f : fields) f.values -= out.mean.values;
  out.fields = std::move(fields);
  return out;
}

double field_mass(const IntensityField& field, double grid_weight) {
  return grid_weight * grid_weight * field.values.sum();
}

void write_field(const std::filesystem::path& dir, const IntensityField& field) {
  const std::string stem = file_stem(field.subject_id);
  write_ccmx(dir / (stem + ".ccmx"), field.values);
  nlohmann::json meta = {{"subject_id", field.subject_id},
                         {"bandwidth", field.bandwidth},
                         {"grid_hash", hex64(field.grid_id)},
                         {"pair_count", field.pair_count}};
  write_atomically(dir / (stem + ".json"), [&](std::ostream& out) { out << meta.dump(2) << '\n'; });
}

IntensityField read_field(const std::filesystem::path& ccmx_path) {
  IntensityField field;
  field.values = read_ccmx(ccmx_path);
  if (field.values.rows() != field.values.cols()) throw DataError("intensity field is not square");
  auto sidecar = ccmx_path;
  sidecar.replace_extension(".json");
  std::ifstream in(sidecar);
  if (!in) throw IoError("missing sidecar " + sidecar.string());
  try {
    const auto meta = nlohmann::json::parse(in);
    field.subject_id = meta.at("subject_id").get<std::string>();
    field.bandwidth = meta.at("bandwidth").get<double>();
    field.grid_id = std::stoull(meta.at("grid_hash").get<std::string>(), nullptr, 16);
    field.pair_count = meta.at("pair_count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad field sidecar " + sidecar.string() + ": " + e.what());
  }
  return field;
}

}  // namespace cconn
