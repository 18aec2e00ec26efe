#include "cconn/config.hpp"

#include "cconn/errors.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>

namespace cconn {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) throw ConfigError("invalid value '" + value + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("invalid boolean '" + value + "' for " + key);
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

template <typename T>
Setter number(T RunConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) { c.*field = parse_number<T>(k, v); };
}

Setter text(std::string RunConfig::*field) {
  return [field](RunConfig& c, const std::string&, const std::string& v) { c.*field = v; };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"left_mesh", text(&RunConfig::left_mesh)},
      {"right_mesh", text(&RunConfig::right_mesh)},
      {"grid_points", number(&RunConfig::grid_points)},
      {"quadrature_refinement", number(&RunConfig::quadrature_refinement)},
      {"metric", text(&RunConfig::metric)},
      {"bandwidth", number(&RunConfig::bandwidth)},
      {"count_scale", [](RunConfig& c, const std::string& k, const std::string& v) { c.count_scale = parse_bool(k, v); }},
      {"rank", number(&RunConfig::rank)},
      {"alpha1", number(&RunConfig::alpha1)},
      {"alpha2", number(&RunConfig::alpha2)},
      {"ao_tolerance", number(&RunConfig::ao_tolerance)},
      {"ao_max_iterations", number(&RunConfig::ao_max_iterations)},
      {"power_tolerance", number(&RunConfig::power_tolerance)},
      {"power_max_iterations", number(&RunConfig::power_max_iterations)},
      {"permutations", number(&RunConfig::permutations)},
      {"fdr_level", number(&RunConfig::fdr_level)},
      {"fwer_level", number(&RunConfig::fwer_level)},
      {"mmd_kernel", text(&RunConfig::mmd_kernel)},
      {"edge_fraction", number(&RunConfig::edge_fraction)},
      {"seed", number(&RunConfig::seed)},
      {"workers", number(&RunConfig::workers)},
      {"subjects", number(&RunConfig::subjects)},
      {"expected_pairs", number(&RunConfig::expected_pairs)},
      {"true_rank", number(&RunConfig::true_rank)},
      {"leading_variance", number(&RunConfig::leading_variance)},
      {"decay_exponent", number(&RunConfig::decay_exponent)},
      {"bump_width", number(&RunConfig::bump_width)},
  };
  return table;
}

void check_mesh_spec(const std::string& key, const std::string& spec) {
  if (spec.rfind("file:", 0) == 0) {
    if (spec.size() == 5) throw ConfigError(key + ": empty mesh path");
    return;
  }
  if (spec.rfind("fib:", 0) != 0 && spec.rfind("ico:", 0) != 0) {
    throw ConfigError(key + ": expected fib:<n>, ico:<level> or file:<path>, got '" + spec + "'");
  }
  const int value = parse_number<int>(key, spec.substr(4));
  if (spec[0] == 'f' && value < 4) throw ConfigError(key + ": a Delaunay mesh needs at least 4 vertices");
  if (spec[0] == 'i' && (value < 0 || value > 7)) throw ConfigError(key + ": icosphere level must lie in 0..7");
}

}  // namespace

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown configuration key '" + key + "'");
  it->second(cfg, key, value);
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  apply_setting(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    try {
      apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config(in);
}

void write_config(std::ostream& out, const RunConfig& c) {
  out << std::setprecision(17);
  out << "left_mesh = " << c.left_mesh << '\n'
      << "right_mesh = " << c.right_mesh << '\n'
      << "grid_points = " << c.grid_points << '\n'
      << "quadrature_refinement = " << c.quadrature_refinement << '\n'
      << "metric = " << c.metric << '\n'
      << "bandwidth = " << c.bandwidth << '\n'
      << "count_scale = " << (c.count_scale ? "true" : "false") << '\n'
      << "rank = " << c.rank << '\n'
      << "alpha1 = " << c.alpha1 << '\n'
      << "alpha2 = " << c.alpha2 << '\n'
      << "ao_tolerance = " << c.ao_tolerance << '\n'
      << "ao_max_iterations = " << c.ao_max_iterations << '\n'
      << "power_tolerance = " << c.power_tolerance << '\n'
      << "power_max_iterations = " << c.power_max_iterations << '\n'
      << "permutations = " << c.permutations << '\n'
      << "fdr_level = " << c.fdr_level << '\n'
      << "fwer_level = " << c.fwer_level << '\n'
      << "mmd_kernel = " << c.mmd_kernel << '\n'
      << "edge_fraction = " << c.edge_fraction << '\n'
      << "seed = " << c.seed << '\n'
      << "workers = " << c.workers << '\n'
      << "subjects = " << c.subjects << '\n'
      << "expected_pairs = " << c.expected_pairs << '\n'
      << "true_rank = " << c.true_rank << '\n'
      << "leading_variance = " << c.leading_variance << '\n'
      << "decay_exponent = " << c.decay_exponent << '\n'
      << "bump_width = " << c.bump_width << '\n';
}

void validate(const RunConfig& c) {
  check_mesh_spec("left_mesh", c.left_mesh);
  check_mesh_spec("right_mesh", c.right_mesh);
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(c.grid_points >= 2, "grid_points must be at least 2");
  require(c.quadrature_refinement >= 0 && c.quadrature_refinement <= 6, "quadrature_refinement must lie in 0..6");
  require(c.metric == "grid" || c.metric == "quadrature", "metric must be grid or quadrature");
  require(c.bandwidth > 0.0, "bandwidth must be positive");
  require(c.rank >= 1, "rank must be at least 1");
  require(c.alpha1 >= 0.0, "alpha1 must be nonnegative");
  require(c.alpha2 >= 1, "alpha2 must be at least 1");
  require(c.ao_tolerance > 0.0, "ao_tolerance must be positive");
  require(c.ao_max_iterations >= 1, "ao_max_iterations must be at least 1");
  require(c.power_tolerance > 0.0, "power_tolerance must be positive");
  require(c.power_max_iterations >= 1, "power_max_iterations must be at least 1");
  require(c.permutations >= 100, "permutations must be at least 100");
  require(c.fdr_level > 0.0 && c.fdr_level <= 1.0, "fdr_level must lie in (0, 1]");
  require(c.fwer_level > 0.0 && c.fwer_level <= 1.0, "fwer_level must lie in (0, 1]");
  require(c.mmd_kernel == "gaussian" || c.mmd_kernel == "distance", "mmd_kernel must be gaussian or distance");
  require(c.edge_fraction > 0.0 && c.edge_fraction <= 1.0, "edge_fraction must lie in (0, 1]");
  require(c.workers >= 1, "workers must be at least 1");
  require(c.subjects >= 0, "subjects must be nonnegative");
  require(c.expected_pairs >= 0.0, "expected_pairs must be nonnegative");
  require(c.true_rank >= 1, "true_rank must be at least 1");
  require(c.leading_variance > 0.0, "leading_variance must be positive");
  require(c.decay_exponent >= 0.0, "decay_exponent must be nonnegative");
  require(c.bump_width > 0.0, "bump_width must be positive");
}

SphericalTriangulation make_triangulation(const std::string& spec) {
  check_mesh_spec("mesh", spec);
  if (spec.rfind("file:", 0) == 0) {
    std::ifstream in(spec.substr(5));
    if (!in) throw IoError("cannot open mesh " + spec.substr(5));
    return read_mesh(in);
  }
  const int value = parse_number<int>("mesh", spec.substr(4));
  if (spec[0] == 'i') return build_icosphere(value);
  const auto points = fibonacci_sphere(value);
  return build_delaunay(points);
}

std::unique_ptr<BasisSystem> make_basis_system(const RunConfig& cfg) {
  validate(cfg);
  QuadratureOptions quad;
  quad.refinement = cfg.quadrature_refinement;
  return std::make_unique<BasisSystem>(make_triangulation(cfg.left_mesh), make_triangulation(cfg.right_mesh),
                                       make_fibonacci_grid(cfg.grid_points), quad);
}

MetricKind metric_kind(const RunConfig& cfg) { return cfg.metric == "quadrature" ? MetricKind::Quadrature : MetricKind::Grid; }

MmdKernel mmd_kernel(const RunConfig& cfg) { return cfg.mmd_kernel == "distance" ? MmdKernel::Distance : MmdKernel::Gaussian; }

FitOptions fit_options(const RunConfig& cfg) {
  FitOptions o;
  o.rank = cfg.rank;
  o.alpha1 = cfg.alpha1;
  o.alpha2 = cfg.alpha2;
  o.ao_tolerance = cfg.ao_tolerance;
  o.ao_max_iterations = cfg.ao_max_iterations;
  o.power_tolerance = cfg.power_tolerance;
  o.power_max_iterations = cfg.power_max_iterations;
  o.seed = cfg.seed;
  o.workers = cfg.workers;
  return o;
}

KdeOptions kde_options(const RunConfig& cfg) {
  KdeOptions o;
  o.bandwidth = cfg.bandwidth;
  o.count_scale = cfg.count_scale;
  return o;
}

LatentModelSpec latent_spec(const RunConfig& cfg) {
  LatentModelSpec s;
  s.components = cfg.true_rank;
  s.leading_variance = cfg.leading_variance;
  s.decay_exponent = cfg.decay_exponent;
  s.width = cfg.bump_width;
  return s;
}

}  // namespace cconn
