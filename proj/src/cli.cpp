#include "cconn/cli.hpp"

#include "cconn/config.hpp"
#include "cconn/errors.hpp"
#include "cconn/greedy_basis.hpp"
#include "cconn/kde.hpp"
#include "cconn/matrix_io.hpp"
#include "cconn/parallel.hpp"
#include "cconn/point_process.hpp"
#include "cconn/stat_inference.hpp"
#include "cconn/subnetwork.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

namespace cconn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

void add_common(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("--config", common.config, "Configuration file (key = value lines)");
  cmd->add_option("--set", common.overrides, "Override a configuration key, e.g. --set rank=20");
  cmd->add_option("--seed", common.seed, "Random seed");
  cmd->add_option("--workers", common.workers, "Worker threads");
}

// Config from --config, else from `fallback` when it exists, else defaults;
// then overrides.
RunConfig resolve_config(const CommonOptions& common, const fs::path& fallback = {}) {
  RunConfig cfg;
  if (!common.config.empty()) {
    cfg = load_config(common.config);
  } else if (!fallback.empty() && fs::exists(fallback)) {
    cfg = load_config(fallback);
  }
  for (const auto& o : common.overrides) apply_override(cfg, o);
  if (common.seed) cfg.seed = *common.seed;
  if (common.workers) cfg.workers = *common.workers;
  validate(cfg);
  return cfg;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_json(const fs::path& path, const json& j) {
  write_atomically(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw IoError(what + " not found: " + path.string());
}

void prepare_output_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

std::string subject_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sub%03d", i + 1);
  return buf;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

std::vector<double> vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::MatrixXd dense_metric(const BasisSystem& sys, MetricKind kind) {
  return kind == MetricKind::Grid ? Eigen::MatrixXd(sys.grid_gram()) : Eigen::MatrixXd(sys.gram());
}

// Compressed, uncentered slices w U^T Y_i U for each input subject.
struct CompressedInput {
  std::vector<std::string> ids;
  std::vector<Eigen::MatrixXd> slices;
};

CompressedInput compress_endpoints(const fs::path& path, const BasisSystem& sys, const CompressedSystem& csys,
                                   const RunConfig& cfg) {
  require_file(path, "endpoint file");
  const auto patterns = read_endpoints(path);
  const KdeOptions opts = kde_options(cfg);
  const HeatKernel kernel(opts.bandwidth);
  CompressedInput out;
  out.slices.resize(patterns.size());
  parallel_for(patterns.size(), cfg.workers, [&](std::size_t i) {
    out.slices[i] = csys.weight() * kde_projected(patterns[i], sys.grid(), csys.svd().U, opts, kernel);
  });
  for (const auto& p : patterns) out.ids.push_back(p.subject_id);
  return out;
}

CompressedInput compress_field_dir(const fs::path& dir, const BasisSystem& sys, const CompressedSystem& csys) {
  if (!fs::is_directory(dir)) throw IoError("field directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".ccmx") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  CompressedInput out;
  for (const auto& f : files) {
    const IntensityField field = read_field(f);
    if (field.grid_id != sys.grid().hash()) throw DataError("field " + f.string() + " was estimated on a different grid");
    out.ids.push_back(field.subject_id);
    out.slices.push_back(compress_field(field.values, csys));
  }
  return out;
}

CompressedInput load_input(const std::string& endpoints, const std::string& fields, const BasisSystem& sys,
                           const CompressedSystem& csys, const RunConfig& cfg) {
  if (endpoints.empty() == fields.empty()) throw ConfigError("give exactly one of --endpoints or --fields");
  return endpoints.empty() ? compress_field_dir(fields, sys, csys) : compress_endpoints(endpoints, sys, csys, cfg);
}

// Fit directory contents.
struct StoredFit {
  RunConfig config;
  json meta;
  ReducedRankBasis basis;
  Eigen::MatrixXd scores;
  std::vector<std::string> ids;
};

StoredFit load_fit(const fs::path& dir, const CommonOptions& common) {
  if (!fs::is_directory(dir)) throw IoError("fit directory not found: " + dir.string());
  StoredFit fit;
  fit.config = resolve_config(common, dir / "config.txt");
  fit.meta = read_json(dir / "meta.json");
  fit.basis.C = read_ccmx(dir / "basis.ccmx");
  fit.scores = read_ccmx(dir / "scores.ccmx");
  try {
    fit.basis.alpha1 = fit.meta.at("alpha1").get<double>();
    fit.basis.alpha2 = fit.meta.at("alpha2").get<int>();
    fit.basis.basis_hash = std::stoull(fit.meta.at("basis_hash").get<std::string>(), nullptr, 16);
    fit.ids = fit.meta.at("subject_ids").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("incomplete fit metadata: ") + e.what());
  }
  if (static_cast<Eigen::Index>(fit.ids.size()) != fit.scores.rows() || fit.scores.cols() != fit.basis.C.cols()) {
    throw DataError("fit directory files are inconsistent");
  }
  return fit;
}

struct TraitTable {
  std::vector<std::string> traits;
  std::map<std::string, std::vector<int>> by_subject;
};

TraitTable read_labels(const fs::path& path) {
  require_file(path, "label file");
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty label file", 1);
  auto header = split_csv(line);
  if (header.size() < 2 || header[0] != "subject_id") throw ParseError("expected header subject_id,<trait>...", 1);
  TraitTable table;
  table.traits.assign(header.begin() + 1, header.end());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv(line);
    if (fields.size() != header.size()) throw ParseError("expected " + std::to_string(header.size()) + " fields", line_no);
    std::vector<int> values;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (fields[i] != "0" && fields[i] != "1") throw ParseError("group label must be 0 or 1", line_no);
      values.push_back(fields[i] == "1" ? 1 : 0);
    }
    if (!table.by_subject.emplace(fields[0], std::move(values)).second) {
      throw ParseError("subject " + fields[0] + " listed twice", line_no);
    }
  }
  return table;
}

std::vector<int> labels_for(const TraitTable& table, std::size_t trait, const std::vector<std::string>& ids) {
  std::vector<int> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = table.by_subject.find(id);
    if (it == table.by_subject.end()) throw DataError("no label for subject " + id);
    out.push_back(it->second[trait]);
  }
  return out;
}

struct ResultRow {
  std::string trait;
  TestResult test;
  double adjusted = 1.0;
  bool rejected = false;
};

void write_results(const fs::path& dir, const std::string& stem, const std::vector<ResultRow>& rows,
                   const std::string& correction, double level) {
  write_atomically(dir / (stem + ".csv"), [&](std::ostream& out) {
    out << "trait,statistic,p,p_adjusted,rejected,neg_log10_p\n" << std::setprecision(17);
    for (const auto& r : rows) {
      out << r.trait << ',' << r.test.statistic << ',' << r.test.p_value << ',' << r.adjusted << ','
          << (r.rejected ? 1 : 0) << ',' << -std::log10(r.test.p_value) << '\n';
    }
  });
  json j = {{"correction", correction}, {"level", level}, {"results", json::array()}};
  for (const auto& r : rows) {
    j["results"].push_back({{"trait", r.trait},
                            {"statistic", r.test.statistic},
                            {"p", r.test.p_value},
                            {"p_adjusted", r.adjusted},
                            {"rejected", r.rejected},
                            {"neg_log10_p", -std::log10(r.test.p_value)},
                            {"n_permutations", r.test.n_permutations},
                            {"seed", r.test.seed}});
  }
  write_json(dir / (stem + ".json"), j);
}

std::vector<int> parse_components(const std::string& text, int rank) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int k = 0;
    try {
      std::size_t used = 0;
      k = std::stoi(item, &used);
      if (used != item.size()) throw ConfigError("bad component number '" + item + "'");
    } catch (const std::logic_error&) {
      throw ConfigError("bad component number '" + item + "'");
    }
    if (k < 1 || k > rank) throw ConfigError("component " + item + " outside 1.." + std::to_string(rank));
    out.push_back(k - 1);
  }
  if (out.empty()) throw ConfigError("no components selected");
  return out;
}

// ---- subcommands ----

int cmd_simulate(const CommonOptions& common, const std::string& out_dir, std::ostream& out) {
  const RunConfig cfg = resolve_config(common);
  prepare_output_dir(out_dir);
  const auto sys = make_basis_system(cfg);
  const MetricKind kind = metric_kind(cfg);
  const LatentModel model = make_latent_model(*sys, dense_metric(*sys, kind), latent_spec(cfg), cfg.seed);

  const auto n = static_cast<std::size_t>(cfg.subjects);
  std::vector<PointPattern> patterns(n);
  std::vector<Eigen::VectorXd> scores(n);
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    const std::uint64_t subject_seed = derive_seed(cfg.seed, i + 1);
    const IntensityDraw draw = sample_intensity(model, *sys, subject_seed);
    scores[i] = draw.scores;
    patterns[i] = sample_pattern(draw.intensity, cfg.expected_pairs, derive_seed(subject_seed, 0), subject_name(static_cast<int>(i)));
  });

  write_atomically(fs::path(out_dir) / "endpoints.csv", [&](std::ostream& o) { write_endpoints(o, patterns); });
  json truth = {{"seed", cfg.seed},
                {"subjects", cfg.subjects},
                {"expected_pairs", cfg.expected_pairs},
                {"basis_hash", hex64(sys->hash())},
                {"metric", cfg.metric},
                {"baseline_rate", model.baseline_rate},
                {"mean_coeffs", vector_json(model.mean_coeffs)},
                {"score_variances", vector_json(model.score_variances)},
                {"components", matrix_json(model.components.transpose())},
                {"subject_ids", json::array()},
                {"scores", json::array()},
                {"pair_counts", json::array()}};
  for (std::size_t i = 0; i < n; ++i) {
    truth["subject_ids"].push_back(patterns[i].subject_id);
    truth["scores"].push_back(vector_json(scores[i]));
    truth["pair_counts"].push_back(patterns[i].pairs.size());
  }
  write_json(fs::path(out_dir) / "truth.json", truth);
  out << "simulated " << n << " subjects into " << out_dir << '\n';
  return 0;
}

int cmd_kde(const CommonOptions& common, const std::string& endpoints, const std::string& out_dir, std::ostream& out) {
  const RunConfig cfg = resolve_config(common);
  require_file(endpoints, "endpoint file");
  const auto patterns = read_endpoints(endpoints);
  prepare_output_dir(out_dir);
  const Grid grid = make_fibonacci_grid(cfg.grid_points);
  const KdeOptions opts = kde_options(cfg);
  const HeatKernel kernel(opts.bandwidth);
  parallel_for(patterns.size(), cfg.workers, [&](std::size_t i) {
    write_field(out_dir, kde_estimate(patterns[i], grid, opts, kernel));
  });
  out << "estimated " << patterns.size() << " fields into " << out_dir << '\n';
  return 0;
}

int cmd_fit(const CommonOptions& common, const std::string& endpoints, const std::string& fields,
            const std::string& out_dir, std::ostream& out) {
  const RunConfig cfg = resolve_config(common);
  if (endpoints.empty() == fields.empty()) throw ConfigError("give exactly one of --endpoints or --fields");
  if (!endpoints.empty()) require_file(endpoints, "endpoint file");
  const auto sys = make_basis_system(cfg);
  const CompressedSystem csys(*sys, metric_kind(cfg));
  CompressedInput input = load_input(endpoints, fields, *sys, csys, cfg);

  Eigen::MatrixXd mean;
  ResidualTensor g0 = center_compressed(std::move(input.slices), &mean);
  const FitResult result = fit(std::move(g0), csys, fit_options(cfg), input.ids);

  prepare_output_dir(out_dir);
  const fs::path dir(out_dir);
  write_ccmx(dir / "basis.ccmx", result.basis.C);
  write_ccmx(dir / "scores.ccmx", result.scores.S);
  write_ccmx(dir / "mean.ccmx", mean);
  write_atomically(dir / "config.txt", [&](std::ostream& o) { write_config(o, cfg); });

  const auto& diag = result.diagnostics;
  json meta = {{"rank", result.basis.rank()},
               {"requested_rank", cfg.rank},
               {"alpha1", cfg.alpha1},
               {"alpha2", cfg.alpha2},
               {"ao_tolerance", cfg.ao_tolerance},
               {"ao_max_iterations", cfg.ao_max_iterations},
               {"power_tolerance", cfg.power_tolerance},
               {"power_max_iterations", cfg.power_max_iterations},
               {"seed", cfg.seed},
               {"metric", cfg.metric},
               {"bandwidth", cfg.bandwidth},
               {"basis_hash", hex64(csys.basis_hash())},
               {"grid_hash", hex64(sys->grid().hash())},
               {"subject_ids", result.scores.subject_ids},
               {"residual_norms", diag.residual_norms},
               {"variance_explained", json::array()},
               {"ao_iterations", json::array()},
               {"power_iterations", json::array()},
               {"objective_traces", json::array()},
               {"stop_reason", diag.stop_reason}};
  for (int k = 0; k <= result.basis.rank(); ++k) meta["variance_explained"].push_back(variance_explained(diag, k));
  for (const auto& step : diag.steps) {
    meta["ao_iterations"].push_back(step.ao_iterations);
    meta["power_iterations"].push_back(step.power_iterations);
    meta["objective_traces"].push_back(step.objective_trace);
  }
  write_json(dir / "meta.json", meta);
  out << "fitted rank " << result.basis.rank() << " on " << result.scores.S.rows() << " subjects; variance explained "
      << std::setprecision(6) << variance_explained(diag) << '\n';
  return 0;
}

int cmd_embed(const CommonOptions& common, const std::string& fit_dir, const std::string& endpoints,
              const std::string& fields, const std::string& out_file, std::ostream& out) {
  const StoredFit stored = load_fit(fit_dir, common);
  if (endpoints.empty() == fields.empty()) throw ConfigError("give exactly one of --endpoints or --fields");
  const auto sys = make_basis_system(stored.config);
  const CompressedSystem csys(*sys, metric_kind(stored.config));
  if (csys.basis_hash() != stored.basis.basis_hash) throw DataError("configuration does not reproduce the fitted basis");
  const Eigen::MatrixXd mean = read_ccmx(fs::path(fit_dir) / "mean.ccmx");
  CompressedInput input = load_input(endpoints, fields, *sys, csys, stored.config);

  Eigen::MatrixXd scores(static_cast<Eigen::Index>(input.slices.size()), stored.basis.rank());
  for (std::size_t i = 0; i < input.slices.size(); ++i) {
    scores.row(static_cast<Eigen::Index>(i)) = embed_compressed(input.slices[i] - mean, stored.basis, csys).transpose();
  }
  write_atomically(out_file, [&](std::ostream& o) {
    o << "subject_id";
    for (int k = 1; k <= stored.basis.rank(); ++k) o << ",s" << k;
    o << '\n' << std::setprecision(17);
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
      o << input.ids[i];
      for (Eigen::Index k = 0; k < scores.cols(); ++k) o << ',' << scores(i, k);
      o << '\n';
    }
  });
  out << "embedded " << scores.rows() << " subjects into " << out_file << '\n';
  return 0;
}

int cmd_test_groups(const CommonOptions& common, const std::string& fit_dir, const std::string& labels_file,
                    const std::string& out_dir, std::ostream& out) {
  const StoredFit stored = load_fit(fit_dir, common);
  const RunConfig& cfg = stored.config;
  const TraitTable table = read_labels(labels_file);
  std::vector<GroupLabels> groups;
  for (std::size_t t = 0; t < table.traits.size(); ++t) groups.emplace_back(labels_for(table, t, stored.ids));
  prepare_output_dir(out_dir);

  std::vector<ResultRow> rows;
  std::vector<double> p;
  for (std::size_t t = 0; t < groups.size(); ++t) {
    PermutationOptions opts{cfg.permutations, derive_seed(cfg.seed, t), cfg.workers};
    rows.push_back({table.traits[t], mmd_test(stored.scores, groups[t], opts, mmd_kernel(cfg))});
    p.push_back(rows.back().test.p_value);
  }
  const Correction corr = bh_fdr(p, cfg.fdr_level);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    rows[t].adjusted = corr.adjusted[t];
    rows[t].rejected = corr.rejected[t];
  }
  write_results(out_dir, "groups", rows, "benjamini-hochberg", cfg.fdr_level);
  out << "tested " << rows.size() << " traits; "
      << std::count(corr.rejected.begin(), corr.rejected.end(), true) << " significant at FDR " << cfg.fdr_level << '\n';
  return 0;
}

int cmd_test_dims(const CommonOptions& common, const std::string& fit_dir, const std::string& labels_file,
                  const std::string& trait, const std::string& out_dir, std::ostream& out) {
  const StoredFit stored = load_fit(fit_dir, common);
  const RunConfig& cfg = stored.config;
  const TraitTable table = read_labels(labels_file);
  std::size_t index = 0;
  if (!trait.empty()) {
    const auto it = std::find(table.traits.begin(), table.traits.end(), trait);
    if (it == table.traits.end()) throw ConfigError("trait " + trait + " not in label file");
    index = static_cast<std::size_t>(it - table.traits.begin());
  }
  const GroupLabels labels(labels_for(table, index, stored.ids));
  prepare_output_dir(out_dir);

  const PermutationOptions opts{cfg.permutations, cfg.seed, cfg.workers};
  const auto tests = per_dimension_tests(stored.scores, labels, opts);
  std::vector<double> p;
  for (const auto& t : tests) p.push_back(t.p_value);
  const Correction corr = holm_correction(p, cfg.fwer_level);
  std::vector<ResultRow> rows;
  for (std::size_t k = 0; k < tests.size(); ++k) {
    rows.push_back({"component_" + std::to_string(k + 1), tests[k], corr.adjusted[k], corr.rejected[k]});
  }
  write_results(out_dir, "dims", rows, "holm", cfg.fwer_level);
  out << "tested " << rows.size() << " components for " << table.traits[index] << "; "
      << std::count(corr.rejected.begin(), corr.rejected.end(), true) << " significant at FWER " << cfg.fwer_level << '\n';
  return 0;
}

int cmd_coarsen(const CommonOptions& common, const std::string& fit_dir, const std::string& components,
                const std::string& parcellation, const std::string& out_dir, std::ostream& out) {
  const StoredFit stored = load_fit(fit_dir, common);
  const auto selected = parse_components(components, stored.basis.rank());
  const auto sys = make_basis_system(stored.config);
  if (sys->hash() != stored.basis.basis_hash) {
    throw DataError("configuration does not reproduce the fitted basis");
  }
  const Parcellation parc = parcellation.empty() ? octant_parcellation(sys->grid()) : read_parcellation(parcellation, sys->grid());
  prepare_output_dir(out_dir);
  const Eigen::MatrixXd a = coarsen(selected, stored.basis, *sys, parc);
  const auto edges = top_edges(a, stored.config.edge_fraction);
  write_atomically(fs::path(out_dir) / "adjacency.csv", [&](std::ostream& o) { write_adjacency_csv(o, a, parc); });
  write_atomically(fs::path(out_dir) / "edges.csv", [&](std::ostream& o) { write_edges_csv(o, edges, parc); });
  out << "coarsened " << selected.size() << " components onto " << parc.size() << " parcels; kept " << edges.size()
      << " edges\n";
  return 0;
}

int cmd_report(const std::string& fit_dir, const std::vector<std::string>& tests, const std::string& out_dir,
               std::ostream& out) {
  const json meta = read_json(fs::path(fit_dir) / "meta.json");
  FitDiagnostics diag;
  try {
    diag.residual_norms = meta.at("residual_norms").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("incomplete fit metadata: ") + e.what());
  }
  if (diag.residual_norms.empty()) throw DataError("fit metadata has an empty residual trace");
  std::vector<json> test_tables;
  for (const auto& t : tests) {
    require_file(t, "test results");
    fs::path sidecar(t);
    sidecar.replace_extension(".json");
    test_tables.push_back(read_json(sidecar));
  }
  prepare_output_dir(out_dir);

  json report = {{"rank", static_cast<int>(diag.residual_norms.size()) - 1}, {"trace", json::array()}, {"tests", json::array()}};
  write_atomically(fs::path(out_dir) / "report.csv", [&](std::ostream& o) {
    o << "k,residual_norm,residual_ratio,variance_explained\n" << std::setprecision(17);
    for (std::size_t k = 0; k < diag.residual_norms.size(); ++k) {
      const int kk = static_cast<int>(k);
      o << k << ',' << diag.residual_norms[k] << ',' << residual_ratio(diag, kk) << ',' << variance_explained(diag, kk)
        << '\n';
      report["trace"].push_back({{"k", k},
                                 {"residual_norm", diag.residual_norms[k]},
                                 {"residual_ratio", residual_ratio(diag, kk)},
                                 {"variance_explained", variance_explained(diag, kk)}});
    }
  });
  if (!test_tables.empty()) {
    write_atomically(fs::path(out_dir) / "report_tests.csv", [&](std::ostream& o) {
      o << "source,trait,neg_log10_p,neg_log10_p_adjusted,rejected\n" << std::setprecision(17);
      for (std::size_t i = 0; i < test_tables.size(); ++i) {
        for (const auto& r : test_tables[i].at("results")) {
          const double nl = -std::log10(r.at("p").get<double>());
          const double nla = -std::log10(r.at("p_adjusted").get<double>());
          o << fs::path(tests[i]).stem().string() << ',' << r.at("trait").get<std::string>() << ',' << nl << ',' << nla
            << ',' << (r.at("rejected").get<bool>() ? 1 : 0) << '\n';
          report["tests"].push_back({{"source", fs::path(tests[i]).stem().string()},
                                     {"trait", r.at("trait")},
                                     {"neg_log10_p", nl},
                                     {"neg_log10_p_adjusted", nla},
                                     {"rejected", r.at("rejected")}});
        }
      }
    });
  }
  write_json(fs::path(out_dir) / "report.json", report);
  out << "rank " << report["rank"].get<int>() << ", variance explained " << std::setprecision(6)
      << variance_explained(diag) << '\n';
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Continuous connectivity embedding on the two-sphere cortical model"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "cconn 1.0");

  CommonOptions common;
  std::string out_path, endpoints, fields, fit_dir, labels, trait, components, parcellation;
  std::vector<std::string> tests;

  auto* simulate = app.add_subcommand("simulate", "Simulate endpoint pairs from a latent connectivity model");
  add_common(simulate, common);
  simulate->add_option("--out", out_path, "Output directory")->required();

  auto* kde = app.add_subcommand("kde", "Estimate connectivity fields on the grid");
  add_common(kde, common);
  kde->add_option("--endpoints", endpoints, "Endpoint CSV")->required();
  kde->add_option("--out", out_path, "Output directory")->required();

  auto* fitc = app.add_subcommand("fit", "Learn the reduced-rank basis and subject scores");
  add_common(fitc, common);
  fitc->add_option("--endpoints", endpoints, "Endpoint CSV");
  fitc->add_option("--fields", fields, "Directory of estimated fields");
  fitc->add_option("--out", out_path, "Fit directory")->required();

  auto* embedc = app.add_subcommand("embed", "Score new subjects against a fitted basis");
  add_common(embedc, common);
  embedc->add_option("--fit", fit_dir, "Fit directory")->required();
  embedc->add_option("--endpoints", endpoints, "Endpoint CSV");
  embedc->add_option("--fields", fields, "Directory of estimated fields");
  embedc->add_option("--out", out_path, "Score CSV")->required();

  auto* groups = app.add_subcommand("test-groups", "MMD two-sample tests per trait, FDR corrected");
  add_common(groups, common);
  groups->add_option("--fit", fit_dir, "Fit directory")->required();
  groups->add_option("--labels", labels, "Label CSV: subject_id,<trait>...")->required();
  groups->add_option("--out", out_path, "Output directory")->required();

  auto* dims = app.add_subcommand("test-dims", "Per-component permutation tests, Holm corrected");
  add_common(dims, common);
  dims->add_option("--fit", fit_dir, "Fit directory")->required();
  dims->add_option("--labels", labels, "Label CSV: subject_id,<trait>...")->required();
  dims->add_option("--trait", trait, "Trait column (default: first)");
  dims->add_option("--out", out_path, "Output directory")->required();

  auto* coarsenc = app.add_subcommand("coarsen", "Parcel-level adjacency of selected components");
  add_common(coarsenc, common);
  coarsenc->add_option("--fit", fit_dir, "Fit directory")->required();
  coarsenc->add_option("--components", components, "Comma-separated component numbers, starting at 1")->required();
  coarsenc->add_option("--parcellation", parcellation, "Parcellation CSV (default: octants)");
  coarsenc->add_option("--out", out_path, "Output directory")->required();

  auto* report = app.add_subcommand("report", "Residual trace and p-value summary");
  report->add_option("--fit", fit_dir, "Fit directory")->required();
  report->add_option("--tests", tests, "Result CSVs from test-groups or test-dims");
  report->add_option("--out", out_path, "Output directory")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate) return cmd_simulate(common, out_path, out);
    if (*kde) return cmd_kde(common, endpoints, out_path, out);
    if (*fitc) return cmd_fit(common, endpoints, fields, out_path, out);
    if (*embedc) return cmd_embed(common, fit_dir, endpoints, fields, out_path, out);
    if (*groups) return cmd_test_groups(common, fit_dir, labels, out_path, out);
    if (*dims) return cmd_test_dims(common, fit_dir, labels, trait, out_path, out);
    if (*coarsenc) return cmd_coarsen(common, fit_dir, components, parcellation, out_path, out);
    if (*report) return cmd_report(fit_dir, tests, out_path, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 4;
  }
  return 2;
}

}  // namespace cconn
