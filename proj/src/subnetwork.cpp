#include "cconn/subnetwork.hpp"

#include "cconn/errors.hpp"
#include "cconn/matrix_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>

namespace cconn {

namespace {

constexpr double kSupportThreshold = 1e-10;

int parse_int(const std::string& field, std::size_t line) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(field, &used);
    if (used != field.size()) throw ParseError("expected an integer, got '" + field + "'", line);
    return v;
  } catch (const std::logic_error&) {
    throw ParseError("expected an integer, got '" + field + "'", line);
  }
}

}  // namespace

Parcellation make_parcellation(const std::vector<int>& point_ids,
                               const std::vector<std::pair<int, std::string>>& names_by_id, double grid_weight) {
  if (!(grid_weight > 0.0)) throw ConfigError("grid weight must be positive");
  std::map<int, std::string> names;
  for (const auto& [id, name] : names_by_id) {
    const auto [it, inserted] = names.emplace(id, name);
    if (!inserted && it->second != name) throw DataError("parcel " + std::to_string(id) + " has two names");
  }
  std::map<int, int> counts;
  for (int id : point_ids) {
    ++counts[id];
    names.emplace(id, "parcel" + std::to_string(id));
  }
  Parcellation parc;
  std::map<int, int> index_of;
  for (const auto& [id, name] : names) {
    const auto found = counts.find(id);
    if (found == counts.end()) {
      warn("parcel " + name + " contains no grid points and is excluded");
      continue;
    }
    index_of[id] = parc.size();
    parc.ids.push_back(id);
    parc.names.push_back(name);
    parc.counts.push_back(found->second);
    parc.areas.push_back(found->second * grid_weight);
  }
  parc.parcel_of.reserve(point_ids.size());
  for (int id : point_ids) parc.parcel_of.push_back(index_of.at(id));
  return parc;
}

Parcellation octant_parcellation(const Grid& grid) {
  std::vector<int> ids;
  ids.reserve(grid.points.size());
  for (const auto& p : grid.points) {
    const Vec3& d = p.direction;
    const int octant = (d.x() >= 0.0 ? 4 : 0) + (d.y() >= 0.0 ? 2 : 0) + (d.z() >= 0.0 ? 1 : 0);
    ids.push_back((p.hemisphere == Hemisphere::Left ? 0 : 8) + octant);
  }
  std::vector<std::pair<int, std::string>> names;
  for (int h = 0; h < 2; ++h) {
    for (int o = 0; o < 8; ++o) {
      std::string name = h == 0 ? "L_" : "R_";
      name += (o & 4) ? "x+" : "x-";
      name += (o & 2) ? "y+" : "y-";
      name += (o & 1) ? "z+" : "z-";
      names.emplace_back(8 * h + o, name);
    }
  }
  return make_parcellation(ids, names, grid.weight());
}

Parcellation read_parcellation(std::istream& in, const Grid& grid) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty parcellation file", 1);
  if (split_csv(line) != std::vector<std::string>{"grid_index", "parcel_id", "parcel_name"}) {
    throw ParseError("expected header grid_index,parcel_id,parcel_name", 1);
  }
  std::vector<int> ids(static_cast<std::size_t>(grid.size()), 0);
  std::vector<bool> seen(ids.size(), false);
  std::vector<std::pair<int, std::string>> names;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv(line);
    if (fields.size() != 3) throw ParseError("expected 3 fields", line_no);
    const int index = parse_int(fields[0], line_no);
    const int id = parse_int(fields[1], line_no);
    if (index < 0 || index >= grid.size()) throw ParseError("grid index out of range", line_no);
    if (seen[index]) throw ParseError("grid index " + std::to_string(index) + " labeled twice", line_no);
    seen[index] = true;
    ids[index] = id;
    names.emplace_back(id, fields[2]);
  }
  const auto missing = std::find(seen.begin(), seen.end(), false);
  if (missing != seen.end()) {
    throw DataError("grid point " + std::to_string(missing - seen.begin()) + " has no parcel label");
  }
  return make_parcellation(ids, names, grid.weight());
}

Parcellation read_parcellation(const std::filesystem::path& path, const Grid& grid) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open parcellation " + path.string());
  return read_parcellation(in, grid);
}

void write_parcellation(std::ostream& out, const Parcellation& parc) {
  out << "grid_index,parcel_id,parcel_name\n";
  for (std::size_t i = 0; i < parc.parcel_of.size(); ++i) {
    const int p = parc.parcel_of[i];
    out << i << ',' << parc.ids[p] << ',' << parc.names[p] << '\n';
  }
}

std::vector<bool> support_set(const Eigen::VectorXd& c, const BasisSystem& sys) {
  if (c.size() != sys.size()) throw DataError("coefficient vector does not match the basis");
  const Eigen::VectorXd values = sys.evaluation() * c;
  std::vector<bool> out(static_cast<std::size_t>(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) out[i] = std::abs(values[i]) > kSupportThreshold;
  return out;
}

Eigen::MatrixXd coarsen(std::span<const int> selected, const ReducedRankBasis& basis, const BasisSystem& sys,
                        const Parcellation& parc) {
  if (selected.empty()) throw ConfigError("no components selected for coarsening");
  if (static_cast<int>(parc.parcel_of.size()) != sys.grid_size()) throw DataError("parcellation does not match the grid");
  const int p = parc.size();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd inside(p);
  for (int k : selected) {
    if (k < 0 || k >= basis.rank()) throw ConfigError("component index " + std::to_string(k) + " out of range");
    const auto support = support_set(basis.C.col(k), sys);
    inside.setZero();
    for (std::size_t i = 0; i < support.size(); ++i) {
      if (support[i]) inside[parc.parcel_of[i]] += 1.0;
    }
    for (int r = 0; r < p; ++r) {
      for (int s = 0; s < p; ++s) {
        a(r, s) += (inside[r] * inside[s]) / (static_cast<double>(parc.counts[r]) * parc.counts[s]);
      }
    }
  }
  return a;
}

std::vector<Edge> top_edges(const Eigen::MatrixXd& A, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("edge fraction must lie in (0, 1]");
  std::vector<Edge> edges;
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    for (Eigen::Index c = r; c < A.cols(); ++c) {
      if (A(r, c) != 0.0) edges.push_back({static_cast<int>(r), static_cast<int>(c), A(r, c)});
    }
  }
  std::stable_sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    if (x.weight != y.weight) return x.weight > y.weight;
    return x.a != y.a ? x.a < y.a : x.b < y.b;
  });
  const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(edges.size())));
  edges.resize(std::min(keep, edges.size()));
  return edges;
}

void write_adjacency_csv(std::ostream& out, const Eigen::MatrixXd& A, const Parcellation& parc) {
  if (A.rows() != parc.size() || A.cols() != parc.size()) throw DataError("adjacency does not match the parcellation");
  write_csv_matrix(out, A, parc.names);
}

void write_edges_csv(std::ostream& out, const std::vector<Edge>& edges, const Parcellation& parc) {
  out << "parcel_a,parcel_b,weight\n" << std::setprecision(17);
  for (const auto& e : edges) out << parc.names[e.a] << ',' << parc.names[e.b] << ',' << e.weight << '\n';
}

}  // namespace cconn
