#include "cconn/matrix_io.hpp"

#include "cconn/errors.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace cconn {

namespace {

static_assert(std::endian::native == std::endian::little, "CCMX I/O assumes a little-endian host");

constexpr char kMagic[4] = {'C', 'C', 'M', 'X'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) throw DataError("truncated CCMX header");
  return v;
}

}  // namespace

void write_ccmx(std::ostream& out, const Eigen::MatrixXd& m) {
  if (m.rows() > std::numeric_limits<std::uint32_t>::max() || m.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw DataError("matrix too large for CCMX");
  }
  out.write(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  put_u32(out, kVersion);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major = m;
  out.write(reinterpret_cast<const char*>(row_major.data()),
            static_cast<std::streamsize>(sizeof(double) * row_major.size()));
  if (!out) throw IoError("failed writing CCMX payload");
}

Eigen::MatrixXd read_ccmx(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw DataError("not a CCMX file");
  const std::uint32_t rows = get_u32(in);
  const std::uint32_t cols = get_u32(in);
  const std::uint32_t version = get_u32(in);
  if (version != kVersion) throw DataError("unsupported CCMX version " + std::to_string(version));
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major(rows, cols);
  if (!in.read(reinterpret_cast<char*>(row_major.data()),
               static_cast<std::streamsize>(sizeof(double) * row_major.size()))) {
    throw DataError("truncated CCMX payload");
  }
  return row_major;
}

void write_ccmx(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  write_atomically(path, [&](std::ostream& out) { write_ccmx(out, m); }, true);
}

Eigen::MatrixXd read_ccmx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_ccmx(in);
}

void write_csv_matrix(std::ostream& out, const Eigen::MatrixXd& m, const std::vector<std::string>& header) {
  out.precision(17);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  if (!header.empty()) out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
    out << '\n';
  }
}

void write_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fill,
                      bool binary) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    try {
      fill(out);
    } catch (...) {
      out.close();
      std::filesystem::remove(tmp);
      throw;
    }
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw IoError("failed writing " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else if (c != '\r' && c != '\n') {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  for (auto& f : fields) {
    const auto first = f.find_first_not_of(" \t");
    const auto last = f.find_last_not_of(" \t");
    f = first == std::string::npos ? std::string() : f.substr(first, last - first + 1);
  }
  return fields;
}

}  // namespace cconn
