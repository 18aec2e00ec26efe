#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace cconn {

// Dense binary matrix format. Header (16 bytes, little-endian):
//   "CCMX" | u32 rows | u32 cols | u32 version (=1)
// followed by rows*cols IEEE-754 doubles in row-major order.
void write_ccmx(std::ostream& out, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_ccmx(std::istream& in);
void write_ccmx(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_ccmx(const std::filesystem::path& path);

// Comma-separated rows with 17 significant digits; optional header row.
void write_csv_matrix(std::ostream& out, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header = {});

// Writes through `fill` into a sibling temporary file and renames it over
// `path` only after `fill` returns, so readers never see partial output.
void write_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fill,
                      bool binary = false);

// Splits one CSV line on commas (no quoting; the formats here never need it).
std::vector<std::string> split_csv(const std::string& line);

}  // namespace cconn
