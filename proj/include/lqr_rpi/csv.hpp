#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lqr_rpi::csv {

/// Scientific notation with 17 significant digits; "inf", "-inf", "nan" for
/// non-finite values.
std::string format_double(double x);

/// Quotes a field when it contains a comma, quote or newline.
std::string escape(const std::string& field);

void write_row(std::ostream& os, const std::vector<std::string>& fields);

/// Header row followed by one row per matrix row. Lines starting with '#'
/// are written first, one per entry of `comments`.
void write_matrix(const std::string& path, const Eigen::MatrixXd& x,
                  const std::vector<std::string>& header,
                  const std::vector<std::string>& comments = {});

/// Reads a file written by write_matrix (skips '#' lines and the header).
Eigen::MatrixXd read_matrix(const std::string& path);

}  // namespace lqr_rpi::csv
