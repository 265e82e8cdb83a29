#pragma once
#include <Eigen/Dense>
#include <string>
#include <vector>

namespace gqr {

// Numeric CSV with an optional header row. The header is auto-detected: if
// any field of the first non-blank line fails to parse as a finite number,
// that line is treated as the header. column_names is empty when the file
// has no header.
struct CsvTable {
  std::vector<std::string> column_names;
  Eigen::MatrixXd values;
  bool had_header = false;

  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
};

// Reads a comma-separated numeric table. Fields may carry surrounding blanks;
// blank lines and trailing carriage returns are ignored; every value must be
// a finite number and every row must have the same width.
CsvTable read_csv(const std::string& path);

// Parses CSV text already in memory (same rules as read_csv).
CsvTable parse_csv(const std::string& text, const std::string& origin = "<memory>");

// Sidecar list of group sizes such as "1,5,5"; commas and whitespace both
// separate tokens. Sizes must be positive.
std::vector<int> read_group_sizes(const std::string& path);
std::vector<int> parse_group_sizes(const std::string& text,
                                   const std::string& origin = "<memory>");

// Resolves a response-column selector: empty picks column 0, digits pick a
// zero-based position, anything else matches a header name (which requires a
// header).
int resolve_response(const CsvTable& table, const std::string& selector);

// The selected column as the response and the remaining columns, in file
// order, as covariates.
struct ResponseSplit {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  std::vector<std::string> x_names;  // empty when the table had no header
  int response_column = 0;
};

ResponseSplit split_response(const CsvTable& table, const std::string& selector);

}  // namespace gqr
