#include "core/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "core/error.hpp"

namespace gqr {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

bool parse_double(const std::string& token, double& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  const auto result = std::from_chars(first, last, out);
  return result.ec == std::errc() && result.ptr == last && std::isfinite(out);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::io, "cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  require(!in.bad(), ErrorCode::io, "read failed: " + path);
  return ss.str();
}

}  // namespace

CsvTable parse_csv(const std::string& text, const std::string& origin) {
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;
  {
    std::istringstream lines(text);
    std::string line;
    int line_no = 0;
    while (std::getline(lines, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      rows.push_back(split_fields(line));
      line_numbers.push_back(line_no);
    }
  }
  require(!rows.empty(), ErrorCode::io, origin + ": no data rows");

  const size_t width = rows[0].size();
  require(width >= 1, ErrorCode::io, origin + ": empty first row");
  for (size_t r = 0; r < rows.size(); ++r) {
    require(rows[r].size() == width, ErrorCode::io,
            origin + ": line " + std::to_string(line_numbers[r]) + " has " +
                std::to_string(rows[r].size()) + " fields, expected " + std::to_string(width));
  }

  CsvTable table;
  size_t first_data = 0;
  {
    bool numeric = true;
    double value = 0.0;
    for (const std::string& field : rows[0]) {
      if (!parse_double(field, value)) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      table.had_header = true;
      table.column_names = rows[0];
      first_data = 1;
    }
  }
  require(rows.size() > first_data, ErrorCode::io, origin + ": header but no data rows");

  const auto n = static_cast<Eigen::Index>(rows.size() - first_data);
  table.values.resize(n, static_cast<Eigen::Index>(width));
  for (size_t r = first_data; r < rows.size(); ++r) {
    for (size_t c = 0; c < width; ++c) {
      double value = 0.0;
      require(parse_double(rows[r][c], value), ErrorCode::io,
              origin + ": line " + std::to_string(line_numbers[r]) + ", field " +
                  std::to_string(c + 1) + ": not a finite number: '" + rows[r][c] + "'");
      table.values(static_cast<Eigen::Index>(r - first_data), static_cast<Eigen::Index>(c)) =
          value;
    }
  }
  return table;
}

CsvTable read_csv(const std::string& path) { return parse_csv(read_file(path), path); }

std::vector<int> parse_group_sizes(const std::string& text, const std::string& origin) {
  std::vector<int> sizes;
  std::string token;
  const auto flush = [&]() {
    if (token.empty()) return;
    int value = 0;
    const auto result = std::from_chars(token.data(), token.data() + token.size(), value);
    require(result.ec == std::errc() && result.ptr == token.data() + token.size(),
            ErrorCode::io, origin + ": not an integer group size: '" + token + "'");
    require(value >= 1, ErrorCode::io,
            origin + ": group sizes must be positive, got " + std::to_string(value));
    sizes.push_back(value);
    token.clear();
  };
  for (const char ch : text) {
    if (ch == ',' || ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
      flush();
    } else {
      token.push_back(ch);
    }
  }
  flush();
  require(!sizes.empty(), ErrorCode::io, origin + ": no group sizes");
  return sizes;
}

std::vector<int> read_group_sizes(const std::string& path) {
  return parse_group_sizes(read_file(path), path);
}

int resolve_response(const CsvTable& table, const std::string& selector) {
  if (selector.empty()) return 0;
  {
    int index = 0;
    const auto result =
        std::from_chars(selector.data(), selector.data() + selector.size(), index);
    if (result.ec == std::errc() && result.ptr == selector.data() + selector.size()) {
      require(index >= 0 && index < table.cols(), ErrorCode::invalid_argument,
              "response column " + selector + " out of range for " +
                  std::to_string(table.cols()) + " columns");
      return index;
    }
  }
  require(table.had_header, ErrorCode::invalid_argument,
          "response named '" + selector + "' needs a header row");
  for (size_t j = 0; j < table.column_names.size(); ++j) {
    if (table.column_names[j] == selector) return static_cast<int>(j);
  }
  fail(ErrorCode::invalid_argument, "no column named '" + selector + "'");
}

ResponseSplit split_response(const CsvTable& table, const std::string& selector) {
  require(table.cols() >= 2, ErrorCode::invalid_argument,
          "need at least one covariate column besides the response");
  const int response = resolve_response(table, selector);
  ResponseSplit split;
  split.response_column = response;
  split.y = table.values.col(response);
  split.x.resize(table.rows(), table.cols() - 1);
  int out = 0;
  for (int j = 0; j < table.cols(); ++j) {
    if (j == response) continue;
    split.x.col(out) = table.values.col(j);
    if (table.had_header) split.x_names.push_back(table.column_names[static_cast<size_t>(j)]);
    ++out;
  }
  return split;
}

}  // namespace gqr
