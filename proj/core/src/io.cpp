#include "gwkit/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "gwkit/error.hpp"

namespace gwkit {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> splitLines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  // A final newline produces one empty trailing entry.
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

std::string location(std::size_t line, std::size_t column) {
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

}  // namespace

Matrix parseCsvMatrix(std::string_view text) {
  // Skip a UTF-8 byte order mark.
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  const auto lines = splitLines(text);
  if (lines.empty()) throw InputError("no rows");

  std::vector<std::vector<double>> rows;
  rows.reserve(lines.size());
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::size_t lineNo = li + 1;
    if (trim(lines[li]).empty()) {
      throw InputError("empty row at line " + std::to_string(lineNo));
    }
    std::vector<double> row;
    std::size_t start = 0;
    const auto line = lines[li];
    while (true) {
      auto end = line.find(',', start);
      if (end == std::string_view::npos) end = line.size();
      const auto cell = trim(line.substr(start, end - start));
      const std::size_t col = row.size() + 1;
      double value = 0.0;
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (!cell.empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, value);
      if (cell.empty() || ec != std::errc() || ptr != last) {
        throw InputError("cannot parse value '" + std::string(cell) + "' at " +
                         location(lineNo, col));
      }
      if (!std::isfinite(value)) {
        throw InputError("non-finite value at " + location(lineNo, col));
      }
      row.push_back(value);
      if (end == line.size()) break;
      start = end + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw InputError("ragged row at line " + std::to_string(lineNo));
    }
    rows.push_back(std::move(row));
  }

  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

std::string readTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

Matrix loadCsvMatrix(const std::filesystem::path& path) {
  try {
    return parseCsvMatrix(readTextFile(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string formatCsvMatrix(const Matrix& m) {
  std::string out;
  char buf[32];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out += ',';
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void saveCsvMatrix(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write file: " + path.string());
  out << formatCsvMatrix(m);
}

FeatureBatch loadFeatureBatch(const std::filesystem::path& path) {
  return FeatureBatch(loadCsvMatrix(path));
}

void saveFeatureBatch(const std::filesystem::path& path, const FeatureBatch& batch) {
  saveCsvMatrix(path, batch.vectors());
}

DiscreteDistribution loadDistribution(const std::filesystem::path& path) {
  const Matrix m = loadCsvMatrix(path);
  if (m.rows() != 1 && m.cols() != 1) {
    throw InputError(path.string() + ": weights must form a single row or column");
  }
  return DiscreteDistribution(Eigen::Map<const Vector>(m.data(), m.size()));
}

KeyValueConfig parseKeyValueConfig(std::string_view text) {
  KeyValueConfig config;
  std::size_t lineNo = 0;
  for (const auto raw : splitLines(text)) {
    ++lineNo;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw InputError("config line " + std::to_string(lineNo) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (key.empty()) {
      throw InputError("config line " + std::to_string(lineNo) + ": empty key");
    }
    config[std::string(key)] = std::string(value);
  }
  return config;
}

KeyValueConfig loadKeyValueConfig(const std::filesystem::path& path) {
  return parseKeyValueConfig(readTextFile(path));
}

}  // namespace gwkit

namespace gwkit {

double roundSignificant(double x, int digits) {
  if (!std::isfinite(x) || x == 0.0) return x;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  double out = x;
  std::from_chars(buf, buf + std::char_traits<char>::length(buf), out);
  return out;
}

}  // namespace gwkit
