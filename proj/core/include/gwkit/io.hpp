#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "gwkit/types.hpp"

namespace gwkit {

/// Parses comma-separated decimal reals, one row per line, no header.
/// Accepts LF or CRLF line endings; a trailing newline is optional.
/// Rejects ragged rows, unparsable cells and non-finite values with the
/// 1-based line/column in the message.
Matrix parseCsvMatrix(std::string_view text);

Matrix loadCsvMatrix(const std::filesystem::path& path);
void saveCsvMatrix(const std::filesystem::path& path, const Matrix& m);

FeatureBatch loadFeatureBatch(const std::filesystem::path& path);
void saveFeatureBatch(const std::filesystem::path& path, const FeatureBatch& batch);

/// A weight vector stored as a single CSV row or a single CSV column.
DiscreteDistribution loadDistribution(const std::filesystem::path& path);

/// Formats with 17 significant digits so that parse(format(x)) == x.
std::string formatCsvMatrix(const Matrix& m);

std::string readTextFile(const std::filesystem::path& path);

/// Flat `key = value` settings. Blank lines and lines starting with '#' are
/// ignored; later keys override earlier ones.
using KeyValueConfig = std::map<std::string, std::string>;

KeyValueConfig parseKeyValueConfig(std::string_view text);
KeyValueConfig loadKeyValueConfig(const std::filesystem::path& path);

}  // namespace gwkit

namespace gwkit {

/// x rounded to `digits` significant decimal digits (non-finite unchanged).
double roundSignificant(double x, int digits = 12);

}  // namespace gwkit
