#include "gwkit/losses.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <string>

#include "gwkit/error.hpp"
#include "gwkit/io.hpp"

namespace gwkit {

namespace {

void checkScore(double s) {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw InputError("discriminator score " + std::to_string(s) + " outside [0, 1]");
  }
}

double safeLog(double p) { return std::log(std::max(p, kProbabilityFloor)); }

// Mean of log(real) plus mean of log(1 - fake).
double adversarialTerm(std::span<const ScoreRecord> records) {
  double realSum = 0.0;
  double fakeSum = 0.0;
  for (const auto& r : records) {
    checkScore(r.realScore);
    checkScore(r.fakeScore);
    realSum += safeLog(r.realScore);
    fakeSum += safeLog(1.0 - r.fakeScore);
  }
  const double n = static_cast<double>(records.size());
  return realSum / n + fakeSum / n;
}

double contextLoss(std::span<const ScoreRecord> records, ScoreContext ctx,
                   const char* name) {
  if (records.empty()) throw InputError(std::string(name) + " loss needs at least one record");
  for (const auto& r : records) {
    if (r.context != ctx) {
      throw InputError(std::string(name) + " loss received a record of another context");
    }
  }
  return adversarialTerm(records);
}

}  // namespace

double spatialLoss(std::span<const ScoreRecord> records) {
  return contextLoss(records, ScoreContext::kSpatial, "spatial");
}

double temporalLoss(std::span<const ScoreRecord> records) {
  return contextLoss(records, ScoreContext::kTemporal, "temporal");
}

double localRefinementLoss(std::span<const ScoreRecord> records) {
  if (records.empty()) throw InputError("local refinement loss needs at least one record");
  std::array<std::vector<ScoreRecord>, 5> groups;
  for (const auto& r : records) {
    if (r.context != ScoreContext::kLocalPart) {
      throw InputError("local refinement loss received a non-local record");
    }
    if (r.partIndex < 1 || r.partIndex > 5) {
      throw InputError("local part index " + std::to_string(r.partIndex) + " outside 1..5");
    }
    groups[r.partIndex - 1].push_back(r);
  }
  double total = 0.0;
  for (const auto& g : groups) {
    if (!g.empty()) total += adversarialTerm(g);
  }
  return total;
}

double weightedObjective(const LossTerms& terms, const LossWeights& weights) {
  double total = 0.0;
  if (terms.gw) total += weights.gw * *terms.gw;
  if (terms.spatial) total += weights.spatial * *terms.spatial;
  if (terms.temporal) total += weights.temporal * *terms.temporal;
  if (terms.local) total += weights.local * *terms.local;
  return total;
}

LossTerms evaluateLosses(std::span<const ScoreRecord> records) {
  std::vector<ScoreRecord> spatial, temporal, local;
  for (const auto& r : records) {
    switch (r.context) {
      case ScoreContext::kSpatial: spatial.push_back(r); break;
      case ScoreContext::kTemporal: temporal.push_back(r); break;
      case ScoreContext::kLocalPart: local.push_back(r); break;
    }
  }
  LossTerms terms;
  if (!spatial.empty()) terms.spatial = spatialLoss(spatial);
  if (!temporal.empty()) terms.temporal = temporalLoss(temporal);
  if (!local.empty()) terms.local = localRefinementLoss(local);
  return terms;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parseReal(std::string_view cell, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw InputError("scores line " + std::to_string(line) + ": cannot parse '" +
                     std::string(cell) + "'");
  }
  return v;
}

}  // namespace

std::vector<ScoreRecord> parseScores(std::string_view csv) {
  std::vector<ScoreRecord> out;
  std::size_t lineNo = 0;
  std::size_t start = 0;
  while (start < csv.size()) {
    auto end = csv.find('\n', start);
    if (end == std::string_view::npos) end = csv.size();
    const auto line = trim(csv.substr(start, end - start));
    start = end + 1;
    ++lineNo;
    if (line.empty()) continue;
    if (lineNo == 1 && line.starts_with("context")) continue;

    std::array<std::string_view, 4> cells;
    std::size_t count = 0;
    std::size_t pos = 0;
    while (true) {
      const auto comma = line.find(',', pos);
      const auto cell = trim(line.substr(pos, comma == std::string_view::npos
                                                  ? std::string_view::npos
                                                  : comma - pos));
      if (count == cells.size()) {
        throw InputError("scores line " + std::to_string(lineNo) + ": expected 4 fields");
      }
      cells[count++] = cell;
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (count != 4) {
      throw InputError("scores line " + std::to_string(lineNo) + ": expected 4 fields");
    }

    ScoreRecord rec;
    if (cells[0] == "spatial") {
      rec.context = ScoreContext::kSpatial;
    } else if (cells[0] == "temporal") {
      rec.context = ScoreContext::kTemporal;
    } else if (cells[0] == "local") {
      rec.context = ScoreContext::kLocalPart;
    } else {
      throw InputError("scores line " + std::to_string(lineNo) + ": unknown context '" +
                       std::string(cells[0]) + "'");
    }
    if (rec.context == ScoreContext::kLocalPart || !cells[1].empty()) {
      const double idx = parseReal(cells[1], lineNo);
      rec.partIndex = static_cast<int>(idx);
      if (rec.partIndex != idx) {
        throw InputError("scores line " + std::to_string(lineNo) + ": part index must be an integer");
      }
    }
    if (rec.context == ScoreContext::kLocalPart && (rec.partIndex < 1 || rec.partIndex > 5)) {
      throw InputError("scores line " + std::to_string(lineNo) + ": part index outside 1..5");
    }
    rec.realScore = parseReal(cells[2], lineNo);
    rec.fakeScore = parseReal(cells[3], lineNo);
    checkScore(rec.realScore);
    checkScore(rec.fakeScore);
    out.push_back(rec);
  }
  return out;
}

std::vector<ScoreRecord> loadScores(const std::filesystem::path& path) {
  try {
    return parseScores(readTextFile(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace gwkit
