#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace gwkit {

enum class ScoreContext { kSpatial, kTemporal, kLocalPart };

/// Discriminator outputs for one real/fake pair.
struct ScoreRecord {
  double realScore = 1.0;
  double fakeScore = 0.0;
  ScoreContext context = ScoreContext::kSpatial;
  /// 1..5 for kLocalPart (1 = face), ignored otherwise.
  int partIndex = 0;
};

/// Floor applied to the arguments of both logarithms.
inline constexpr double kProbabilityFloor = 1e-12;

/// mean log D(real) + mean log(1 - D(fake)) over spatial records.
double spatialLoss(std::span<const ScoreRecord> records);
/// Same over temporal (three-frame window) records.
double temporalLoss(std::span<const ScoreRecord> records);
/// Sum over present parts j of [mean log D_j(real) + mean log(1 - D_j(fake))].
double localRefinementLoss(std::span<const ScoreRecord> records);

/// Linear combination of the loss terms. The relative weighting is a user
/// choice; the defaults are all 1.
struct LossWeights {
  double gw = 1.0;
  double spatial = 1.0;
  double temporal = 1.0;
  double local = 1.0;
};

struct LossTerms {
  std::optional<double> gw;
  std::optional<double> spatial;
  std::optional<double> temporal;
  std::optional<double> local;
};

/// Weighted sum of the terms that are present.
double weightedObjective(const LossTerms& terms, const LossWeights& weights);

/// Evaluates every context that has records.
LossTerms evaluateLosses(std::span<const ScoreRecord> records);

/// Scores CSV rows: context,part_index,real_score,fake_score with context in
/// {spatial, temporal, local}. An optional header row starting with
/// "context" is skipped; part_index may be empty outside local rows.
std::vector<ScoreRecord> parseScores(std::string_view csv);
std::vector<ScoreRecord> loadScores(const std::filesystem::path& path);

}  // namespace gwkit
