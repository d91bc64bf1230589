#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gwkit/facegeom.hpp"
#include "gwkit/types.hpp"

namespace gwkit {

/// Input files of one frame. Relative paths in a manifest file are resolved
/// against the manifest's directory.
struct FrameManifest {
  std::string frameId;
  std::filesystem::path foreground;
  std::filesystem::path background;
  std::filesystem::path mask;
  /// Landmarks of the generated face; empty skips face enhancement.
  std::filesystem::path landmarks;
  std::filesystem::path crops;
  /// Residual PNG per part index; parts without one get a zero residual.
  std::map<int, std::filesystem::path> residuals;
  /// Landmark database (JSON array) and the directory holding
  /// <frame_id>.png face crops for its entries.
  std::filesystem::path faceDatabase;
  std::filesystem::path faceDir;
  std::optional<std::filesystem::path> groundTruth;
};

/// Reads a JSON array of manifests:
/// {"frame_id", "foreground", "background", "mask", "landmarks", "crops",
///  "residuals": {"1": path, ...}, "face_database", "face_dir", "ground_truth"}.
std::vector<FrameManifest> loadManifests(const std::filesystem::path& path);

struct StageTiming {
  std::string stage;
  double millis = 0.0;
};

struct FrameReport {
  std::string frameId;
  bool ok = false;
  std::string failedStage;
  std::string error;
  bool faceEnhanced = false;
  std::vector<Candidate> candidates;
  bool candidatesTruncated = false;
  /// Saturated channel values per part after adding its residual.
  std::map<int, std::size_t> residualClamps;
  std::vector<StageTiming> timings;
  std::optional<double> ssim;
  std::optional<double> psnr;
};

struct FrameResult {
  FrameReport report;
  std::optional<RasterImage> image;
};

/// Face search and blend on part 1, residuals on every cropped part, paste
/// back in part order, fuse with the background, then score against the
/// ground truth when one is given. Stage errors are captured in the report.
FrameResult processFrame(const FrameManifest& manifest, const BlendWeights& weights, int m);

struct PipelineConfig {
  BlendWeights weights = BlendWeights::uniform(3);
  int topM = 3;
  int jobs = 1;
};

struct SequenceSummary {
  /// Sorted by frameId.
  std::vector<FrameReport> frames;
  std::size_t failures = 0;
  std::optional<double> meanSsim;
  std::optional<double> meanPsnr;
};

/// Processes every manifest (concurrently when cfg.jobs > 1) and, when
/// outDir is given, writes <outDir>/<frameId>.png and <outDir>/report.json.
SequenceSummary processSequence(const std::vector<FrameManifest>& manifests,
                                const PipelineConfig& cfg,
                                const std::optional<std::filesystem::path>& outDir = {});

/// Report JSON (schema_version 1); "inf" stands for an infinite PSNR.
std::string summaryJson(const SequenceSummary& summary, bool includeTimings = true);

}  // namespace gwkit
