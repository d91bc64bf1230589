#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gwkit/types.hpp"

namespace gwkit {

using Point2 = Eigen::Vector2d;

struct FaceLandmarks {
  std::string frameId;
  Point2 rightEye;
  Point2 leftEye;
  Point2 mouthLeft;
  Point2 mouthRight;
  Point2 nose;

  /// Throws InputError on non-finite coordinates or coincident eyes.
  void validate() const;
};

/// Five orientation vectors normalized by the inter-ocular distance:
/// v[0] right eye -> left eye, v[1] left eye -> mouth left,
/// v[2] mouth left -> mouth right, v[3] mouth right -> right eye,
/// v[4] eye center -> nose. v[0..3] close a loop, so they sum to zero.
struct FaceVectorField {
  std::array<Point2, 5> v;
};

FaceVectorField vectorField(const FaceLandmarks& lm);

/// Guard added to the similarity denominator; S(a, a) = 1 / kSimilarityGuard.
inline constexpr double kSimilarityGuard = 1e-8;

/// S = 1 / (delta + sum_i ||a.v_i - b.v_i||_2).
double orientationSimilarity(const FaceVectorField& a, const FaceVectorField& b);

struct FaceEntry {
  std::string frameId;
  FaceVectorField field;
};

struct Candidate {
  std::string frameId;
  double similarity = 0.0;
};

struct CandidateSelection {
  std::vector<Candidate> candidates;
  /// Set when the database held fewer than m entries.
  bool truncated = false;
};

/// The m most similar entries, by descending similarity; equal similarities
/// are ordered by ascending frameId.
CandidateSelection topMCandidates(const FaceVectorField& query,
                                  const std::vector<FaceEntry>& database, int m);

struct BlendWeights {
  double alpha = 0.5;
  double beta = 0.5;
  std::vector<double> lambdas;

  /// alpha = beta = 0.5 with uniform lambdas 1/m.
  static BlendWeights uniform(int m);

  /// Requires nonnegative finite lambdas and alpha * sum(lambda) + beta = 1
  /// within 1e-9.
  void validate() const;

  /// For fewer candidates than lambdas: the leading `count` lambdas rescaled
  /// to the full lambda sum, so alpha * sum(lambda) + beta is unchanged. All
  /// zero leading lambdas become equal shares.
  BlendWeights truncated(std::size_t count) const;
};

/// out = alpha * sum_i lambda_i f_i + beta * generated, per channel, rounded
/// half-up and clamped to [0, 255].
RasterImage blendFace(const std::vector<RasterImage>& candidates,
                      const RasterImage& generated, const BlendWeights& w);

/// Landmark JSON: {"frame_id": s, "right_eye": [x,y], "left_eye": [x,y],
/// "mouth_left": [x,y], "mouth_right": [x,y], "nose": [x,y]}.
FaceLandmarks parseLandmarks(std::string_view json);
FaceLandmarks loadLandmarks(const std::filesystem::path& path);
/// A JSON array of landmark objects.
std::vector<FaceLandmarks> loadLandmarkDatabase(const std::filesystem::path& path);
std::vector<FaceEntry> buildFaceDatabase(const std::vector<FaceLandmarks>& landmarks);

}  // namespace gwkit
