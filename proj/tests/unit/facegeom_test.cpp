#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "gwkit/error.hpp"
#include "gwkit/facegeom.hpp"
#include "test_support.hpp"

namespace gwkit {
namespace {

FaceLandmarks squareFace() {
  FaceLandmarks lm;
  lm.frameId = "f";
  lm.rightEye = {0, 0};
  lm.leftEye = {2, 0};
  lm.mouthLeft = {2, 2};
  lm.mouthRight = {0, 2};
  lm.nose = {1, 1};
  return lm;
}

FaceLandmarks randomFace(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  FaceLandmarks lm;
  lm.frameId = "r";
  lm.rightEye = {u(rng), u(rng)};
  do {
    lm.leftEye = {u(rng), u(rng)};
  } while ((lm.leftEye - lm.rightEye).norm() < 1e-3);
  lm.mouthLeft = {u(rng), u(rng)};
  lm.mouthRight = {u(rng), u(rng)};
  lm.nose = {u(rng), u(rng)};
  return lm;
}

FaceLandmarks transformed(const FaceLandmarks& lm, double s, const Point2& t) {
  FaceLandmarks out = lm;
  for (Point2* p : {&out.rightEye, &out.leftEye, &out.mouthLeft, &out.mouthRight, &out.nose})
    *p = s * *p + t;
  return out;
}

TEST(VectorField, SquareFaceHandValues) {
  const auto f = vectorField(squareFace());
  EXPECT_EQ(f.v[0], Point2(1, 0));
  EXPECT_EQ(f.v[1], Point2(0, 1));
  EXPECT_EQ(f.v[2], Point2(-1, 0));
  EXPECT_EQ(f.v[3], Point2(0, -1));
  EXPECT_EQ(f.v[4], Point2(0, 0.5));
  EXPECT_EQ(f.v[0] + f.v[1] + f.v[2] + f.v[3], Point2(0, 0));
}

TEST(VectorField, CoincidentEyesRejected) {
  auto lm = squareFace();
  lm.leftEye = lm.rightEye;
  EXPECT_THROW(vectorField(lm), InputError);
  lm = squareFace();
  lm.nose.x() = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(vectorField(lm), InputError);
}

TEST(VectorField, ClosedLoopAndUnitFirstVector) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto f = vectorField(randomFace(rng));
    ASSERT_LE((f.v[0] + f.v[1] + f.v[2] + f.v[3]).norm(), 1e-9);
    ASSERT_NEAR(f.v[0].norm(), 1.0, 1e-12);
  }
}

TEST(VectorField, ScaleAndTranslationInvariant) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> logScale(-3.0, 3.0), shift(-500.0, 500.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto lm = randomFace(rng);
    const auto moved = transformed(lm, std::exp(logScale(rng)), Point2(shift(rng), shift(rng)));
    const auto a = vectorField(lm);
    const auto b = vectorField(moved);
    for (int i = 0; i < 5; ++i) ASSERT_LE((a.v[i] - b.v[i]).norm(), 1e-9);
  }
}

TEST(VectorField, InPlaneRotationChangesField) {
  auto lm = squareFace();
  auto rotated = lm;
  for (Point2* p : {&rotated.rightEye, &rotated.leftEye, &rotated.mouthLeft,
                    &rotated.mouthRight, &rotated.nose})
    *p = Point2(-p->y(), p->x());
  EXPECT_LT(orientationSimilarity(vectorField(lm), vectorField(rotated)), 1.0);
}

TEST(OrientationSimilarity, IdenticalFieldsHitGuardedMaximum) {
  const auto f = vectorField(squareFace());
  EXPECT_DOUBLE_EQ(orientationSimilarity(f, f), 1e8);
}

TEST(OrientationSimilarity, SinglePerturbedVector) {
  const auto a = vectorField(squareFace());
  auto b = a;
  b.v[4] += Point2(0.3, 0.4);  // L2 distance 0.5
  const double s = orientationSimilarity(a, b);
  EXPECT_NEAR(s, 1.0 / (0.5 + 1e-8), 1e-9);
  EXPECT_NEAR(s, 2.0, 1e-7);
  EXPECT_EQ(s, orientationSimilarity(b, a));
}

TEST(OrientationSimilarity, SymmetricPositiveAndMaximalAtSelf) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 500; ++trial) {
    const auto a = vectorField(randomFace(rng));
    const auto b = vectorField(randomFace(rng));
    const double sab = orientationSimilarity(a, b);
    ASSERT_GT(sab, 0.0);
    ASSERT_EQ(sab, orientationSimilarity(b, a));
    ASSERT_GE(orientationSimilarity(a, a), sab);
  }
}

FaceEntry entryAtDistance(const FaceVectorField& q, const std::string& id, double dist) {
  FaceEntry e{id, q};
  e.field.v[2] += Point2(dist, 0);
  return e;
}

TEST(TopMCandidates, OrdersByDescendingSimilarity) {
  const auto q = vectorField(squareFace());
  // Similarities 2.0, 5.0, 1.0 up to the guard.
  const std::vector<FaceEntry> db{entryAtDistance(q, "a", 0.5), entryAtDistance(q, "b", 0.2),
                                  entryAtDistance(q, "c", 1.0)};
  const auto sel = topMCandidates(q, db, 2);
  ASSERT_EQ(sel.candidates.size(), 2u);
  EXPECT_EQ(sel.candidates[0].frameId, "b");
  EXPECT_EQ(sel.candidates[1].frameId, "a");
  EXPECT_NEAR(sel.candidates[0].similarity, 5.0, 1e-6);
  EXPECT_FALSE(sel.truncated);
}

TEST(TopMCandidates, ExactMatchWins) {
  const auto q = vectorField(squareFace());
  const std::vector<FaceEntry> db{entryAtDistance(q, "a", 0.1), FaceEntry{"self", q}};
  const auto sel = topMCandidates(q, db, 1);
  EXPECT_EQ(sel.candidates.at(0).frameId, "self");
  EXPECT_DOUBLE_EQ(sel.candidates[0].similarity, 1e8);
}

TEST(TopMCandidates, ShortDatabaseSetsFlag) {
  const auto q = vectorField(squareFace());
  const std::vector<FaceEntry> db{entryAtDistance(q, "a", 0.1), entryAtDistance(q, "b", 0.2),
                                  entryAtDistance(q, "c", 0.3)};
  const auto sel = topMCandidates(q, db, 5);
  EXPECT_EQ(sel.candidates.size(), 3u);
  EXPECT_TRUE(sel.truncated);
}

TEST(TopMCandidates, RejectsEmptyDatabaseAndBadM) {
  const auto q = vectorField(squareFace());
  EXPECT_THROW(topMCandidates(q, {}, 1), InputError);
  EXPECT_THROW(topMCandidates(q, {FaceEntry{"a", q}}, 0), InputError);
}

TEST(TopMCandidates, TiesBrokenByFrameId) {
  const auto q = vectorField(squareFace());
  const std::vector<FaceEntry> db{entryAtDistance(q, "z", 0.5), entryAtDistance(q, "m", 0.5),
                                  entryAtDistance(q, "a", 0.5)};
  const auto sel = topMCandidates(q, db, 3);
  EXPECT_EQ(sel.candidates[0].frameId, "a");
  EXPECT_EQ(sel.candidates[1].frameId, "m");
  EXPECT_EQ(sel.candidates[2].frameId, "z");
}

TEST(TopMCandidates, ShuffledDatabaseGivesSameSequence) {
  std::mt19937_64 rng(44);
  std::uniform_int_distribution<int> level(0, 4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto q = vectorField(randomFace(rng));
    std::vector<FaceEntry> db;
    for (int i = 0; i < 12; ++i) {
      // Coarse distances force plenty of exact ties.
      db.push_back(entryAtDistance(q, "f" + std::to_string(i), 0.25 * level(rng)));
    }
    const auto ref = topMCandidates(q, db, 7);
    std::shuffle(db.begin(), db.end(), rng);
    const auto again = topMCandidates(q, db, 7);
    ASSERT_EQ(ref.candidates.size(), again.candidates.size());
    for (std::size_t k = 0; k < ref.candidates.size(); ++k)
      ASSERT_EQ(ref.candidates[k].frameId, again.candidates[k].frameId);
  }
}

TEST(BlendWeights, UniformDefaults) {
  const auto w = BlendWeights::uniform(4);
  EXPECT_EQ(w.alpha, 0.5);
  EXPECT_EQ(w.beta, 0.5);
  EXPECT_EQ(w.lambdas, std::vector<double>(4, 0.25));
  EXPECT_NO_THROW(w.validate());
}

TEST(BlendWeights, AffineConstraintEnforced) {
  BlendWeights w{0.5, 0.6, {1.0}};
  EXPECT_THROW(w.validate(), InputError);
  w = BlendWeights{0.5, 0.5, {1.5, -0.5}};
  EXPECT_THROW(w.validate(), InputError);
  w = BlendWeights{2.0, 0.0, {0.25, 0.25}};
  EXPECT_NO_THROW(w.validate());
}

TEST(BlendWeights, TruncationKeepsAffineConstraint) {
  const BlendWeights w{0.75, 0.25, {0.5, 0.25, 0.25}};
  const auto two = w.truncated(2);
  EXPECT_EQ(two.alpha, 0.75);
  EXPECT_EQ(two.beta, 0.25);
  ASSERT_EQ(two.lambdas.size(), 2u);
  EXPECT_NEAR(two.lambdas[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(two.lambdas[1], 1.0 / 3.0, 1e-15);
  EXPECT_NO_THROW(two.validate());

  const auto zeros = BlendWeights{0.5, 0.5, {0.0, 0.0, 2.0}}.truncated(2);
  EXPECT_EQ(zeros.lambdas, (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(w.truncated(3).lambdas, w.lambdas);
  EXPECT_THROW(w.truncated(4), InputError);
}

TEST(BlendFace, SingleCandidateHalfAndHalf) {
  const RasterImage f(4, 3, 100), g(4, 3, 200);
  EXPECT_EQ(blendFace({f}, g, BlendWeights{0.5, 0.5, {1.0}}), RasterImage(4, 3, 150));
}

TEST(BlendFace, HalfRoundsUp) {
  const RasterImage f1(2, 2, 0), f2(2, 2, 255), g(2, 2, 9);
  EXPECT_EQ(blendFace({f1, f2}, g, BlendWeights{1.0, 0.0, {0.5, 0.5}}), RasterImage(2, 2, 128));
}

TEST(BlendFace, IdentityWeightsAreBitExact) {
  std::mt19937_64 rng(45);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = testing::randomImage(rng, 7, 5);
    const auto f = testing::randomImage(rng, 7, 5);
    EXPECT_EQ(blendFace({f}, g, BlendWeights{0.0, 1.0, {1.0}}), g);
  }
}

TEST(BlendFace, MatchesPerPixelOracle) {
  std::mt19937_64 rng(46);
  const BlendWeights w{0.8, 0.2, {0.5, 0.25, 0.25}};
  std::vector<RasterImage> cands;
  for (int i = 0; i < 3; ++i) cands.push_back(testing::randomImage(rng, 9, 6));
  const auto g = testing::randomImage(rng, 9, 6);
  const auto out = blendFace(cands, g, w);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 9; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = 0.8 * (0.5 * cands[0].at(x, y, c) + 0.25 * cands[1].at(x, y, c) +
                                0.25 * cands[2].at(x, y, c)) +
                         0.2 * g.at(x, y, c);
        ASSERT_EQ(out.at(x, y, c), static_cast<int>(std::clamp(std::floor(v + 0.5), 0.0, 255.0)));
      }
}

TEST(BlendFace, ExtrapolationClamps) {
  const RasterImage f(2, 2, 250), g(2, 2, 10);
  EXPECT_EQ(blendFace({f}, g, BlendWeights{2.0, -1.0, {1.0}}), RasterImage(2, 2, 255));
}

TEST(BlendFace, RejectsMismatches) {
  const RasterImage f(2, 2, 0), g(3, 2, 0);
  EXPECT_THROW(blendFace({f}, g, BlendWeights{0.5, 0.5, {1.0}}), InputError);
  EXPECT_THROW(blendFace({f, f}, f, BlendWeights{0.5, 0.5, {1.0}}), InputError);
  EXPECT_THROW(blendFace({f}, f, BlendWeights{0.5, 0.4, {1.0}}), InputError);
}

TEST(LandmarkJson, ParsesObject) {
  const auto lm = parseLandmarks(
      R"({"frame_id": "0007", "right_eye": [0, 0], "left_eye": [2, 0],
          "mouth_left": [2, 2], "mouth_right": [0, 2], "nose": [1, 1.5]})");
  EXPECT_EQ(lm.frameId, "0007");
  EXPECT_EQ(lm.nose, Point2(1, 1.5));
}

TEST(LandmarkJson, RejectsMalformed) {
  EXPECT_THROW(parseLandmarks("{"), InputError);
  EXPECT_THROW(parseLandmarks(R"({"frame_id": "a", "right_eye": [0, 0]})"), InputError);
  EXPECT_THROW(parseLandmarks(
                   R"({"frame_id": "a", "right_eye": [0], "left_eye": [2, 0],
                       "mouth_left": [2, 2], "mouth_right": [0, 2], "nose": [1, 1]})"),
               InputError);
}

TEST(LandmarkJson, LoadsDatabaseFile) {
  const auto dir = testing::scratchDir("facedb");
  std::ofstream(dir / "db.json")
      << R"([{"frame_id": "b", "right_eye": [0, 0], "left_eye": [2, 0], "mouth_left": [2, 2],
              "mouth_right": [0, 2], "nose": [1, 1]},
             {"frame_id": "a", "right_eye": [0, 0], "left_eye": [4, 0], "mouth_left": [4, 4],
              "mouth_right": [0, 4], "nose": [2, 2]}])";
  const auto lms = loadLandmarkDatabase(dir / "db.json");
  ASSERT_EQ(lms.size(), 2u);
  const auto db = buildFaceDatabase(lms);
  const auto sel = topMCandidates(vectorField(squareFace()), db, 2);
  // Both faces are the same shape at different scales: tie, broken by id.
  EXPECT_EQ(sel.candidates[0].frameId, "a");
  EXPECT_EQ(sel.candidates[1].frameId, "b");
  EXPECT_THROW(loadLandmarkDatabase(dir / "missing.json"), InputError);
}

}  // namespace
}  // namespace gwkit
