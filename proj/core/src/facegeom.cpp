#include "gwkit/facegeom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gwkit/error.hpp"
#include "gwkit/io.hpp"
#include "json.hpp"

namespace gwkit {

using nlohmann::json;

void FaceLandmarks::validate() const {
  for (const Point2* p : {&rightEye, &leftEye, &mouthLeft, &mouthRight, &nose}) {
    if (!p->allFinite()) {
      throw InputError("landmarks of frame '" + frameId + "' contain non-finite coordinates");
    }
  }
  if ((leftEye - rightEye).norm() == 0.0) {
    throw InputError("landmarks of frame '" + frameId + "' have coincident eyes");
  }
}

FaceVectorField vectorField(const FaceLandmarks& lm) {
  lm.validate();
  const double scale = (lm.leftEye - lm.rightEye).norm();
  const Point2 eyeCenter = 0.5 * (lm.rightEye + lm.leftEye);
  FaceVectorField field;
  field.v[0] = (lm.leftEye - lm.rightEye) / scale;
  field.v[1] = (lm.mouthLeft - lm.leftEye) / scale;
  field.v[2] = (lm.mouthRight - lm.mouthLeft) / scale;
  field.v[3] = (lm.rightEye - lm.mouthRight) / scale;
  field.v[4] = (lm.nose - eyeCenter) / scale;
  return field;
}

double orientationSimilarity(const FaceVectorField& a, const FaceVectorField& b) {
  double distance = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) distance += (a.v[i] - b.v[i]).norm();
  return 1.0 / (kSimilarityGuard + distance);
}

CandidateSelection topMCandidates(const FaceVectorField& query,
                                  const std::vector<FaceEntry>& database, int m) {
  if (database.empty()) throw InputError("face database is empty");
  if (m < 1) throw InputError("m must be at least 1");

  std::vector<Candidate> scored;
  scored.reserve(database.size());
  for (const auto& entry : database) {
    scored.push_back({entry.frameId, orientationSimilarity(query, entry.field)});
  }
  const auto order = [](const Candidate& l, const Candidate& r) {
    if (l.similarity != r.similarity) return l.similarity > r.similarity;
    return l.frameId < r.frameId;
  };
  CandidateSelection out;
  out.truncated = static_cast<std::size_t>(m) > scored.size();
  const auto keep = std::min(scored.size(), static_cast<std::size_t>(m));
  std::partial_sort(scored.begin(), scored.begin() + static_cast<long>(keep), scored.end(),
                    order);
  scored.resize(keep);
  out.candidates = std::move(scored);
  return out;
}

BlendWeights BlendWeights::uniform(int m) {
  if (m < 1) throw InputError("m must be at least 1");
  return BlendWeights{0.5, 0.5, std::vector<double>(m, 1.0 / m)};
}

void BlendWeights::validate() const {
  if (!std::isfinite(alpha) || !std::isfinite(beta)) {
    throw InputError("blend weights must be finite");
  }
  double sum = 0.0;
  for (const double l : lambdas) {
    if (!std::isfinite(l) || l < 0.0) throw InputError("lambdas must be nonnegative");
    sum += l;
  }
  if (std::abs(alpha * sum + beta - 1.0) > 1e-9) {
    throw InputError("blend weights violate alpha * sum(lambda) + beta = 1");
  }
}

BlendWeights BlendWeights::truncated(std::size_t count) const {
  if (count > lambdas.size()) {
    throw InputError("cannot truncate " + std::to_string(lambdas.size()) + " lambdas to " +
                     std::to_string(count));
  }
  BlendWeights out = *this;
  out.lambdas.resize(count);
  double full = 0.0;
  double kept = 0.0;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    full += lambdas[i];
    if (i < count) kept += lambdas[i];
  }
  if (kept > 0.0) {
    for (auto& l : out.lambdas) l *= full / kept;
  } else {
    for (auto& l : out.lambdas) l = full / static_cast<double>(count);
  }
  return out;
}

RasterImage blendFace(const std::vector<RasterImage>& candidates,
                      const RasterImage& generated, const BlendWeights& w) {
  w.validate();
  if (w.lambdas.size() != candidates.size()) {
    throw InputError("got " + std::to_string(candidates.size()) + " candidate faces but " +
                     std::to_string(w.lambdas.size()) + " lambdas");
  }
  for (const auto& f : candidates) {
    if (!f.sameShape(generated)) {
      throw InputError("candidate face dimensions differ from the generated face");
    }
  }
  RasterImage out(generated.width(), generated.height());
  auto& dst = out.pixels();
  const auto& gen = generated.pixels();
  for (std::size_t p = 0; p < dst.size(); ++p) {
    double mix = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      mix += w.lambdas[i] * candidates[i].pixels()[p];
    }
    const double value = w.alpha * mix + w.beta * gen[p];
    dst[p] = static_cast<std::uint8_t>(std::clamp(std::floor(value + 0.5), 0.0, 255.0));
  }
  return out;
}

namespace {

Point2 readPoint(const json& obj, const char* key) {
  if (!obj.contains(key)) throw InputError(std::string("landmark field missing: ") + key);
  const auto& arr = obj.at(key);
  if (!arr.is_array() || arr.size() != 2 || !arr[0].is_number() || !arr[1].is_number()) {
    throw InputError(std::string("landmark field must be [x, y]: ") + key);
  }
  return Point2(arr[0].get<double>(), arr[1].get<double>());
}

FaceLandmarks fromJson(const json& obj) {
  if (!obj.is_object()) throw InputError("landmark entry must be a JSON object");
  if (!obj.contains("frame_id") || !obj.at("frame_id").is_string()) {
    throw InputError("landmark entry needs a string frame_id");
  }
  FaceLandmarks lm{obj.at("frame_id").get<std::string>(), readPoint(obj, "right_eye"),
                   readPoint(obj, "left_eye"),           readPoint(obj, "mouth_left"),
                   readPoint(obj, "mouth_right"),        readPoint(obj, "nose")};
  lm.validate();
  return lm;
}

json parseJson(std::string_view text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(origin + ": invalid JSON: " + e.what());
  }
}

}  // namespace

FaceLandmarks parseLandmarks(std::string_view text) {
  return fromJson(parseJson(text, "landmarks"));
}

FaceLandmarks loadLandmarks(const std::filesystem::path& path) {
  try {
    return fromJson(parseJson(readTextFile(path), path.string()));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::vector<FaceLandmarks> loadLandmarkDatabase(const std::filesystem::path& path) {
  const json doc = parseJson(readTextFile(path), path.string());
  if (!doc.is_array()) throw InputError(path.string() + ": database must be a JSON array");
  std::vector<FaceLandmarks> out;
  out.reserve(doc.size());
  for (const auto& entry : doc) {
    try {
      out.push_back(fromJson(entry));
    } catch (const InputError& e) {
      throw InputError(path.string() + ": entry " + std::to_string(out.size()) + ": " +
                       e.what());
    }
  }
  return out;
}

std::vector<FaceEntry> buildFaceDatabase(const std::vector<FaceLandmarks>& landmarks) {
  std::vector<FaceEntry> db;
  db.reserve(landmarks.size());
  for (const auto& lm : landmarks) db.push_back({lm.frameId, vectorField(lm)});
  return db;
}

}  // namespace gwkit
