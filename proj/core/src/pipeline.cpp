#include "gwkit/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include "gwkit/compositing.hpp"
#include "gwkit/error.hpp"
#include "gwkit/image_io.hpp"
#include "gwkit/io.hpp"
#include "json.hpp"

namespace gwkit {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string requireString(const json& obj, const char* key) {
  if (!obj.contains(key) || !obj.at(key).is_string()) {
    throw InputError(std::string("manifest entry needs string field '") + key + "'");
  }
  return obj.at(key).get<std::string>();
}

std::string optionalString(const json& obj, const char* key) {
  if (!obj.contains(key) || obj.at(key).is_null()) return {};
  if (!obj.at(key).is_string()) {
    throw InputError(std::string("manifest field '") + key + "' must be a string");
  }
  return obj.at(key).get<std::string>();
}

FrameManifest manifestFromJson(const json& obj, const fs::path& base) {
  if (!obj.is_object()) throw InputError("manifest entry must be an object");
  FrameManifest m;
  m.frameId = requireString(obj, "frame_id");
  m.foreground = resolve(base, requireString(obj, "foreground"));
  m.background = resolve(base, requireString(obj, "background"));
  m.mask = resolve(base, requireString(obj, "mask"));
  m.crops = resolve(base, requireString(obj, "crops"));
  if (const auto lm = optionalString(obj, "landmarks"); !lm.empty()) {
    m.landmarks = resolve(base, lm);
    m.faceDatabase = resolve(base, requireString(obj, "face_database"));
    m.faceDir = resolve(base, requireString(obj, "face_dir"));
  }
  if (obj.contains("residuals") && !obj.at("residuals").is_null()) {
    const auto& res = obj.at("residuals");
    if (!res.is_object()) throw InputError("manifest 'residuals' must be an object");
    for (const auto& [key, value] : res.items()) {
      int index = 0;
      try {
        index = std::stoi(key);
      } catch (const std::exception&) {
        throw InputError("residual key '" + key + "' is not a part index");
      }
      if (index < 1 || index > 5 || std::to_string(index) != key) {
        throw InputError("residual key '" + key + "' is not a part index 1..5");
      }
      if (!value.is_string()) throw InputError("residual paths must be strings");
      m.residuals[index] = resolve(base, value.get<std::string>());
    }
  }
  if (const auto gt = optionalString(obj, "ground_truth"); !gt.empty()) {
    m.groundTruth = resolve(base, gt);
  }
  return m;
}

class StageClock {
 public:
  explicit StageClock(FrameReport& report) : report_(report) {}

  template <typename F>
  auto run(const char* stage, F&& body) {
    report_.failedStage = stage;
    const auto t0 = std::chrono::steady_clock::now();
    auto finish = [&] {
      const auto t1 = std::chrono::steady_clock::now();
      report_.timings.push_back(
          {stage, std::chrono::duration<double, std::milli>(t1 - t0).count()});
    };
    if constexpr (std::is_void_v<decltype(body())>) {
      body();
      finish();
    } else {
      auto out = body();
      finish();
      return out;
    }
  }

 private:
  FrameReport& report_;
};

FrameResult runFrame(const FrameManifest& mf, const BlendWeights& weights, int m) {
  FrameResult result;
  FrameReport& report = result.report;
  report.frameId = mf.frameId;
  StageClock clock(report);
  try {
    if (weights.lambdas.size() != static_cast<std::size_t>(m)) {
      report.failedStage = "config";
      throw InputError("expected " + std::to_string(m) + " lambdas, got " +
                       std::to_string(weights.lambdas.size()));
    }
    weights.validate();

    struct Inputs {
      RasterImage foreground, background;
      Mask mask;
      FrameCrops crops;
    };
    Inputs in = clock.run("load", [&] {
      Inputs loaded{loadPng(mf.foreground), loadPng(mf.background), loadMaskPng(mf.mask),
                    loadCrops(mf.crops)};
      return loaded;
    });

    RasterImage composed = in.foreground;
    for (const auto& part : in.crops.parts) {
      BodyPartCrop crop = cropPart(in.foreground, part.index, part.rect);

      if (part.index == 1 && !mf.landmarks.empty()) {
        const CandidateSelection selection = clock.run("face-search", [&] {
          const FaceVectorField query = vectorField(loadLandmarks(mf.landmarks));
          const auto db = buildFaceDatabase(loadLandmarkDatabase(mf.faceDatabase));
          return topMCandidates(query, db, m);
        });
        report.candidates = selection.candidates;
        report.candidatesTruncated = selection.truncated;
        crop.image = clock.run("face-blend", [&] {
          std::vector<RasterImage> faces;
          for (const auto& c : selection.candidates) {
            faces.push_back(loadPng(mf.faceDir / (c.frameId + ".png")));
          }
          const BlendWeights w = selection.truncated ? weights.truncated(faces.size())
                                                     : weights;
          return blendFace(faces, crop.image, w);
        });
        report.faceEnhanced = true;
      }

      crop = clock.run("residual", [&] {
        const auto it = mf.residuals.find(part.index);
        const ResidualImage residual = it == mf.residuals.end()
                                           ? ResidualImage(crop.image.width(),
                                                           crop.image.height())
                                           : loadResidualPng(it->second);
        std::size_t clamped = 0;
        BodyPartCrop refined = applyResidual(crop, residual, &clamped);
        report.residualClamps[part.index] = clamped;
        return refined;
      });
      composed = clock.run("paste", [&] { return pasteCrop(composed, crop); });
    }

    RasterImage frame = clock.run("fuse", [&] { return fuse(composed, in.background, in.mask); });

    if (mf.groundTruth) {
      clock.run("metrics", [&] {
        const RasterImage truth = loadPng(*mf.groundTruth);
        report.ssim = ssim(frame, truth);
        report.psnr = psnr(frame, truth);
      });
    }
    report.ok = true;
    report.failedStage.clear();
    result.image = std::move(frame);
  } catch (const std::exception& e) {
    report.ok = false;
    report.error = e.what();
  }
  return result;
}

json numberOrInf(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return json(roundSignificant(v));
}

}  // namespace

std::vector<FrameManifest> loadManifests(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(readTextFile(path));
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": invalid JSON: " + e.what());
  }
  if (!doc.is_array()) throw InputError(path.string() + ": manifest must be a JSON array");
  const fs::path base = path.parent_path();
  std::vector<FrameManifest> out;
  for (const auto& entry : doc) {
    try {
      out.push_back(manifestFromJson(entry, base));
    } catch (const InputError& e) {
      throw InputError(path.string() + ": entry " + std::to_string(out.size()) + ": " +
                       e.what());
    }
  }
  return out;
}

FrameResult processFrame(const FrameManifest& manifest, const BlendWeights& weights, int m) {
  return runFrame(manifest, weights, m);
}

SequenceSummary processSequence(const std::vector<FrameManifest>& manifests,
                                const PipelineConfig& cfg,
                                const std::optional<fs::path>& outDir) {
  if (manifests.empty()) throw InputError("pipeline needs at least one manifest");
  if (cfg.topM < 1) throw InputError("top-m must be at least 1");

  // Process in frameId order so results and output writes are deterministic.
  std::vector<std::size_t> order(manifests.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return manifests[l].frameId < manifests[r].frameId;
  });

  if (outDir) fs::create_directories(*outDir);

  std::vector<FrameReport> reports(manifests.size());
  std::mutex writeMutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < order.size(); k = next++) {
      const auto& mf = manifests[order[k]];
      FrameResult res = runFrame(mf, cfg.weights, cfg.topM);
      if (res.image && outDir) {
        try {
          savePng(*outDir / (mf.frameId + ".png"), *res.image);
        } catch (const std::exception& e) {
          res.report.ok = false;
          res.report.failedStage = "write";
          res.report.error = e.what();
        }
      }
      reports[k] = std::move(res.report);
    }
  };
  const int jobs = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(manifests.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  SequenceSummary summary;
  summary.frames = std::move(reports);
  double ssimSum = 0.0, psnrSum = 0.0;
  std::size_t scored = 0;
  for (const auto& r : summary.frames) {
    if (!r.ok) ++summary.failures;
    if (r.ok && r.ssim && r.psnr) {
      ssimSum += *r.ssim;
      psnrSum += *r.psnr;
      ++scored;
    }
  }
  if (scored > 0) {
    summary.meanSsim = ssimSum / static_cast<double>(scored);
    summary.meanPsnr = psnrSum / static_cast<double>(scored);
  }

  if (outDir) {
    std::ofstream out(*outDir / "report.json");
    if (!out) throw InputError("cannot write report to " + outDir->string());
    out << summaryJson(summary) << '\n';
  }
  return summary;
}

std::string summaryJson(const SequenceSummary& summary, bool includeTimings) {
  ordered_json doc;
  doc["schema_version"] = 1;
  doc["frame_count"] = summary.frames.size();
  doc["failures"] = summary.failures;
  doc["mean_ssim"] = summary.meanSsim ? numberOrInf(*summary.meanSsim) : json(nullptr);
  doc["mean_psnr"] = summary.meanPsnr ? numberOrInf(*summary.meanPsnr) : json(nullptr);
  ordered_json frames = ordered_json::array();
  for (const auto& r : summary.frames) {
    ordered_json f;
    f["frame_id"] = r.frameId;
    f["ok"] = r.ok;
    if (!r.ok) {
      f["failed_stage"] = r.failedStage;
      f["error"] = r.error;
    }
    f["face_enhanced"] = r.faceEnhanced;
    ordered_json cands = ordered_json::array();
    for (const auto& c : r.candidates) {
      cands.push_back({{"frame_id", c.frameId}, {"similarity", numberOrInf(c.similarity)}});
    }
    f["candidates"] = cands;
    f["candidates_truncated"] = r.candidatesTruncated;
    ordered_json clamps = ordered_json::object();
    for (const auto& [part, count] : r.residualClamps) clamps[std::to_string(part)] = count;
    f["residual_clamps"] = clamps;
    f["ssim"] = r.ssim ? numberOrInf(*r.ssim) : json(nullptr);
    f["psnr"] = r.psnr ? numberOrInf(*r.psnr) : json(nullptr);
    if (includeTimings) {
      ordered_json t = ordered_json::object();
      for (const auto& s : r.timings) t[s.stage] = roundSignificant(s.millis, 6);
      f["timings_ms"] = t;
    }
    frames.push_back(f);
  }
  doc["frames"] = frames;
  return doc.dump(2);
}

}  // namespace gwkit
