#include "gwkit/compositing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "gwkit/error.hpp"
#include "gwkit/io.hpp"
#include "json.hpp"

namespace gwkit {

namespace {

void checkPartIndex(int index) {
  if (index < 1 || index > 5) {
    throw InputError("part index " + std::to_string(index) + " outside 1..5");
  }
}

void requireSameShape(const RasterImage& a, const RasterImage& b, const char* what) {
  if (!a.sameShape(b)) {
    throw InputError(std::string(what) + ": dimension mismatch (" +
                     std::to_string(a.width()) + "x" + std::to_string(a.height()) + " vs " +
                     std::to_string(b.width()) + "x" + std::to_string(b.height()) + ")");
  }
}

}  // namespace

void BodyPartCrop::validate() const {
  checkPartIndex(partIndex);
  if (!rect().fitsInside(parentWidth, parentHeight)) {
    throw InputError("crop of part " + std::to_string(partIndex) +
                     " lies outside its parent frame");
  }
}

BodyPartCrop cropPart(const RasterImage& frame, int partIndex, const PixelRect& rect) {
  checkPartIndex(partIndex);
  if (!rect.fitsInside(frame.width(), frame.height())) {
    throw InputError("crop rectangle of part " + std::to_string(partIndex) +
                     " lies outside the frame");
  }
  RasterImage img(rect.w, rect.h);
  for (int y = 0; y < rect.h; ++y)
    for (int x = 0; x < rect.w; ++x)
      for (int c = 0; c < RasterImage::kChannels; ++c)
        img.at(x, y, c) = frame.at(rect.x + x, rect.y + y, c);
  return BodyPartCrop{std::move(img), partIndex, rect.x, rect.y, frame.width(),
                      frame.height()};
}

BodyPartCrop applyResidual(const BodyPartCrop& part, const ResidualImage& residual,
                           std::size_t* clamped) {
  if (residual.width() != part.image.width() || residual.height() != part.image.height()) {
    throw InputError("residual dimensions differ from part " +
                     std::to_string(part.partIndex));
  }
  BodyPartCrop out = part;
  auto& px = out.image.pixels();
  const auto& r = residual.values();
  std::size_t saturated = 0;
  for (std::size_t i = 0; i < px.size(); ++i) {
    const int v = static_cast<int>(px[i]) + r[i];
    if (v < 0 || v > 255) ++saturated;
    px[i] = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
  }
  if (clamped) *clamped = saturated;
  return out;
}

RasterImage pasteCrop(const RasterImage& frame, const BodyPartCrop& part) {
  if (part.parentWidth != frame.width() || part.parentHeight != frame.height()) {
    throw InputError("part " + std::to_string(part.partIndex) +
                     " was cut from a frame of different size");
  }
  part.validate();
  RasterImage out = frame;
  const PixelRect r = part.rect();
  for (int y = 0; y < r.h; ++y)
    for (int x = 0; x < r.w; ++x)
      for (int c = 0; c < RasterImage::kChannels; ++c)
        out.at(r.x + x, r.y + y, c) = part.image.at(x, y, c);
  return out;
}

RasterImage fuse(const RasterImage& foreground, const RasterImage& background,
                 const Mask& mask) {
  requireSameShape(foreground, background, "fuse");
  if (mask.width() != foreground.width() || mask.height() != foreground.height()) {
    throw InputError("fuse: mask dimensions differ from the images");
  }
  RasterImage out = background;
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      const auto m = mask.at(x, y);
      if (m > 1) throw InputError("fuse: mask is not binary");
      if (m == 1) {
        for (int c = 0; c < RasterImage::kChannels; ++c) out.at(x, y, c) = foreground.at(x, y, c);
      }
    }
  return out;
}

double psnr(const RasterImage& a, const RasterImage& b) {
  requireSameShape(a, b, "psnr");
  double sq = 0.0;
  const auto& pa = a.pixels();
  const auto& pb = b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double d = static_cast<double>(pa[i]) - pb[i];
    sq += d * d;
  }
  if (sq == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sq / static_cast<double>(pa.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

Matrix lumaPlane(const RasterImage& image) {
  Matrix y(image.height(), image.width());
  for (int r = 0; r < image.height(); ++r)
    for (int c = 0; c < image.width(); ++c)
      y(r, c) = 0.299 * image.at(c, r, 0) + 0.587 * image.at(c, r, 1) +
                0.114 * image.at(c, r, 2);
  return y;
}

namespace {

Vector gaussianTaps() {
  constexpr double sigma = 1.5;
  Vector taps(kSsimWindow);
  const int half = kSsimWindow / 2;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - half;
    taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
  }
  return taps / taps.sum();
}

// Separable "valid" correlation with the normalized Gaussian window.
Matrix filterValid(const Matrix& img, const Vector& taps) {
  const Index rows = img.rows() - kSsimWindow + 1;
  const Index cols = img.cols() - kSsimWindow + 1;
  Matrix horiz(img.rows(), cols);
  for (Index r = 0; r < img.rows(); ++r)
    for (Index c = 0; c < cols; ++c) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += taps[k] * img(r, c + k);
      horiz(r, c) = s;
    }
  Matrix out(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += taps[k] * horiz(r + k, c);
      out(r, c) = s;
    }
  return out;
}

}  // namespace

Matrix ssimMap(const RasterImage& a, const RasterImage& b) {
  requireSameShape(a, b, "ssim");
  if (a.width() < kSsimWindow || a.height() < kSsimWindow) {
    throw InputError("ssim: images must be at least 11x11");
  }
  constexpr double range = 255.0;
  constexpr double c1 = (0.01 * range) * (0.01 * range);
  constexpr double c2 = (0.03 * range) * (0.03 * range);

  const Vector taps = gaussianTaps();
  const Matrix x = lumaPlane(a);
  const Matrix y = lumaPlane(b);
  const Matrix muX = filterValid(x, taps);
  const Matrix muY = filterValid(y, taps);
  const Matrix exx = filterValid(x.cwiseProduct(x), taps);
  const Matrix eyy = filterValid(y.cwiseProduct(y), taps);
  const Matrix exy = filterValid(x.cwiseProduct(y), taps);

  Matrix map(muX.rows(), muX.cols());
  for (Index r = 0; r < map.rows(); ++r)
    for (Index c = 0; c < map.cols(); ++c) {
      const double mx = muX(r, c);
      const double my = muY(r, c);
      const double vx = exx(r, c) - mx * mx;
      const double vy = eyy(r, c) - my * my;
      const double cov = exy(r, c) - mx * my;
      map(r, c) = ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
                  ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  return map;
}

double ssim(const RasterImage& a, const RasterImage& b) { return ssimMap(a, b).mean(); }

namespace {

using nlohmann::json;

int readInt(const json& obj, const char* key) {
  if (!obj.contains(key) || !obj.at(key).is_number_integer()) {
    throw InputError(std::string("crop part needs integer field '") + key + "'");
  }
  return obj.at(key).get<int>();
}

}  // namespace

FrameCrops parseCrops(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("crops: invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("frame_id") || !doc.at("frame_id").is_string() ||
      !doc.contains("parts") || !doc.at("parts").is_array()) {
    throw InputError("crops JSON needs a string frame_id and a parts array");
  }
  FrameCrops crops;
  crops.frameId = doc.at("frame_id").get<std::string>();
  std::set<int> seen;
  for (const auto& p : doc.at("parts")) {
    if (!p.is_object()) throw InputError("crop part must be an object");
    PartRect part{readInt(p, "index"),
                  PixelRect{readInt(p, "x"), readInt(p, "y"), readInt(p, "w"), readInt(p, "h")}};
    checkPartIndex(part.index);
    if (!seen.insert(part.index).second) {
      throw InputError("duplicate crop for part " + std::to_string(part.index));
    }
    crops.parts.push_back(part);
  }
  std::sort(crops.parts.begin(), crops.parts.end(),
            [](const PartRect& l, const PartRect& r) { return l.index < r.index; });
  return crops;
}

FrameCrops loadCrops(const std::filesystem::path& path) {
  try {
    return parseCrops(readTextFile(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace gwkit
