#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gwkit/types.hpp"

namespace gwkit {

/// Axis-aligned pixel rectangle.
struct PixelRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool fitsInside(int width, int height) const {
    return x >= 0 && y >= 0 && w > 0 && h > 0 && x + w <= width && y + h <= height;
  }
};

/// A body part cut out of a frame. Part 1 is the face, 2..5 hands and feet.
struct BodyPartCrop {
  RasterImage image;
  int partIndex = 1;
  int originX = 0;
  int originY = 0;
  int parentWidth = 0;
  int parentHeight = 0;

  PixelRect rect() const { return {originX, originY, image.width(), image.height()}; }
  void validate() const;
};

BodyPartCrop cropPart(const RasterImage& frame, int partIndex, const PixelRect& rect);

/// clamp(part + residual, 0, 255) per channel. When `clamped` is given it
/// receives the number of channel values that saturated.
BodyPartCrop applyResidual(const BodyPartCrop& part, const ResidualImage& residual,
                           std::size_t* clamped = nullptr);

/// Copies part.image into its rectangle of `frame`.
RasterImage pasteCrop(const RasterImage& frame, const BodyPartCrop& part);

/// Per-pixel selection: foreground where mask is 1, background where 0.
RasterImage fuse(const RasterImage& foreground, const RasterImage& background,
                 const Mask& mask);

/// 10 log10(255^2 / MSE) over all channels; +infinity for identical images.
double psnr(const RasterImage& a, const RasterImage& b);

/// Side of the Gaussian SSIM window.
inline constexpr int kSsimWindow = 11;

/// BT.601 luma as reals: 0.299 R + 0.587 G + 0.114 B, row-major.
Matrix lumaPlane(const RasterImage& image);

/// Local SSIM for every fully contained 11x11 window (Gaussian, sigma 1.5,
/// K1 = 0.01, K2 = 0.03, L = 255) on luma. Entry (r, c) is the window whose
/// top-left pixel is (x = c, y = r).
Matrix ssimMap(const RasterImage& a, const RasterImage& b);

/// Mean of ssimMap. Both images need width and height >= 11.
double ssim(const RasterImage& a, const RasterImage& b);

struct PartRect {
  int index = 1;
  PixelRect rect;
};

struct FrameCrops {
  std::string frameId;
  std::vector<PartRect> parts;
};

/// Crops JSON: {"frame_id": s, "parts": [{"index": 1..5, "x", "y", "w", "h"}]}.
FrameCrops parseCrops(std::string_view json);
FrameCrops loadCrops(const std::filesystem::path& path);

}  // namespace gwkit
