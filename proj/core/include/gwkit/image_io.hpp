#pragma once

#include <filesystem>

#include "gwkit/types.hpp"

namespace gwkit {

/// Reads an 8-bit PNG as RGB. Grayscale is replicated across channels,
/// palettes are expanded and alpha is dropped. 16-bit inputs are rejected.
RasterImage loadPng(const std::filesystem::path& path);
void savePng(const std::filesystem::path& path, const RasterImage& image);

/// Reads a PNG mask: a pixel is 1 where its (first-channel) value exceeds 127.
Mask loadMaskPng(const std::filesystem::path& path);
/// Writes a grayscale PNG with 255 for 1 and 0 for 0.
void saveMaskPng(const std::filesystem::path& path, const Mask& mask);

/// Residuals are 16-bit RGB PNGs storing value + 32768 per channel.
ResidualImage loadResidualPng(const std::filesystem::path& path);
void saveResidualPng(const std::filesystem::path& path, const ResidualImage& residual);

}  // namespace gwkit
