#include "gwkit/image_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "gwkit/error.hpp"

namespace gwkit {

namespace {

constexpr int kResidualOffset = 32768;

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr openFile(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    throw InputError(std::string("cannot open ") +
                     (mode[0] == 'r' ? "" : "for writing ") + path.string());
  }
  return f;
}

// Decoded PNG: row-major samples, `channels` per pixel, 8 or 16 bits.
struct DecodedPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bitDepth = 0;
  std::vector<std::uint8_t> bytes;  // big-endian for 16-bit samples

  unsigned sample(int x, int y, int c) const {
    const std::size_t idx = (static_cast<std::size_t>(y) * width + x) * channels + c;
    if (bitDepth == 16) {
      return (static_cast<unsigned>(bytes[2 * idx]) << 8) | bytes[2 * idx + 1];
    }
    return bytes[idx];
  }
};

void pngErrorHandler(png_structp png, png_const_charp message) {
  auto* msg = static_cast<std::string*>(png_get_error_ptr(png));
  if (msg) *msg = message;
  png_longjmp(png, 1);
}

void pngWarningHandler(png_structp, png_const_charp) {}

DecodedPng decodePng(const std::filesystem::path& path) {
  auto file = openFile(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw InputError("not a PNG file: " + path.string());
  }

  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message,
                                           pngErrorHandler, pngWarningHandler);
  if (!png) throw InputError("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  DecodedPng out;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("corrupt PNG " + path.string() + ": " + message);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_png(png, info,
               PNG_TRANSFORM_EXPAND | PNG_TRANSFORM_STRIP_ALPHA | PNG_TRANSFORM_PACKING,
               nullptr);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bitDepth = png_get_bit_depth(png, info);
  const std::size_t rowBytes = png_get_rowbytes(png, info);
  png_bytepp rows = png_get_rows(png, info);
  out.bytes.resize(rowBytes * out.height);
  for (int y = 0; y < out.height; ++y) {
    std::copy(rows[y], rows[y] + rowBytes, out.bytes.begin() + rowBytes * y);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void encodePng(const std::filesystem::path& path, int width, int height,
               int colorType, int bitDepth, const std::vector<std::uint8_t>& bytes) {
  auto file = openFile(path, "wb");
  std::string message;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message,
                                            pngErrorHandler, pngWarningHandler);
  if (!png) throw InputError("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw InputError("cannot encode PNG " + path.string() + ": " + message);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), bitDepth, colorType,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  const std::size_t rowBytes = bytes.size() / height;
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(bytes.data() + rowBytes * y);
  }
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

RasterImage loadPng(const std::filesystem::path& path) {
  const DecodedPng png = decodePng(path);
  if (png.bitDepth != 8) {
    throw InputError(path.string() + ": expected an 8-bit PNG");
  }
  RasterImage img(png.width, png.height);
  for (int y = 0; y < png.height; ++y) {
    for (int x = 0; x < png.width; ++x) {
      for (int c = 0; c < RasterImage::kChannels; ++c) {
        img.at(x, y, c) =
            static_cast<std::uint8_t>(png.sample(x, y, png.channels >= 3 ? c : 0));
      }
    }
  }
  return img;
}

void savePng(const std::filesystem::path& path, const RasterImage& image) {
  encodePng(path, image.width(), image.height(), PNG_COLOR_TYPE_RGB, 8, image.pixels());
}

Mask loadMaskPng(const std::filesystem::path& path) {
  const DecodedPng png = decodePng(path);
  const unsigned threshold = png.bitDepth == 16 ? 127u * 257u : 127u;
  Mask mask(png.width, png.height);
  for (int y = 0; y < png.height; ++y) {
    for (int x = 0; x < png.width; ++x) mask.set(x, y, png.sample(x, y, 0) > threshold);
  }
  return mask;
}

void saveMaskPng(const std::filesystem::path& path, const Mask& mask) {
  std::vector<std::uint8_t> bytes(mask.values().size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.values()[i] ? 255 : 0;
  encodePng(path, mask.width(), mask.height(), PNG_COLOR_TYPE_GRAY, 8, bytes);
}

ResidualImage loadResidualPng(const std::filesystem::path& path) {
  const DecodedPng png = decodePng(path);
  if (png.bitDepth != 16 || png.channels != 3) {
    throw InputError(path.string() + ": residuals must be 16-bit RGB PNGs");
  }
  std::vector<std::int16_t> values(static_cast<std::size_t>(png.width) * png.height * 3);
  for (int y = 0; y < png.height; ++y) {
    for (int x = 0; x < png.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const int v = static_cast<int>(png.sample(x, y, c)) - kResidualOffset;
        if (v < -255 || v > 255) {
          throw InputError(path.string() + ": residual value out of [-255, 255]");
        }
        values[(static_cast<std::size_t>(y) * png.width + x) * 3 + c] =
            static_cast<std::int16_t>(v);
      }
    }
  }
  return ResidualImage(png.width, png.height, std::move(values));
}

void saveResidualPng(const std::filesystem::path& path, const ResidualImage& residual) {
  std::vector<std::uint8_t> bytes(residual.values().size() * 2);
  for (std::size_t i = 0; i < residual.values().size(); ++i) {
    const auto stored = static_cast<unsigned>(residual.values()[i] + kResidualOffset);
    bytes[2 * i] = static_cast<std::uint8_t>(stored >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(stored & 0xFF);
  }
  encodePng(path, residual.width(), residual.height(), PNG_COLOR_TYPE_RGB, 16, bytes);
}

}  // namespace gwkit
