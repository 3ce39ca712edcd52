#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace plateflow {

/// Grayscale raster, pixel values in [0, 1], row-major. RGB files are
/// converted to luma on load.
class Image {
 public:
  Image() = default;
  Image(int width, int height, float fill = 0.0f)
      : width_(width), height_(height),
        pixels_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }

  float& at(int row, int col) { return pixels_[static_cast<std::size_t>(row) * width_ + col]; }
  float at(int row, int col) const { return pixels_[static_cast<std::size_t>(row) * width_ + col]; }

  const std::vector<float>& pixels() const { return pixels_; }
  std::vector<float>& pixels() { return pixels_; }

  /// Sample at clamped integer coordinates.
  float at_clamped(int row, int col) const;

  /// Bilinear sample at fractional (x, y) with edge clamping.
  float sample_bilinear(double x, double y) const;

  bool equals(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_ && pixels_ == other.pixels_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> pixels_;
};

/// Bilinear resize to (new_width, new_height). Identity when sizes match.
Image resize_bilinear(const Image& src, int new_width, int new_height);

/// Rotate about the image center by `angle_deg` (counterclockwise, y down),
/// same output size, bilinear sampling with edge clamping.
Image rotate_about_center(const Image& src, double angle_deg);

/// Quantize to 8 bits: round(p * 255) clamped to [0, 255].
std::uint8_t quantize8(float p);

// File I/O. Format picked from the extension: .pgm/.ppm binary NetPBM,
// .png 8-bit via libpng. Throws DataError on malformed files.
Image load_image(const std::string& path);
void save_pgm(const Image& img, const std::string& path);
void save_png(const Image& img, const std::string& path);
void save_image(const Image& img, const std::string& path);

}  // namespace plateflow
