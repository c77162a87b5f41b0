#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace coin {

// Interleaved float image. Intensities are nominally in [0, 255] but are not
// clamped, so affine intensity transforms stay exact.
class Image {
public:
  Image() = default;
  Image(int width, int height, int channels, float fill = 0.0f);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  float at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool operator==(const Image&) const = default;

private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

// ITU-R 601 luma; single-channel input is returned as is.
Image to_gray(const Image& img);

// Bilinear sample of channel c; coordinates are clamped to the image.
inline float sample_bilinear(const Image& img, double x, double y, int c = 0) {
  const int w = img.width(), h = img.height();
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = std::min(static_cast<int>(x), w - 1);
  const int y0 = std::min(static_cast<int>(y), h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0, fy = y - y0;
  const double top = img.at(x0, y0, c) * (1.0 - fx) + img.at(x1, y0, c) * fx;
  const double bottom = img.at(x0, y1, c) * (1.0 - fx) + img.at(x1, y1, c) * fx;
  return static_cast<float>(top * (1.0 - fy) + bottom * fy);
}

// Separable Gaussian blur per channel, kernel radius ceil(4 sigma),
// replicated borders.
Image gaussian_blur(const Image& img, double sigma);

// 5-point discrete Laplacian with replicated borders (single channel).
Image laplacian(const Image& gray);

// 8-bit PNG/JPEG I/O. Color images are RGB in memory.
Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& img);

// Raw 8-bit single channel planes (label / mask PNGs).
struct Gray8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};
Gray8 read_gray8(const std::filesystem::path& path);
void write_gray8(const std::filesystem::path& path, const Gray8& img);

}  // namespace coin
