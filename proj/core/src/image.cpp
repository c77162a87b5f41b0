#include "coin/image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "coin/errors.hpp"

namespace coin {

Image::Image(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels),
      data_(static_cast<std::size_t>(width) * height * channels, fill) {}

Image to_gray(const Image& img) {
  if (img.channels() == 1) return img;
  Image out(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      out.at(x, y) = 0.299f * img.at(x, y, 0) + 0.587f * img.at(x, y, 1) + 0.114f * img.at(x, y, 2);
  return out;
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

}  // namespace

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0 || img.empty()) return img;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = img.width(), h = img.height(), ch = img.channels();
  Image tmp(w, h, ch), out(w, h, ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * img.at(std::clamp(x + i, 0, w - 1), y, c);
        tmp.at(x, y, c) = static_cast<float>(acc);
      }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(x, std::clamp(y + i, 0, h - 1), c);
        out.at(x, y, c) = static_cast<float>(acc);
      }
  return out;
}

Image laplacian(const Image& gray) {
  const int w = gray.width(), h = gray.height();
  Image out(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float c = gray.at(x, y);
      const float l = gray.at(std::max(x - 1, 0), y);
      const float r = gray.at(std::min(x + 1, w - 1), y);
      const float u = gray.at(x, std::max(y - 1, 0));
      const float d = gray.at(x, std::min(y + 1, h - 1));
      out.at(x, y) = l + r + u + d - 4.0f * c;
    }
  return out;
}

Image read_image(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw Error(ErrorCode::Io, "cannot read image " + path.string());
  if (m.depth() != CV_8U) m.convertTo(m, CV_8U);
  if (m.channels() == 4) cv::cvtColor(m, m, cv::COLOR_BGRA2RGB);
  else if (m.channels() == 3) cv::cvtColor(m, m, cv::COLOR_BGR2RGB);
  Image img(m.cols, m.rows, m.channels());
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < m.cols * m.channels(); ++x)
      img.data()[static_cast<std::size_t>(y) * m.cols * m.channels() + x] = row[x];
  }
  return img;
}

void write_image(const std::filesystem::path& path, const Image& img) {
  const int type = img.channels() == 1 ? CV_8UC1 : CV_8UC3;
  cv::Mat m(img.height(), img.width(), type);
  for (int y = 0; y < img.height(); ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.width() * img.channels(); ++x) {
      const float v = img.data()[static_cast<std::size_t>(y) * img.width() * img.channels() + x];
      row[x] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  if (img.channels() == 3) cv::cvtColor(m, m, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path.string(), m))
    throw Error(ErrorCode::Io, "cannot write image " + path.string());
}

Gray8 read_gray8(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw Error(ErrorCode::Io, "cannot read mask " + path.string());
  Gray8 g{m.cols, m.rows, {}};
  g.pixels.resize(static_cast<std::size_t>(m.cols) * m.rows);
  for (int y = 0; y < m.rows; ++y)
    std::copy_n(m.ptr<std::uint8_t>(y), m.cols, g.pixels.begin() + static_cast<std::ptrdiff_t>(y) * m.cols);
  return g;
}

void write_gray8(const std::filesystem::path& path, const Gray8& img) {
  cv::Mat m(img.height, img.width, CV_8UC1, const_cast<std::uint8_t*>(img.pixels.data()));
  if (!cv::imwrite(path.string(), m))
    throw Error(ErrorCode::Io, "cannot write mask " + path.string());
}

}  // namespace coin
