#include "coin/backends.hpp"

#include <algorithm>
#include <cmath>

#include "coin/errors.hpp"

namespace coin {

namespace {

double srgb_to_linear(double c) {
  c /= 255.0;
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double d = 6.0 / 29.0;
  return t > d * d * d ? std::cbrt(t) : t / (3.0 * d * d) + 4.0 / 29.0;
}

// D65 white point.
void rgb_to_lab(double r, double g, double b, float& L, float& A, float& B) {
  const double rl = srgb_to_linear(r), gl = srgb_to_linear(g), bl = srgb_to_linear(b);
  const double x = (0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl) / 0.95047;
  const double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
  const double z = (0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl) / 1.08883;
  const double fx = lab_f(x), fy = lab_f(y), fz = lab_f(z);
  L = static_cast<float>(116.0 * fy - 16.0);
  A = static_cast<float>(500.0 * (fx - fy));
  B = static_cast<float>(200.0 * (fy - fz));
}

}  // namespace

FeatureBackend::FeatureBackend(Options opts) : opts_(opts) {
  if (opts_.stride < 1) throw Error(ErrorCode::Config, "stride must be >= 1");
}

EmbeddingGrid FeatureBackend::raw_features(const Image& frame) const {
  const int w = frame.width(), h = frame.height();
  const int ch = frame.channels();
  Image lab(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float L, A, B;
      if (ch >= 3) rgb_to_lab(frame.at(x, y, 0), frame.at(x, y, 1), frame.at(x, y, 2), L, A, B);
      else rgb_to_lab(frame.at(x, y), frame.at(x, y), frame.at(x, y), L, A, B);
      lab.at(x, y, 0) = L, lab.at(x, y, 1) = A, lab.at(x, y, 2) = B;
    }
  Image lum(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) lum.at(x, y) = lab.at(x, y, 0);
  const Image small = gaussian_blur(lum, opts_.blur_sigma_small);
  const Image large = gaussian_blur(lum, opts_.blur_sigma_large);
  const Image log = laplacian(gaussian_blur(lum, opts_.log_sigma));

  EmbeddingGrid g;
  g.stride = opts_.stride;
  g.cols = (w + g.stride - 1) / g.stride;
  g.rows = (h + g.stride - 1) / g.stride;
  g.dim = dim();
  g.values.assign(g.cell_count() * g.dim, 0.0f);
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) {
      const int x0 = c * g.stride, y0 = r * g.stride;
      const int x1 = std::min(x0 + g.stride, w), y1 = std::min(y0 + g.stride, h);
      double acc[6] = {};
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
          acc[0] += lab.at(x, y, 0);
          acc[1] += lab.at(x, y, 1);
          acc[2] += lab.at(x, y, 2);
          acc[3] += small.at(x, y);
          acc[4] += large.at(x, y);
          acc[5] += log.at(x, y);
        }
      const double n = double(x1 - x0) * double(y1 - y0);
      auto cell = g.cell(c, r);
      for (int i = 0; i < 6; ++i) cell[i] = static_cast<float>(acc[i] / n);
      if (opts_.use_xy) {
        cell[6] = static_cast<float>((x0 + x1 - 1) * 0.5 / std::max(1, w - 1));
        cell[7] = static_cast<float>((y0 + y1 - 1) * 0.5 / std::max(1, h - 1));
      }
    }
  return g;
}

void FeatureBackend::prepare(std::span<const Image* const> init_frames, std::span<const int>) {
  const int d = dim();
  std::vector<double> sum(d, 0.0), sq(d, 0.0);
  std::size_t n = 0;
  for (const Image* f : init_frames) {
    const auto g = raw_features(*f);
    for (std::size_t i = 0; i < g.cell_count(); ++i)
      for (int k = 0; k < d; ++k) {
        const double v = g.values[i * d + k];
        sum[k] += v;
        sq[k] += v * v;
      }
    n += g.cell_count();
  }
  if (n == 0) return;
  mean_.assign(d, 0.0f);
  inv_std_.assign(d, 1.0f);
  for (int k = 0; k < d; ++k) {
    const double m = sum[k] / double(n);
    const double var = std::max(0.0, sq[k] / double(n) - m * m);
    mean_[k] = static_cast<float>(m);
    inv_std_[k] = static_cast<float>(1.0 / std::max(std::sqrt(var), 1e-6));
  }
}

EmbeddingGrid FeatureBackend::extract(const Image& frame, int) const {
  EmbeddingGrid g = raw_features(frame);
  if (!mean_.empty()) {
    for (std::size_t i = 0; i < g.cell_count(); ++i)
      for (int k = 0; k < g.dim; ++k) {
        float& v = g.values[i * g.dim + k];
        v = (v - mean_[k]) * inv_std_[k];
      }
  }
  return g;
}

EmbeddingGrid OracleBackend::extract(const Image& frame, int frame_index) const {
  const OracleLabels labels = source_(frame_index);
  const auto& truth = labels.truth;
  const auto& seen = labels.observed;
  if (seen.cols != frame.width() || seen.rows != frame.height() || truth.cols != seen.cols || truth.rows != seen.rows)
    throw Error(ErrorCode::BackendFailure, "oracle labels do not match frame " + std::to_string(frame_index));
  EmbeddingGrid g;
  g.stride = stride_;
  g.cols = (frame.width() + stride_ - 1) / stride_;
  g.rows = (frame.height() + stride_ - 1) / stride_;
  g.dim = dim();
  g.values.assign(g.cell_count() * g.dim, 0.0f);
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) {
      const int x = cell_center(c, stride_, frame.width());
      const int y = cell_center(r, stride_, frame.height());
      const Label s = seen.at(x, y), t = truth.at(x, y);
      auto cell = g.cell(c, r);
      cell[static_cast<int>(s)] = 1.0f;
      if (s != Label::Background && t == Label::Background) cell[3] = kMarker;
      if (s == Label::Background && t != Label::Background) cell[4] = kMarker;
    }
  return g;
}

}  // namespace coin
