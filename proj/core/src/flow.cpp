#include "coin/flow.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>

#include "coin/errors.hpp"

namespace coin {

static_assert(std::endian::native == std::endian::little, "flow files are little endian");

FlowField FlowField::uniform(int width, int height, float dx, float dy) {
  FlowField f(width, height);
  std::fill(f.dx_.begin(), f.dx_.end(), dx);
  std::fill(f.dy_.begin(), f.dy_.end(), dy);
  return f;
}

FlowField read_flow(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read flow " + path.string());
  std::int32_t w = 0, h = 0;
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  if (!in || w <= 0 || h <= 0 || w > 1 << 16 || h > 1 << 16)
    throw Error(ErrorCode::Io, path.string() + ": bad flow header");
  FlowField f(w, h);
  const auto n = static_cast<std::streamsize>(std::size_t(w) * h * sizeof(float));
  in.read(reinterpret_cast<char*>(f.dx_data()), n);
  in.read(reinterpret_cast<char*>(f.dy_data()), n);
  if (!in) throw Error(ErrorCode::Io, path.string() + ": truncated flow");
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (!std::isfinite(f.dx(x, y)) || !std::isfinite(f.dy(x, y)))
        throw Error(ErrorCode::Io, path.string() + ": non-finite flow");
  return f;
}

void write_flow(const std::filesystem::path& path, const FlowField& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write flow " + path.string());
  const std::int32_t w = f.width(), h = f.height();
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  const auto n = static_cast<std::streamsize>(std::size_t(w) * h * sizeof(float));
  out.write(reinterpret_cast<const char*>(f.dx_data()), n);
  out.write(reinterpret_cast<const char*>(f.dy_data()), n);
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

Point2 estimate_translation(const Image& prev_gray, const Image& cur_gray, const BinaryMask& prev_mask, int radius,
                            std::size_t max_samples) {
  std::vector<std::pair<int, int>> pts;
  for (int y = 0; y < prev_mask.height(); ++y)
    for (int x = 0; x < prev_mask.width(); ++x)
      if (prev_mask(x, y)) pts.emplace_back(x, y);
  if (pts.size() < 2) return {0.0, 0.0};
  if (pts.size() > max_samples) {
    std::vector<std::pair<int, int>> sub;
    const double step = double(pts.size()) / double(max_samples);
    for (std::size_t i = 0; i < max_samples; ++i) sub.push_back(pts[static_cast<std::size_t>(i * step)]);
    pts.swap(sub);
  }
  const std::size_t n = pts.size();
  std::vector<double> a(n);
  double ma = 0.0;
  for (std::size_t i = 0; i < n; ++i) ma += a[i] = prev_gray.at(pts[i].first, pts[i].second);
  ma /= double(n);
  double va = 0.0;
  for (auto& v : a) {
    v -= ma;
    va += v * v;
  }

  const int w = cur_gray.width(), h = cur_gray.height();
  double best = -2.0;
  int best_dx = 0, best_dy = 0, best_r2 = 0;
  std::vector<double> b(n);
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      double mb = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const int x = std::clamp(pts[i].first + dx, 0, w - 1);
        const int y = std::clamp(pts[i].second + dy, 0, h - 1);
        mb += b[i] = cur_gray.at(x, y);
      }
      mb /= double(n);
      double num = 0.0, vb = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = b[i] - mb;
        num += a[i] * d;
        vb += d * d;
      }
      const double z = (va > 0.0 && vb > 0.0) ? num / std::sqrt(va * vb) : (dx == 0 && dy == 0 ? 0.0 : -1.0);
      const int r2 = dx * dx + dy * dy;
      if (z > best + 1e-12 || (std::abs(z - best) <= 1e-12 && r2 < best_r2)) {
        best = z, best_dx = dx, best_dy = dy, best_r2 = r2;
      }
    }
  return {double(best_dx), double(best_dy)};
}

std::optional<FlowField> TranslationFlowProvider::flow(const FlowRequest& req) const {
  if (!req.prev_gray || !req.cur_gray || !req.prev_mask || req.prev_gray->empty()) return std::nullopt;
  const Point2 t = estimate_translation(*req.prev_gray, *req.cur_gray, *req.prev_mask, radius_);
  return FlowField::uniform(req.cur_gray->width(), req.cur_gray->height(), float(t.x), float(t.y));
}

std::optional<FlowField> FileFlowProvider::flow(const FlowRequest& req) const {
  char name[32];
  std::snprintf(name, sizeof(name), "%06d.flo", req.from_frame);
  const auto path = dir_ / name;
  if (!std::filesystem::exists(path)) return std::nullopt;
  return read_flow(path);
}

}  // namespace coin
