#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "coin/geometry.hpp"
#include "coin/image.hpp"
#include "coin/mask.hpp"

namespace coin {

// Dense displacement field from frame t-1 to frame t.
//
// On-disk layout (little endian): int32 width, int32 height, then
// width*height float32 dx values in row-major order, then the dy plane.
class FlowField {
public:
  FlowField() = default;
  FlowField(int width, int height) : width_(width), height_(height), dx_(std::size_t(width) * height, 0.0f), dy_(dx_) {}

  static FlowField uniform(int width, int height, float dx, float dy);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return dx_.empty(); }

  float& dx(int x, int y) { return dx_[std::size_t(y) * width_ + x]; }
  float& dy(int x, int y) { return dy_[std::size_t(y) * width_ + x]; }
  float dx(int x, int y) const { return dx_[std::size_t(y) * width_ + x]; }
  float dy(int x, int y) const { return dy_[std::size_t(y) * width_ + x]; }

  const float* dx_data() const noexcept { return dx_.data(); }
  const float* dy_data() const noexcept { return dy_.data(); }
  float* dx_data() noexcept { return dx_.data(); }
  float* dy_data() noexcept { return dy_.data(); }

  // Pixel p moved to p + flow(p).
  Point2 advect(int x, int y) const { return {x + double(dx(x, y)), y + double(dy(x, y))}; }

  bool operator==(const FlowField&) const = default;

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> dx_;
  std::vector<float> dy_;
};

FlowField read_flow(const std::filesystem::path& path);
void write_flow(const std::filesystem::path& path, const FlowField& flow);

// Integer translation maximizing ZNCC of the masked region of prev against
// cur, searched exhaustively in [-radius, radius]^2. At most max_samples mask
// pixels (a regular subsample) take part.
Point2 estimate_translation(const Image& prev_gray, const Image& cur_gray, const BinaryMask& prev_mask, int radius = 32,
                            std::size_t max_samples = 1024);

struct FlowRequest {
  int from_frame = 0;
  int to_frame = 0;
  const Image* prev_gray = nullptr;
  const Image* cur_gray = nullptr;
  const BinaryMask* prev_mask = nullptr;
};

class FlowProvider {
public:
  virtual ~FlowProvider() = default;
  virtual std::optional<FlowField> flow(const FlowRequest& req) const = 0;
};

// Coarse built-in estimator: one translation for the whole frame.
class TranslationFlowProvider final : public FlowProvider {
public:
  explicit TranslationFlowProvider(int radius = 32) : radius_(radius) {}
  std::optional<FlowField> flow(const FlowRequest& req) const override;

private:
  int radius_;
};

// Reads <dir>/<from_frame as %06d>.flo; missing files yield no flow.
class FileFlowProvider final : public FlowProvider {
public:
  explicit FileFlowProvider(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::optional<FlowField> flow(const FlowRequest& req) const override;

private:
  std::filesystem::path dir_;
};

}  // namespace coin
