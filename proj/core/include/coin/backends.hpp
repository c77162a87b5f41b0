#pragma once

#include <functional>
#include <memory>
#include <string>

#include "coin/segmenter.hpp"

namespace coin {

// Hand-crafted per-pixel features: CIELAB color, luma blurred at two scales,
// Laplacian-of-Gaussian response and optionally normalized pixel coordinates.
// Cell vectors are box averages over the stride x stride block. After
// prepare() every channel is standardized with statistics of the
// initialization frames.
class FeatureBackend final : public EmbeddingBackend {
public:
  struct Options {
    int stride = 4;
    bool use_xy = false;
    double blur_sigma_small = 2.0;
    double blur_sigma_large = 4.0;
    double log_sigma = 1.5;
  };

  FeatureBackend() : FeatureBackend(Options{}) {}
  explicit FeatureBackend(Options opts);

  std::string_view name() const override { return "reference"; }
  int dim() const override { return opts_.use_xy ? 8 : 6; }
  int stride() const override { return opts_.stride; }
  void prepare(std::span<const Image* const> init_frames, std::span<const int> init_indices) override;
  EmbeddingGrid extract(const Image& frame, int frame_index) const override;

  // Pooled features before standardization.
  EmbeddingGrid raw_features(const Image& frame) const;

private:
  Options opts_;
  std::vector<float> mean_;
  std::vector<float> inv_std_;
};

// Labels as seen by an idealized segmenter, together with the uncorrupted
// truth. Pixels where the two disagree get a marker channel so that a k-NN
// classifier first reproduces the corruption and can later be taught
// otherwise by adaptation.
struct OracleLabels {
  LabelMask truth;     // full resolution
  LabelMask observed;  // full resolution
};

class OracleBackend final : public EmbeddingBackend {
public:
  using Source = std::function<OracleLabels(int frame_index)>;

  OracleBackend(Source source, int stride = 4) : source_(std::move(source)), stride_(stride) {}

  std::string_view name() const override { return "oracle"; }
  int dim() const override { return 5; }
  int stride() const override { return stride_; }
  EmbeddingGrid extract(const Image& frame, int frame_index) const override;

  static constexpr float kMarker = 0.3f;

private:
  Source source_;
  int stride_;
};

}  // namespace coin
