#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "coin/mask.hpp"
#include "coin/segmenter.hpp"

namespace coin {

enum class TrackingMode { Tracking, Lost };
std::string_view to_string(TrackingMode m);

struct AdaptationConfig {
  double min_boundary_distance = 20.0;  // full-resolution pixels
  bool enabled = true;
};

enum class SkipReason { None, LostState, Disabled, NoneEligible, LowConfidence };
std::string_view to_string(SkipReason r);

struct AdaptationReport {
  std::size_t n_bg_added = 0;
  std::size_t n_obj_added = 0;
  SkipReason skipped = SkipReason::None;
};

// Grid cells (row-major indices) of `seg` are tested at their center pixel
// against the full-resolution warped template and distance map.

// Object-labeled cells outside the contour, at least min_distance from it,
// whose 8-connected object component never touches the contour.
std::vector<std::size_t> select_background_examples(const LabelMask& seg, const BinaryMask& warped_template,
                                                    const DistanceMap& dist, double min_distance);

// Background-labeled cells enclosed by the object segmentation (closed holes)
// and inside the contour.
std::vector<std::size_t> select_object_examples(const LabelMask& seg, const BinaryMask& warped_template);

// Appends the selected cells' embeddings to the index; no-op while lost or
// disabled.
AdaptationReport adapt(TrackingMode mode, const AdaptationConfig& config, const LabelMask& seg,
                       const EmbeddingGrid& grid, const BinaryMask& warped_template, Label side, ExampleIndex& index);

}  // namespace coin
