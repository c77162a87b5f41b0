#include "coin/adaptation.hpp"

#include "coin/errors.hpp"

namespace coin {

std::string_view to_string(TrackingMode m) { return m == TrackingMode::Tracking ? "tracking" : "lost"; }

std::string_view to_string(SkipReason r) {
  switch (r) {
    case SkipReason::None: return "none";
    case SkipReason::LostState: return "lost-state";
    case SkipReason::Disabled: return "disabled";
    case SkipReason::NoneEligible: return "none-eligible";
    case SkipReason::LowConfidence: return "low-confidence";
  }
  return "none";
}

namespace {

// Warped template sampled at cell centers.
BinaryMask template_cells(const LabelMask& seg, const BinaryMask& warped_template) {
  BinaryMask cells(seg.cols, seg.rows);
  for (int r = 0; r < seg.rows; ++r)
    for (int c = 0; c < seg.cols; ++c)
      cells.set(c, r, warped_template(cell_center(c, seg.stride, warped_template.width()),
                                      cell_center(r, seg.stride, warped_template.height())));
  return cells;
}

}  // namespace

std::vector<std::size_t> select_background_examples(const LabelMask& seg, const BinaryMask& warped_template,
                                                    const DistanceMap& dist, double min_distance) {
  const BinaryMask inside = template_cells(seg, warped_template);
  const BinaryMask objects = object_mask(seg);
  const auto comps = label_components(objects);
  std::vector<std::uint8_t> touches(comps.sizes.size(), 0);
  for (std::size_t i = 0; i < comps.ids.size(); ++i)
    if (comps.ids[i] >= 0 && inside.bits()[i]) touches[comps.ids[i]] = 1;

  std::vector<std::size_t> out;
  for (int r = 0; r < seg.rows; ++r)
    for (int c = 0; c < seg.cols; ++c) {
      const std::size_t i = std::size_t(r) * seg.cols + c;
      if (comps.ids[i] < 0 || touches[comps.ids[i]] || inside.bits()[i]) continue;
      const float d = dist.at(cell_center(c, seg.stride, dist.width), cell_center(r, seg.stride, dist.height));
      if (d >= min_distance) out.push_back(i);
    }
  return out;
}

std::vector<std::size_t> select_object_examples(const LabelMask& seg, const BinaryMask& warped_template) {
  const BinaryMask inside = template_cells(seg, warped_template);
  const BinaryMask cavities = holes(object_mask(seg));
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cavities.size(); ++i)
    if (cavities.bits()[i] && inside.bits()[i]) out.push_back(i);
  return out;
}

AdaptationReport adapt(TrackingMode mode, const AdaptationConfig& config, const LabelMask& seg,
                       const EmbeddingGrid& grid, const BinaryMask& warped_template, Label side, ExampleIndex& index) {
  AdaptationReport report;
  if (mode == TrackingMode::Lost) {
    report.skipped = SkipReason::LostState;
    return report;
  }
  if (!config.enabled) {
    report.skipped = SkipReason::Disabled;
    return report;
  }
  if (grid.cols != seg.cols || grid.rows != seg.rows)
    throw Error(ErrorCode::DimensionMismatch, "embedding grid and segmentation differ");

  const DistanceMap dist = boundary_distance(warped_template);
  const auto bg = select_background_examples(seg, warped_template, dist, config.min_boundary_distance);
  const auto obj = select_object_examples(seg, warped_template);

  std::vector<float> vectors;
  std::vector<Label> labels;
  vectors.reserve((bg.size() + obj.size()) * grid.dim);
  for (auto i : bg) {
    const auto v = grid.cell(static_cast<int>(i % grid.cols), static_cast<int>(i / grid.cols));
    vectors.insert(vectors.end(), v.begin(), v.end());
    labels.push_back(Label::Background);
  }
  for (auto i : obj) {
    const auto v = grid.cell(static_cast<int>(i % grid.cols), static_cast<int>(i / grid.cols));
    vectors.insert(vectors.end(), v.begin(), v.end());
    labels.push_back(side);
  }
  index.add(vectors, labels);
  report.n_bg_added = bg.size();
  report.n_obj_added = obj.size();
  if (labels.empty()) report.skipped = SkipReason::NoneEligible;
  return report;
}

}  // namespace coin
