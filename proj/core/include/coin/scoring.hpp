#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "coin/geometry.hpp"
#include "coin/image.hpp"
#include "coin/mask.hpp"

namespace coin {

struct ScoreBreakdown {
  double s_obj = 0.0;
  double s_cover = 0.0;
  double s_occl = 0.0;
  double s_appearance = 0.0;
  double total = 0.0;  // exact product of the four stored components
  bool operator==(const ScoreBreakdown&) const = default;
};

ScoreBreakdown combine_scores(double s_obj, double s_cover, double s_occl, double s_appearance);

// Fraction of the segmentation inside the hypothesized contour; 0 for an
// empty segmentation.
double s_obj(const BinaryMask& seg, const BinaryMask& warped_template);
// Fraction of the contour interior segmented as object; 0 for an empty
// contour.
double s_cover(const BinaryMask& seg, const BinaryMask& warped_template);
BinaryMask visibility_mask(const BinaryMask& seg, const BinaryMask& warped_template);
// IoU of the current visibility with the previous one carried over by the
// inter-frame homography.
double s_occl(const BinaryMask& current_vis, const BinaryMask& prev_vis, const Homography& h_inter);

struct AppearanceOptions {
  std::size_t min_pixels = 16;
  double variance_epsilon = 1e-9;  // per-pixel variance floor
};
inline constexpr double kNeutralAppearance = 0.5;

// Canonical-frame pixels that are object in the template and whose image
// under h lands on a segmented pixel of the current frame.
BinaryMask appearance_support(const BinaryMask& template_mask, const BinaryMask& seg, const Homography& h);

// 1/2 + ZNCC/2 over the support, current frame sampled bilinearly at h(p).
// Degenerate supports (too small or flat) score kNeutralAppearance.
double s_appearance(const Image& frame_gray, const Image& template_gray, const Homography& h, const BinaryMask& support,
                    const AppearanceOptions& opts = {});

// Everything a pose hypothesis is scored against. prev_visibility lives in
// the frame reached from the canonical frame by prev_pose; re-detection uses
// the full template mask with an identity prev_pose.
struct ScoringContext {
  const Image* frame_gray = nullptr;
  const BinaryMask* segmentation = nullptr;
  const Image* template_gray = nullptr;
  const BinaryMask* template_mask = nullptr;
  const BinaryMask* prev_visibility = nullptr;
  Homography prev_pose;
  AppearanceOptions appearance;
};

// Reference route: materializes every full-resolution mask.
ScoreBreakdown score(const ScoringContext& ctx, const Homography& h);

// Same numbers as score(), restricted to the window the warped masks can
// touch. Thread-safe for concurrent calls.
class Scorer {
public:
  explicit Scorer(const ScoringContext& ctx);
  ScoreBreakdown operator()(const Homography& h) const;

private:
  ScoringContext ctx_;
  std::size_t seg_count_ = 0;
  std::optional<Rect> template_box_;
  std::optional<Rect> prev_box_;
  struct TemplatePixel {
    int x, y;
    float gray;
  };
  std::vector<TemplatePixel> template_pixels_;
  Homography prev_pose_inverse_;
};

}  // namespace coin
