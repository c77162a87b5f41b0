#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coin/dataset.hpp"
#include "coin/image.hpp"
#include "coin/mask.hpp"

namespace coin {

struct FrameIou {
  int frame = 0;
  std::optional<double> iou;  // absent when the ground truth is empty
};

struct SequenceIou {
  std::optional<double> mean;  // absent when no frame contributes
  std::size_t contributing = 0;
  std::vector<FrameIou> frames;
};

// Mean IoU over annotated frames; empty-ground-truth frames are reported but
// excluded from the mean. Throws MissingFrame when a ground-truth frame has
// no prediction.
SequenceIou sequence_iou(const std::map<int, BinaryMask>& predictions, const std::map<int, BinaryMask>& ground_truth);

// Mean |LoG| over the mask on luma scaled to [0, 1]: Gaussian blur (radius
// ceil(4 sigma)) followed by the 5-point Laplacian.
double textureness(const Image& frame, const BinaryMask& mask, double sigma = 0.8);

// Aspect-ratio change of each later non-empty annotated mask against the
// first non-empty one. Masks whose rectangle is degenerate are skipped.
std::vector<double> ar_change_vs_first(const std::map<int, BinaryMask>& gt);
// Against the mask `gap` frames earlier, for every annotated pair.
std::vector<double> ar_change_speed(const std::map<int, BinaryMask>& gt, int gap = 5);

struct Histogram {
  std::vector<double> edges;  // counts.size() + 1 ascending edges
  std::vector<std::size_t> counts;

  std::size_t total() const;
};

// n_bins log-spaced bins over [lo, hi]; values outside fall into the end
// bins.
Histogram make_histogram(const std::vector<double>& values, double lo = 1.0, double hi = 8.0, int n_bins = 32);
void write_histogram_png(const std::filesystem::path& path, const Histogram& h, int width = 640, int height = 320);

// Table rows for a tracked sequence against its ground truth.
struct EvaluationRow {
  std::string sequence;
  std::optional<double> mean_iou;
  std::size_t gt_frames = 0;       // contributing frames
  std::optional<double> tracking_iou;  // only frames in tracking state
  std::size_t tracking_gt_frames = 0;
  double tracking_fraction = 0.0;  // over all result frames
  std::size_t frames = 0;
};

// Results directory holds results.jsonl and the mask PNGs it names.
EvaluationRow evaluate_sequence(const std::string& name, const std::filesystem::path& results_dir,
                                const SequenceRecord& seq);

std::string format_optional(const std::optional<double>& v);

}  // namespace coin
