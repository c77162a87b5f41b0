#include "coin/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "coin/errors.hpp"

namespace coin {

SequenceIou sequence_iou(const std::map<int, BinaryMask>& predictions, const std::map<int, BinaryMask>& ground_truth) {
  SequenceIou out;
  double sum = 0.0;
  for (const auto& [t, gt] : ground_truth) {
    const auto it = predictions.find(t);
    if (it == predictions.end()) throw Error(ErrorCode::MissingFrame, "no prediction for frame " + std::to_string(t));
    FrameIou f{t, std::nullopt};
    if (gt.any()) {
      f.iou = iou(it->second, gt);
      sum += *f.iou;
      ++out.contributing;
    }
    out.frames.push_back(f);
  }
  if (out.contributing > 0) out.mean = sum / double(out.contributing);
  return out;
}

double textureness(const Image& frame, const BinaryMask& mask, double sigma) {
  if (frame.width() != mask.width() || frame.height() != mask.height())
    throw Error(ErrorCode::DimensionMismatch, "frame and mask sizes differ");
  const std::size_t n = mask.count();
  if (n == 0) throw Error(ErrorCode::EmptyMask, "textureness of an empty mask");
  Image luma = to_gray(frame);
  for (auto& v : luma.data()) v /= 255.0f;
  const Image log = laplacian(gaussian_blur(luma, sigma));
  double sum = 0.0;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask(x, y)) sum += std::abs(double(log.at(x, y)));
  return sum / double(n);
}

namespace {

std::optional<RotatedRect> rect_of(const BinaryMask& m) {
  if (!m.any()) return std::nullopt;
  const RotatedRect r = min_rotated_rect(m);
  if (!(r.side_a > 0.0 && r.side_b > 0.0)) return std::nullopt;
  return r;
}

}  // namespace

std::vector<double> ar_change_vs_first(const std::map<int, BinaryMask>& gt) {
  std::size_t non_empty = 0;
  for (const auto& [t, m] : gt) non_empty += m.any();
  if (non_empty < 2) throw Error(ErrorCode::InsufficientData, "need at least two non-empty annotated masks");
  std::optional<RotatedRect> first;
  std::vector<double> out;
  for (const auto& [t, m] : gt) {
    if (!m.any()) continue;
    if (!first) {
      first = rect_of(m);
      if (!first) throw Error(ErrorCode::InsufficientData, "first annotated mask is degenerate");
      continue;
    }
    if (const auto r = rect_of(m)) out.push_back(aspect_ratio_change(*first, *r));
  }
  return out;
}

std::vector<double> ar_change_speed(const std::map<int, BinaryMask>& gt, int gap) {
  std::vector<double> out;
  for (const auto& [t, m] : gt) {
    const auto prev = gt.find(t - gap);
    if (prev == gt.end()) continue;
    const auto a = rect_of(prev->second), b = rect_of(m);
    if (a && b) out.push_back(aspect_ratio_change(*a, *b));
  }
  return out;
}

std::size_t Histogram::total() const {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

Histogram make_histogram(const std::vector<double>& values, double lo, double hi, int n_bins) {
  if (!(lo > 0.0 && hi > lo && n_bins >= 1)) throw Error(ErrorCode::Config, "bad histogram range");
  Histogram h;
  h.counts.assign(n_bins, 0);
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i <= n_bins; ++i) h.edges.push_back(std::exp(llo + (lhi - llo) * i / n_bins));
  h.edges.front() = lo;
  h.edges.back() = hi;
  for (double v : values) {
    int bin = 0;
    if (v > lo) bin = static_cast<int>(std::upper_bound(h.edges.begin(), h.edges.end(), v) - h.edges.begin()) - 1;
    h.counts[std::clamp(bin, 0, n_bins - 1)]++;
  }
  return h;
}

void write_histogram_png(const std::filesystem::path& path, const Histogram& h, int width, int height) {
  cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  const std::size_t peak = h.counts.empty() ? 0 : *std::max_element(h.counts.begin(), h.counts.end());
  const int margin = 20;
  const int n = static_cast<int>(h.counts.size());
  const double bar = double(width - 2 * margin) / std::max(n, 1);
  for (int i = 0; i < n; ++i) {
    if (peak == 0 || h.counts[i] == 0) continue;
    const int bh = static_cast<int>(std::lround(double(h.counts[i]) / double(peak) * (height - 2 * margin)));
    const int x0 = margin + static_cast<int>(i * bar), x1 = margin + static_cast<int>((i + 1) * bar) - 1;
    cv::rectangle(img, {x0, height - margin - bh}, {x1, height - margin}, cv::Scalar(160, 90, 40), cv::FILLED);
  }
  cv::line(img, {margin, height - margin}, {width - margin, height - margin}, cv::Scalar(0, 0, 0));
  char label[64];
  std::snprintf(label, sizeof(label), "[%.2f, %.2f]  n=%zu", h.edges.empty() ? 0.0 : h.edges.front(),
                h.edges.empty() ? 0.0 : h.edges.back(), h.total());
  cv::putText(img, label, {margin, margin}, cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(0, 0, 0));
  if (!cv::imwrite(path.string(), img)) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

EvaluationRow evaluate_sequence(const std::string& name, const std::filesystem::path& results_dir,
                                const SequenceRecord& seq) {
  const auto records = read_results(results_dir / "results.jsonl");
  if (records.empty()) throw Error(ErrorCode::MissingFrame, "no results in " + results_dir.string());
  std::map<int, const FrameRecord*> by_frame;
  for (const auto& r : records) by_frame[r.frame] = &r;

  EvaluationRow row;
  row.sequence = name;
  row.frames = records.size();
  std::size_t tracking = 0;
  for (const auto& r : records) tracking += r.mode == TrackingMode::Tracking;
  row.tracking_fraction = double(tracking) / double(records.size());

  std::map<int, BinaryMask> gt, pred, gt_tracking, pred_tracking;
  for (const auto& [t, path] : seq.ground_truth) {
    const auto it = by_frame.find(t);
    if (it == by_frame.end()) throw Error(ErrorCode::MissingFrame, name + ": no result for frame " + std::to_string(t));
    gt[t] = object_mask(label_mask_from_gray(read_gray8(path)));
    pred[t] = object_mask(label_mask_from_gray(read_gray8(results_dir / it->second->mask_path)));
    if (it->second->mode == TrackingMode::Tracking) {
      gt_tracking[t] = gt[t];
      pred_tracking[t] = pred[t];
    }
  }
  const SequenceIou all = sequence_iou(pred, gt);
  const SequenceIou conf = sequence_iou(pred_tracking, gt_tracking);
  row.mean_iou = all.mean;
  row.gt_frames = all.contributing;
  row.tracking_iou = conf.mean;
  row.tracking_gt_frames = conf.contributing;
  return row;
}

std::string format_optional(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", *v);
  return buf;
}

}  // namespace coin
