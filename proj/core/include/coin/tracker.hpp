#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "coin/adaptation.hpp"
#include "coin/config.hpp"
#include "coin/dataset.hpp"
#include "coin/flow.hpp"
#include "coin/optimizer.hpp"
#include "coin/scoring.hpp"
#include "coin/segmenter.hpp"

namespace coin {

// Ground-truth view of one side. Poses of that side map this frame's pixel
// grid (the canonical frame) into the current frame.
struct SideTemplate {
  Label side = Label::Obverse;
  int frame_index = 0;
  Image image;
  Image gray;
  BinaryMask mask;
  Rect box;
};

struct Templates {
  SideTemplate obverse;
  std::optional<SideTemplate> reverse;

  const SideTemplate& of(Label side) const;
  bool has(Label side) const { return side == Label::Obverse || reverse.has_value(); }
};

// Throws InvalidTemplate on an empty mask or mismatched sizes.
SideTemplate make_template(Label side, int frame_index, const Image& image, const BinaryMask& mask);

struct TrackerState {
  TrackingMode mode = TrackingMode::Lost;
  Label side = Label::Obverse;
  std::optional<Homography> pose;  // present iff tracking
  // Occlusion reference and the pose of the frame it lives in.
  BinaryMask prev_visibility;
  Homography prev_visibility_pose;
  // Object pixels of the previous frame in image coordinates (flow source).
  BinaryMask prev_region;
  Image prev_gray;
  int frame_index = -1;
  ScoreBreakdown last_breakdown;
};

struct FrameResult {
  int frame = 0;
  LabelMask mask;  // full resolution; empty of object pixels while lost
  LabelMask segmentation;  // segmenter output at grid resolution, before adaptation
  std::optional<Homography> pose;
  Label side = Label::Obverse;
  TrackingMode mode = TrackingMode::Lost;
  ScoreBreakdown breakdown;
  AdaptationReport adaptation;
  bool redetected = false;
  int evaluations = 0;
  std::size_t index_size = 0;  // example count after adaptation
};

class Tracker {
public:
  Tracker(Templates templates, std::shared_ptr<EmbeddingBackend> backend, TrackerConfig config);

  // Fits the backend and fills the example index from the ground-truth
  // frames. Under strict_causal the reverse examples wait for their frame.
  void initialize(const LabelMask& obverse_gt, const LabelMask* reverse_gt);

  // Processes frame t. At the obverse initialization frame the state is
  // reset to the identity pose.
  FrameResult step(const Image& frame, int t, const FlowProvider* flow = nullptr);

  const TrackerState& state() const { return state_; }
  const ExampleIndex& index() const { return *index_; }
  const Templates& templates() const { return templates_; }
  const TrackerConfig& config() const { return config_; }

private:
  bool side_available(Label side, int t) const;
  void add_reverse_examples();
  AnnealSchedule schedule(const Rect& box) const;
  Label choose_side(const LabelMask& seg, int t) const;

  Templates templates_;
  std::shared_ptr<EmbeddingBackend> backend_;
  TrackerConfig config_;
  std::unique_ptr<ExampleIndex> index_;
  TrackerState state_;
  std::optional<LabelMask> deferred_reverse_gt_;
  bool reverse_examples_added_ = false;
};

// Backend named by config.segmenter.backend. The oracle backend reads
// <sequence>/oracle/%06d.png and applies config.oracle corruption.
std::shared_ptr<EmbeddingBackend> make_backend(const TrackerConfig& config, const std::filesystem::path& sequence_dir);
// nullptr for "none".
std::unique_ptr<FlowProvider> make_flow_provider(const TrackerConfig& config, const std::filesystem::path& sequence_dir);

using FrameSink = std::function<void(const FrameResult&)>;

// Tracks every frame in order, handing each result to sink.
void run_sequence(const SequenceSource& seq, const TrackerConfig& config, std::shared_ptr<EmbeddingBackend> backend,
                  const FlowProvider* flow, const FrameSink& sink);
std::vector<FrameResult> run_sequence(const SequenceSource& seq, const TrackerConfig& config,
                                      std::shared_ptr<EmbeddingBackend> backend, const FlowProvider* flow);

}  // namespace coin
