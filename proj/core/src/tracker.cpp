#include "coin/tracker.hpp"

#include "coin/backends.hpp"
#include "coin/errors.hpp"
#include "coin/synth.hpp"

namespace coin {

namespace {

constexpr std::uint64_t kIndexStream = 0xC0FFEEull << 32;

LabelMask paint(const BinaryMask& m, Label side) {
  LabelMask out(m.width(), m.height(), 1);
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m.bits()[i]) out.labels[i] = side;
  return out;
}

}  // namespace

const SideTemplate& Templates::of(Label side) const {
  if (side == Label::Reverse) {
    if (!reverse) throw Error(ErrorCode::InvalidTemplate, "no reverse template");
    return *reverse;
  }
  if (side != Label::Obverse) throw Error(ErrorCode::InvalidTemplate, "background has no template");
  return obverse;
}

SideTemplate make_template(Label side, int frame_index, const Image& image, const BinaryMask& mask) {
  if (image.width() != mask.width() || image.height() != mask.height())
    throw Error(ErrorCode::InvalidTemplate, "template image and mask sizes differ");
  const auto box = mask.bounding_box();
  if (!box) throw Error(ErrorCode::InvalidTemplate, std::string(to_string(side)) + " template mask is empty");
  return {side, frame_index, image, to_gray(image), mask, *box};
}

Tracker::Tracker(Templates templates, std::shared_ptr<EmbeddingBackend> backend, TrackerConfig config)
    : templates_(std::move(templates)), backend_(std::move(backend)), config_(std::move(config)) {
  validate(config_);
  if (!backend_) throw Error(ErrorCode::BackendFailure, "no embedding backend");
  if (!templates_.obverse.mask.any())
    throw Error(ErrorCode::InvalidTemplate, "obverse template mask is empty");
  if (templates_.reverse) {
    if (!templates_.reverse->mask.any()) throw Error(ErrorCode::InvalidTemplate, "reverse template mask is empty");
    if (templates_.reverse->mask.width() != templates_.obverse.mask.width() ||
        templates_.reverse->mask.height() != templates_.obverse.mask.height())
      throw Error(ErrorCode::InvalidTemplate, "templates differ in size");
  }
}

void Tracker::initialize(const LabelMask& obverse_gt, const LabelMask* reverse_gt) {
  const bool defer = config_.tracker.strict_causal && templates_.reverse && templates_.reverse->frame_index > templates_.obverse.frame_index;
  std::vector<const Image*> init_frames{&templates_.obverse.image};
  std::vector<int> init_indices{templates_.obverse.frame_index};
  if (templates_.reverse && reverse_gt && !defer) {
    init_frames.push_back(&templates_.reverse->image);
    init_indices.push_back(templates_.reverse->frame_index);
  }
  backend_->prepare(init_frames, init_indices);

  index_ = std::make_unique<ExampleIndex>(backend_->dim(), config_.segmenter.index_capacity);
  std::vector<EmbeddingGrid> grids;
  std::vector<const LabelMask*> labels;
  grids.push_back(extract(templates_.obverse.image, templates_.obverse.frame_index, *backend_));
  labels.push_back(&obverse_gt);
  if (templates_.reverse && reverse_gt) {
    if (defer) {
      deferred_reverse_gt_ = *reverse_gt;
    } else {
      grids.push_back(extract(templates_.reverse->image, templates_.reverse->frame_index, *backend_));
      labels.push_back(reverse_gt);
      reverse_examples_added_ = true;
    }
  }
  std::vector<LabeledGrid> frames;
  for (std::size_t i = 0; i < grids.size(); ++i) frames.push_back({&grids[i], labels[i]});
  RandomSource rng(RandomSource::derive(config_.seed, kIndexStream));
  populate_index(*index_, frames, config_.segmenter.cap_per_label, rng);
  index_->mark_initialized();

  state_ = TrackerState{};
  state_.side = Label::Obverse;
}

void Tracker::add_reverse_examples() {
  if (reverse_examples_added_ || !deferred_reverse_gt_) return;
  const EmbeddingGrid grid = extract(templates_.reverse->image, templates_.reverse->frame_index, *backend_);
  ExampleIndex scratch(index_->dim());
  const LabeledGrid frames[] = {{&grid, &*deferred_reverse_gt_}};
  RandomSource rng(RandomSource::derive(config_.seed, kIndexStream + 1));
  populate_index(scratch, frames, config_.segmenter.cap_per_label, rng);
  std::vector<float> vectors;
  std::vector<Label> labels;
  for (std::size_t i = 0; i < scratch.size(); ++i) {
    const auto v = scratch.vector(i);
    vectors.insert(vectors.end(), v.begin(), v.end());
    labels.push_back(scratch.label(i));
  }
  index_->add(vectors, labels);
  reverse_examples_added_ = true;
  deferred_reverse_gt_.reset();
}

bool Tracker::side_available(Label side, int t) const {
  if (side == Label::Obverse) return true;
  if (!templates_.reverse) return false;
  return !config_.tracker.strict_causal || t >= templates_.reverse->frame_index;
}

Label Tracker::choose_side(const LabelMask& seg, int t) const {
  if (!side_available(Label::Reverse, t)) return Label::Obverse;
  const std::size_t n_obv = seg.count(Label::Obverse);
  const std::size_t n_rev = seg.count(Label::Reverse);
  if (n_obv > n_rev) return Label::Obverse;
  if (n_rev > n_obv) return Label::Reverse;
  return state_.side;
}

AnnealSchedule Tracker::schedule(const Rect& box) const {
  AnnealSchedule s;
  s.iterations = config_.optimizer.iterations;
  s.t0 = config_.optimizer.t0;
  s.t_decay = config_.optimizer.t_decay;
  s.sigma0 = default_sigma0(box, config_.optimizer.sigma0_fraction);
  s.sigma_decay = config_.optimizer.sigma_decay;
  return s;
}

FrameResult Tracker::step(const Image& frame, int t, const FlowProvider* flow) {
  if (!index_) throw Error(ErrorCode::InvalidTemplate, "tracker not initialized");
  if (frame.width() != templates_.obverse.mask.width() || frame.height() != templates_.obverse.mask.height())
    throw Error(ErrorCode::DimensionMismatch, "frame size differs from the templates");
  if (deferred_reverse_gt_ && t >= templates_.reverse->frame_index) add_reverse_examples();

  const int w = frame.width(), h = frame.height();
  const EmbeddingGrid grid = extract(frame, t, *backend_);
  const LabelMask seg = classify(grid, *index_, config_.segmenter.k);
  const BinaryMask objects = object_mask(upsample_labels(seg, w, h));
  const Image gray = to_gray(frame);
  RandomSource rng(RandomSource::derive(config_.seed, static_cast<std::uint64_t>(t)));

  AppearanceOptions appearance;
  appearance.min_pixels = config_.scoring.min_appearance_pixels;

  FrameResult result;
  result.frame = t;
  result.segmentation = seg;
  OptimizationResult best;
  bool reentry = false;
  Label side = state_.side;
  TrackingMode mode = TrackingMode::Lost;

  if (t == templates_.obverse.frame_index) {
    // Ground-truth initialization: identity pose, full template as occlusion
    // reference.
    side = Label::Obverse;
    const auto& tmpl = templates_.obverse;
    const ScoringContext ctx{&gray, &objects, &tmpl.gray, &tmpl.mask, &tmpl.mask, Homography(), appearance};
    best.h = Homography();
    best.breakdown = Scorer(ctx)(best.h);
    best.evaluation_count = 1;
    reentry = true;
    mode = best.breakdown.total >= config_.tracker.lost_threshold ? TrackingMode::Tracking : TrackingMode::Lost;
  } else {
    side = choose_side(seg, t);
    const auto& tmpl = templates_.of(side);
    const AnnealSchedule sched = schedule(tmpl.box);
    if (state_.mode == TrackingMode::Tracking && side == state_.side) {
      const ScoringContext ctx{&gray,       &objects, &tmpl.gray, &tmpl.mask, &state_.prev_visibility,
                               state_.prev_visibility_pose, appearance};
      const Scorer scorer(ctx);
      std::optional<FlowField> field;
      if (flow && state_.prev_region.any() && !state_.prev_gray.empty())
        field = flow->flow({t - 1, t, &state_.prev_gray, &gray, &state_.prev_region});
      HypothesisRequest req;
      req.prev_pose = state_.pose;
      req.flow = field ? &*field : nullptr;
      req.prev_region = &state_.prev_region;
      req.control_box = tmpl.box;
      req.samples = config_.optimizer.init_samples;
      const OptimizationResult init = init_hypotheses(req, std::cref(scorer), rng);
      best = anneal(init.h, sched, tmpl.box, std::cref(scorer), rng, init.breakdown);
      best.evaluation_count += init.evaluation_count;
      best.rejected_count += init.rejected_count;
      if (config_.tracker.refresh_low_confidence && best.breakdown.total < config_.tracker.redetect_threshold) {
        // A weak local optimum (e.g. a rotation picked on a near edge-on
        // coin) cannot be left by local search; compare with a global one.
        RedetectRequest rreq;
        rreq.template_mask = &tmpl.mask;
        rreq.control_box = tmpl.box;
        rreq.segmentation = &objects;
        rreq.samples = config_.optimizer.redetect_samples;
        const OptimizationResult global = redetect(rreq, sched, std::cref(scorer), rng);
        best.evaluation_count += global.evaluation_count;
        best.rejected_count += global.rejected_count;
        if (global.evaluation_count > global.rejected_count && global.breakdown.total > best.breakdown.total) {
          best.h = global.h;
          best.breakdown = global.breakdown;
        }
      }
      mode = best.breakdown.total >= config_.tracker.lost_threshold ? TrackingMode::Tracking : TrackingMode::Lost;
    } else {
      // Lost, or the visible side changed: poses of different sides do not
      // compose, so search globally against the new side's template.
      const ScoringContext ctx{&gray, &objects, &tmpl.gray, &tmpl.mask, &tmpl.mask, Homography(), appearance};
      const Scorer scorer(ctx);
      RedetectRequest req;
      req.template_mask = &tmpl.mask;
      req.control_box = tmpl.box;
      req.segmentation = &objects;
      req.samples = config_.optimizer.redetect_samples;
      best = redetect(req, sched, std::cref(scorer), rng);
      const double threshold = state_.mode == TrackingMode::Tracking ? config_.tracker.lost_threshold
                                                                      : config_.tracker.redetect_threshold;
      const bool found = best.evaluation_count > best.rejected_count;
      mode = found && best.breakdown.total >= threshold ? TrackingMode::Tracking : TrackingMode::Lost;
      reentry = true;
      result.redetected = mode == TrackingMode::Tracking;
    }
  }

  const auto& tmpl = templates_.of(side);
  result.side = side;
  result.mode = mode;
  result.breakdown = best.breakdown;
  result.evaluations = best.evaluation_count;
  if (mode == TrackingMode::Tracking) {
    const BinaryMask warped = warp_mask(best.h, tmpl.mask, w, h);
    const BinaryMask vis = mask_and(objects, warped);
    result.mask = paint(vis, side);
    result.pose = best.h;
    AdaptationConfig ac;
    ac.enabled = config_.adaptation.enabled;
    ac.min_boundary_distance = config_.adaptation.min_boundary_distance;
    if (best.breakdown.total < config_.adaptation.min_score) {
      result.adaptation.skipped = SkipReason::LowConfidence;
    } else {
      result.adaptation = adapt(mode, ac, seg, grid, warped, side, *index_);
    }

    state_.pose = best.h;
    if (reentry) {
      state_.prev_visibility = tmpl.mask;
      state_.prev_visibility_pose = Homography();
    } else {
      state_.prev_visibility = vis;
      state_.prev_visibility_pose = best.h;
    }
    state_.prev_region = vis;
  } else {
    result.mask = LabelMask(w, h, 1);
    result.adaptation.skipped = SkipReason::LostState;
    state_.pose.reset();
    state_.prev_region = BinaryMask(w, h);
  }
  state_.mode = mode;
  state_.side = side;
  state_.prev_gray = gray;
  state_.frame_index = t;
  state_.last_breakdown = best.breakdown;
  result.index_size = index_->size();
  return result;
}

std::shared_ptr<EmbeddingBackend> make_backend(const TrackerConfig& config, const std::filesystem::path& sequence_dir) {
  if (config.segmenter.backend == "reference") {
    FeatureBackend::Options opts;
    opts.stride = config.segmenter.stride;
    opts.use_xy = config.segmenter.use_xy;
    return std::make_shared<FeatureBackend>(opts);
  }
  if (config.segmenter.backend == "oracle") {
    Corruption corruption;
    corruption.fp_blobs = parse_fp_blobs(config.oracle.fp_blobs);
    corruption.hole_pixels = config.oracle.hole_pixels;
    corruption.erosion = config.oracle.erosion;
    const auto dir = sequence_dir / "oracle";
    auto source = [dir, corruption](int t) {
      const auto path = dir / frame_name(t);
      if (!std::filesystem::exists(path))
        throw Error(ErrorCode::BackendFailure, "oracle labels missing: " + path.string());
      OracleLabels out;
      out.truth = label_mask_from_gray(read_gray8(path));
      out.observed = oracle_segmenter(out.truth, corruption, t);
      return out;
    };
    return std::make_shared<OracleBackend>(source, config.segmenter.stride);
  }
  throw Error(ErrorCode::Config, "unknown backend '" + config.segmenter.backend + "'");
}

std::unique_ptr<FlowProvider> make_flow_provider(const TrackerConfig& config, const std::filesystem::path& sequence_dir) {
  if (config.optimizer.flow == "builtin") return std::make_unique<TranslationFlowProvider>(config.optimizer.flow_radius);
  if (config.optimizer.flow == "files") return std::make_unique<FileFlowProvider>(sequence_dir / "flow");
  return nullptr;
}

void run_sequence(const SequenceSource& seq, const TrackerConfig& config, std::shared_ptr<EmbeddingBackend> backend,
                  const FlowProvider* flow, const FrameSink& sink) {
  const InitSpec init = seq.init();
  Templates templates;
  const LabelMask obverse_gt = seq.ground_truth(init.obverse_frame);
  templates.obverse = make_template(Label::Obverse, init.obverse_frame, seq.frame(init.obverse_frame),
                                    object_mask(obverse_gt));
  std::optional<LabelMask> reverse_gt;
  if (init.reverse_frame) {
    reverse_gt = seq.ground_truth(*init.reverse_frame);
    templates.reverse = make_template(Label::Reverse, *init.reverse_frame, seq.frame(*init.reverse_frame),
                                      object_mask(*reverse_gt));
  }
  Tracker tracker(std::move(templates), std::move(backend), config);
  tracker.initialize(obverse_gt, reverse_gt ? &*reverse_gt : nullptr);
  for (int t = 0; t < seq.frame_count(); ++t) sink(tracker.step(seq.frame(t), t, flow));
}

std::vector<FrameResult> run_sequence(const SequenceSource& seq, const TrackerConfig& config,
                                      std::shared_ptr<EmbeddingBackend> backend, const FlowProvider* flow) {
  std::vector<FrameResult> results;
  results.reserve(seq.frame_count());
  run_sequence(seq, config, std::move(backend), flow, [&](const FrameResult& r) { results.push_back(r); });
  return results;
}

}  // namespace coin
