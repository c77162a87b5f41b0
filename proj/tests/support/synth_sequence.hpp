#pragma once

#include <map>
#include <memory>
#include <mutex>

#include "coin/backends.hpp"
#include "coin/dataset.hpp"
#include "coin/synth.hpp"

namespace coin::oracle {

// In-memory rendered sequence with every frame annotated.
class SynthSequence final : public SequenceSource {
public:
  SynthSequence(SceneSpec spec, InitSpec init) : renderer_(std::move(spec)), init_(init) {}

  int frame_count() const override { return renderer_.spec().frames; }
  Image frame(int t) const override { return rendered(t).image; }
  std::vector<int> annotated_frames() const override {
    std::vector<int> out(frame_count());
    for (int t = 0; t < frame_count(); ++t) out[t] = t;
    return out;
  }
  LabelMask ground_truth(int t) const override { return rendered(t).labels; }
  InitSpec init() const override { return init_; }

  const SceneRenderer& renderer() const { return renderer_; }
  const SynthFrame& rendered(int t) const {
    std::lock_guard lock(mutex_);
    auto it = cache_.find(t);
    if (it == cache_.end()) it = cache_.emplace(t, renderer_.render(t)).first;
    return it->second;
  }

  // Oracle backend fed with the exact rendered labels, optionally corrupted.
  std::shared_ptr<EmbeddingBackend> oracle_backend(Corruption corruption = {}, int stride = 4) const {
    return std::make_shared<OracleBackend>(
        [this, corruption](int t) {
          OracleLabels l;
          l.truth = rendered(t).labels;
          l.observed = oracle_segmenter(l.truth, corruption, t);
          return l;
        },
        stride);
  }

private:
  SceneRenderer renderer_;
  InitSpec init_;
  mutable std::mutex mutex_;
  mutable std::map<int, SynthFrame> cache_;
};

}  // namespace coin::oracle
