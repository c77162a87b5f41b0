#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "coin/image.hpp"
#include "coin/mask.hpp"
#include "coin/random.hpp"

namespace coin {

enum class Label : std::uint8_t { Background = 0, Obverse = 1, Reverse = 2 };
inline constexpr int kLabelCount = 3;

std::string_view to_string(Label l);
Label label_from_string(std::string_view s);

// Per-cell labels with k-NN agreement confidence. stride == 1 is full
// resolution.
struct LabelMask {
  int cols = 0;
  int rows = 0;
  int stride = 1;
  std::vector<Label> labels;
  std::vector<float> confidence;

  LabelMask() = default;
  LabelMask(int cols, int rows, int stride, Label fill = Label::Background)
      : cols(cols), rows(rows), stride(stride),
        labels(static_cast<std::size_t>(cols) * rows, fill),
        confidence(static_cast<std::size_t>(cols) * rows, 1.0f) {}

  Label at(int c, int r) const { return labels[static_cast<std::size_t>(r) * cols + c]; }
  Label& at(int c, int r) { return labels[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t count(Label l) const;
};

// Cells carrying either side label.
BinaryMask object_mask(const LabelMask& lm);
BinaryMask label_mask(const LabelMask& lm, Label l);
// Full-resolution label mask from an 8-bit label PNG (0 / 128 / 255).
LabelMask label_mask_from_gray(const Gray8& g);
Gray8 label_mask_to_gray(const LabelMask& lm);

struct EmbeddingGrid {
  int cols = 0;
  int rows = 0;
  int stride = 1;
  int dim = 0;
  std::vector<float> values;

  std::span<const float> cell(int c, int r) const {
    return {values.data() + (static_cast<std::size_t>(r) * cols + c) * dim, static_cast<std::size_t>(dim)};
  }
  std::span<float> cell(int c, int r) {
    return {values.data() + (static_cast<std::size_t>(r) * cols + c) * dim, static_cast<std::size_t>(dim)};
  }
  std::size_t cell_count() const { return static_cast<std::size_t>(cols) * rows; }
  bool operator==(const EmbeddingGrid&) const = default;
};

// Pixel sampled for a grid cell (its center, clamped to the frame).
inline int cell_center(int cell, int stride, int extent) {
  const int p = cell * stride + stride / 2;
  return p < extent ? p : extent - 1;
}

// Deterministic per-pixel embedding extractor.
class EmbeddingBackend {
public:
  virtual ~EmbeddingBackend() = default;
  virtual std::string_view name() const = 0;
  virtual int dim() const = 0;
  virtual int stride() const = 0;
  // Per-sequence fitting (e.g. channel standardization) from the
  // initialization frames. Default: nothing.
  virtual void prepare(std::span<const Image* const> init_frames, std::span<const int> init_indices) {
    (void)init_frames;
    (void)init_indices;
  }
  virtual EmbeddingGrid extract(const Image& frame, int frame_index) const = 0;
};

EmbeddingGrid extract(const Image& frame, int frame_index, const EmbeddingBackend& backend);

struct Neighbor {
  double distance;
  Label label;
};

// Append-only store of labeled embeddings with exact L2 k-NN search.
// Neighbours are ordered by (distance, label); equal pairs are
// interchangeable, so results do not depend on insertion order.
class ExampleIndex {
public:
  explicit ExampleIndex(int dim, std::size_t capacity = 1'000'000);

  int dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  // Entries inserted before mark_initialized() are never evicted.
  std::size_t initialization_size() const noexcept { return init_size_; }
  void mark_initialized() { init_size_ = size(); }

  std::size_t count(Label l) const;
  std::span<const float> vector(std::size_t i) const {
    return {vectors_.data() + i * dim_, static_cast<std::size_t>(dim_)};
  }
  Label label(std::size_t i) const { return labels_[i]; }

  // vectors is row-major, labels.size() rows. Returns the new size. When the
  // capacity is exceeded the oldest post-initialization entries are evicted.
  std::size_t add(std::span<const float> vectors, std::span<const Label> labels);

  // The k nearest entries (fewer only if the index is smaller).
  std::vector<Neighbor> knn(std::span<const float> query, int k) const;

  void save(const std::filesystem::path& prefix) const;
  static ExampleIndex load(const std::filesystem::path& prefix);

private:
  struct Node {
    int begin, end;  // range in order_
    int left = -1, right = -1;
    std::vector<float> lo, hi;
  };

  void insert_unique(std::size_t entry);
  void rebuild_unique();
  void rebuild_tree();
  int build_node(int begin, int end);

  int dim_;
  std::size_t capacity_;
  std::size_t init_size_ = 0;
  std::vector<float> vectors_;
  std::vector<Label> labels_;

  // Search structure: distinct (vector, label) pairs with multiplicity.
  std::unordered_map<std::string, int> unique_lookup_;
  std::vector<float> unique_vectors_;
  std::vector<Label> unique_labels_;
  std::vector<std::uint32_t> unique_counts_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

// Majority vote over the k exact nearest neighbours; ties go to the label with
// the smallest summed distance, then to the lower label value.
LabelMask classify(const EmbeddingGrid& grid, const ExampleIndex& index, int k = 5);

std::size_t add_examples(ExampleIndex& index, std::span<const float> vectors, std::span<const Label> labels);

// Nearest-neighbour upsampling to full resolution.
LabelMask upsample_labels(const LabelMask& lm, int width, int height);

// Fill a fresh index from ground-truth frames: every grid cell enters with
// the label under its center pixel, then each label is subsampled uniformly
// to at most cap_per_label entries.
struct LabeledGrid {
  const EmbeddingGrid* grid;
  const LabelMask* labels;  // full resolution
};
void populate_index(ExampleIndex& index, std::span<const LabeledGrid> frames, std::size_t cap_per_label,
                    RandomSource& rng);

}  // namespace coin
