#include "coin/segmenter.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "coin/errors.hpp"

namespace coin {

std::string_view to_string(Label l) {
  switch (l) {
    case Label::Background: return "background";
    case Label::Obverse: return "obverse";
    case Label::Reverse: return "reverse";
  }
  return "background";
}

Label label_from_string(std::string_view s) {
  if (s == "background") return Label::Background;
  if (s == "obverse") return Label::Obverse;
  if (s == "reverse") return Label::Reverse;
  throw Error(ErrorCode::Config, "unknown label '" + std::string(s) + "'");
}

std::size_t LabelMask::count(Label l) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l));
}

BinaryMask object_mask(const LabelMask& lm) {
  BinaryMask m(lm.cols, lm.rows);
  for (std::size_t i = 0; i < lm.labels.size(); ++i) m.bits()[i] = lm.labels[i] != Label::Background;
  return m;
}

BinaryMask label_mask(const LabelMask& lm, Label l) {
  BinaryMask m(lm.cols, lm.rows);
  for (std::size_t i = 0; i < lm.labels.size(); ++i) m.bits()[i] = lm.labels[i] == l;
  return m;
}

LabelMask label_mask_from_gray(const Gray8& g) {
  LabelMask lm(g.width, g.height, 1);
  for (std::size_t i = 0; i < g.pixels.size(); ++i) {
    const auto v = g.pixels[i];
    lm.labels[i] = v >= 192 ? Label::Reverse : (v >= 64 ? Label::Obverse : Label::Background);
  }
  return lm;
}

Gray8 label_mask_to_gray(const LabelMask& lm) {
  Gray8 g{lm.cols, lm.rows, std::vector<std::uint8_t>(lm.labels.size())};
  for (std::size_t i = 0; i < lm.labels.size(); ++i) {
    switch (lm.labels[i]) {
      case Label::Background: g.pixels[i] = 0; break;
      case Label::Obverse: g.pixels[i] = 128; break;
      case Label::Reverse: g.pixels[i] = 255; break;
    }
  }
  return g;
}

EmbeddingGrid extract(const Image& frame, int frame_index, const EmbeddingBackend& backend) {
  if (frame.empty()) throw Error(ErrorCode::BackendFailure, "empty frame");
  EmbeddingGrid g = backend.extract(frame, frame_index);
  const int s = backend.stride();
  if (g.cols != (frame.width() + s - 1) / s || g.rows != (frame.height() + s - 1) / s || g.dim != backend.dim() ||
      g.values.size() != g.cell_count() * static_cast<std::size_t>(g.dim))
    throw Error(ErrorCode::BackendFailure, std::string(backend.name()) + " produced a malformed grid");
  for (float v : g.values)
    if (!std::isfinite(v)) throw Error(ErrorCode::BackendFailure, std::string(backend.name()) + " produced non-finite values");
  return g;
}

// ---------------------------------------------------------------------------
// ExampleIndex

namespace {

constexpr int kLeafSize = 8;

double squared_distance(std::span<const float> a, const float* b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    acc += d * d;
  }
  return acc;
}

std::string entry_key(const float* v, int dim, Label l) {
  std::string key(sizeof(float) * dim + 1, '\0');
  std::memcpy(key.data(), v, sizeof(float) * dim);
  key.back() = static_cast<char>(l);
  return key;
}

}  // namespace

ExampleIndex::ExampleIndex(int dim, std::size_t capacity) : dim_(dim), capacity_(capacity) {
  if (dim <= 0) throw Error(ErrorCode::DimMismatch, "index dimension must be positive");
}

std::size_t ExampleIndex::count(Label l) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), l));
}

void ExampleIndex::insert_unique(std::size_t entry) {
  const float* v = vectors_.data() + entry * dim_;
  auto key = entry_key(v, dim_, labels_[entry]);
  auto [it, inserted] = unique_lookup_.try_emplace(std::move(key), static_cast<int>(unique_labels_.size()));
  if (inserted) {
    unique_vectors_.insert(unique_vectors_.end(), v, v + dim_);
    unique_labels_.push_back(labels_[entry]);
    unique_counts_.push_back(1);
  } else {
    ++unique_counts_[it->second];
  }
}

void ExampleIndex::rebuild_unique() {
  unique_lookup_.clear();
  unique_vectors_.clear();
  unique_labels_.clear();
  unique_counts_.clear();
  for (std::size_t i = 0; i < labels_.size(); ++i) insert_unique(i);
}

std::size_t ExampleIndex::add(std::span<const float> vectors, std::span<const Label> labels) {
  if (vectors.size() != labels.size() * static_cast<std::size_t>(dim_))
    throw Error(ErrorCode::DimMismatch, "example vectors do not match index dimension");
  if (labels.empty()) return size();
  for (float v : vectors)
    if (!std::isfinite(v)) throw Error(ErrorCode::DimMismatch, "non-finite example vector");
  const std::size_t first = size();
  vectors_.insert(vectors_.end(), vectors.begin(), vectors.end());
  labels_.insert(labels_.end(), labels.begin(), labels.end());

  if (size() > capacity_ && size() > init_size_) {
    const std::size_t excess = std::min(size() - capacity_, size() - init_size_);
    vectors_.erase(vectors_.begin() + static_cast<std::ptrdiff_t>(init_size_ * dim_),
                   vectors_.begin() + static_cast<std::ptrdiff_t>((init_size_ + excess) * dim_));
    labels_.erase(labels_.begin() + static_cast<std::ptrdiff_t>(init_size_),
                  labels_.begin() + static_cast<std::ptrdiff_t>(init_size_ + excess));
    rebuild_unique();
  } else {
    for (std::size_t i = first; i < size(); ++i) insert_unique(i);
  }
  rebuild_tree();
  return size();
}

void ExampleIndex::rebuild_tree() {
  nodes_.clear();
  order_.resize(unique_labels_.size());
  std::iota(order_.begin(), order_.end(), 0);
  if (!order_.empty()) build_node(0, static_cast<int>(order_.size()));
}

int ExampleIndex::build_node(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{begin, end, -1, -1, std::vector<float>(dim_, std::numeric_limits<float>::max()),
                        std::vector<float>(dim_, std::numeric_limits<float>::lowest())});
  {
    Node& n = nodes_[id];
    for (int i = begin; i < end; ++i) {
      const float* v = unique_vectors_.data() + static_cast<std::size_t>(order_[i]) * dim_;
      for (int d = 0; d < dim_; ++d) {
        n.lo[d] = std::min(n.lo[d], v[d]);
        n.hi[d] = std::max(n.hi[d], v[d]);
      }
    }
  }
  if (end - begin <= kLeafSize) return id;
  int split = 0;
  float widest = -1.0f;
  for (int d = 0; d < dim_; ++d) {
    const float w = nodes_[id].hi[d] - nodes_[id].lo[d];
    if (w > widest) widest = w, split = d;
  }
  if (widest <= 0.0f) return id;  // all identical
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
    return unique_vectors_[static_cast<std::size_t>(a) * dim_ + split] <
           unique_vectors_[static_cast<std::size_t>(b) * dim_ + split];
  });
  const int left = build_node(begin, mid);
  const int right = build_node(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

namespace {

struct Candidate {
  double d2;
  Label label;
  std::uint32_t count;
};

bool candidate_less(const Candidate& a, const Candidate& b) {
  return a.d2 < b.d2 || (a.d2 == b.d2 && a.label < b.label);
}

}  // namespace

std::vector<Neighbor> ExampleIndex::knn(std::span<const float> query, int k) const {
  if (query.size() != static_cast<std::size_t>(dim_)) throw Error(ErrorCode::DimMismatch, "query dimension mismatch");
  std::vector<Neighbor> out;
  if (nodes_.empty() || k <= 0) return out;

  std::vector<Candidate> best;
  std::size_t total = 0;
  const auto kk = static_cast<std::size_t>(k);
  auto bound = [&]() { return total >= kk ? best.back().d2 : std::numeric_limits<double>::infinity(); };

  auto box_distance = [&](const Node& n) {
    double acc = 0.0;
    for (int d = 0; d < dim_; ++d) {
      const double q = query[d];
      double diff = 0.0;
      if (q < n.lo[d]) diff = double(n.lo[d]) - q;
      else if (q > n.hi[d]) diff = q - double(n.hi[d]);
      acc += diff * diff;
    }
    return acc;
  };

  std::vector<std::pair<int, double>> stack{{0, box_distance(nodes_[0])}};
  while (!stack.empty()) {
    const auto [id, lower] = stack.back();
    stack.pop_back();
    if (lower > bound()) continue;
    const Node& n = nodes_[id];
    if (n.left < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        const int u = order_[i];
        const double d2 = squared_distance(query, unique_vectors_.data() + static_cast<std::size_t>(u) * dim_);
        if (d2 > bound()) continue;
        Candidate c{d2, unique_labels_[u], unique_counts_[u]};
        best.insert(std::upper_bound(best.begin(), best.end(), c, candidate_less), c);
        total += c.count;
        while (total - best.back().count >= kk) {
          total -= best.back().count;
          best.pop_back();
        }
      }
      continue;
    }
    const double dl = box_distance(nodes_[n.left]);
    const double dr = box_distance(nodes_[n.right]);
    // Push the farther child first so the nearer one is explored next.
    if (dl <= dr) {
      stack.emplace_back(n.right, dr);
      stack.emplace_back(n.left, dl);
    } else {
      stack.emplace_back(n.left, dl);
      stack.emplace_back(n.right, dr);
    }
  }

  for (const auto& c : best) {
    for (std::uint32_t i = 0; i < c.count && out.size() < kk; ++i) out.push_back({std::sqrt(c.d2), c.label});
  }
  return out;
}

void ExampleIndex::save(const std::filesystem::path& prefix) const {
  auto bin = prefix;
  bin += ".bin";
  auto hdr = prefix;
  hdr += ".json";
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + bin.string());
  out.write(reinterpret_cast<const char*>(vectors_.data()), static_cast<std::streamsize>(vectors_.size() * sizeof(float)));
  static_assert(sizeof(Label) == 1);
  out.write(reinterpret_cast<const char*>(labels_.data()), static_cast<std::streamsize>(labels_.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + bin.string());

  nlohmann::ordered_json j;
  j["format"] = "coin-example-index";
  j["version"] = 1;
  j["dim"] = dim_;
  j["count"] = size();
  j["initialization_count"] = init_size_;
  j["capacity"] = capacity_;
  j["dtype"] = "float32";
  j["byte_order"] = "little";
  j["layout"] = "count*dim row-major float32 vectors followed by count uint8 labels";
  j["labels"] = {{"background", 0}, {"obverse", 1}, {"reverse", 2}};
  std::ofstream h(hdr);
  if (!h) throw Error(ErrorCode::Io, "cannot write " + hdr.string());
  h << j.dump(2) << '\n';
}

ExampleIndex ExampleIndex::load(const std::filesystem::path& prefix) {
  auto bin = prefix;
  bin += ".bin";
  auto hdr = prefix;
  hdr += ".json";
  std::ifstream h(hdr);
  if (!h) throw Error(ErrorCode::Io, "cannot read " + hdr.string());
  nlohmann::json j;
  try {
    h >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, hdr.string() + ": " + e.what());
  }
  if (j.value("format", "") != "coin-example-index") throw Error(ErrorCode::Io, hdr.string() + ": not an index header");
  const int dim = j.at("dim").get<int>();
  const auto count = j.at("count").get<std::size_t>();
  ExampleIndex index(dim, j.value("capacity", std::size_t{1'000'000}));

  std::ifstream in(bin, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + bin.string());
  std::vector<float> vectors(count * dim);
  std::vector<Label> labels(count);
  in.read(reinterpret_cast<char*>(vectors.data()), static_cast<std::streamsize>(vectors.size() * sizeof(float)));
  in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
  if (!in) throw Error(ErrorCode::Io, bin.string() + ": truncated");
  for (auto l : labels)
    if (static_cast<int>(l) >= kLabelCount) throw Error(ErrorCode::Io, bin.string() + ": invalid label");

  const auto init = std::min(count, j.value("initialization_count", count));
  index.add(std::span(vectors).first(init * dim), std::span(labels).first(init));
  index.mark_initialized();
  index.add(std::span(vectors).subspan(init * dim), std::span(labels).subspan(init));
  return index;
}

// ---------------------------------------------------------------------------

LabelMask classify(const EmbeddingGrid& grid, const ExampleIndex& index, int k) {
  if (k <= 0) throw Error(ErrorCode::EmptyIndex, "k must be positive");
  if (index.size() < static_cast<std::size_t>(k))
    throw Error(ErrorCode::EmptyIndex, "index holds fewer than k examples");
  if (grid.dim != index.dim()) throw Error(ErrorCode::DimMismatch, "grid and index dimensions differ");

  LabelMask lm(grid.cols, grid.rows, grid.stride);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const auto nn = index.knn(grid.cell(c, r), k);
      std::array<int, kLabelCount> votes{};
      std::array<double, kLabelCount> dist{};
      for (const auto& n : nn) {
        ++votes[static_cast<int>(n.label)];
        dist[static_cast<int>(n.label)] += n.distance;
      }
      int winner = 0;
      for (int l = 1; l < kLabelCount; ++l) {
        if (votes[l] > votes[winner] || (votes[l] == votes[winner] && dist[l] < dist[winner])) winner = l;
      }
      const std::size_t i = static_cast<std::size_t>(r) * grid.cols + c;
      lm.labels[i] = static_cast<Label>(winner);
      lm.confidence[i] = static_cast<float>(votes[winner]) / static_cast<float>(k);
    }
  }
  return lm;
}

std::size_t add_examples(ExampleIndex& index, std::span<const float> vectors, std::span<const Label> labels) {
  return index.add(vectors, labels);
}

LabelMask upsample_labels(const LabelMask& lm, int width, int height) {
  LabelMask out(width, height, 1);
  for (int y = 0; y < height; ++y) {
    const int r = std::min(y / lm.stride, lm.rows - 1);
    for (int x = 0; x < width; ++x) {
      const int c = std::min(x / lm.stride, lm.cols - 1);
      const std::size_t src = static_cast<std::size_t>(r) * lm.cols + c;
      const std::size_t dst = static_cast<std::size_t>(y) * width + x;
      out.labels[dst] = lm.labels[src];
      out.confidence[dst] = lm.confidence[src];
    }
  }
  return out;
}

void populate_index(ExampleIndex& index, std::span<const LabeledGrid> frames, std::size_t cap_per_label,
                    RandomSource& rng) {
  struct Ref {
    const EmbeddingGrid* grid;
    std::size_t cell;
  };
  std::array<std::vector<Ref>, kLabelCount> per_label;
  for (const auto& f : frames) {
    const auto& g = *f.grid;
    const auto& lm = *f.labels;
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) {
        const Label l = lm.at(cell_center(c, g.stride, lm.cols), cell_center(r, g.stride, lm.rows));
        per_label[static_cast<int>(l)].push_back({&g, static_cast<std::size_t>(r) * g.cols + c});
      }
  }
  std::vector<float> vectors;
  std::vector<Label> labels;
  for (int l = 0; l < kLabelCount; ++l) {
    auto& refs = per_label[l];
    std::vector<Ref> chosen;
    if (refs.size() > cap_per_label) std::sample(refs.begin(), refs.end(), std::back_inserter(chosen), cap_per_label, rng.engine());
    else chosen = refs;
    for (const auto& ref : chosen) {
      const float* v = ref.grid->values.data() + ref.cell * ref.grid->dim;
      vectors.insert(vectors.end(), v, v + ref.grid->dim);
      labels.push_back(static_cast<Label>(l));
    }
  }
  index.add(vectors, labels);
}

}  // namespace coin
