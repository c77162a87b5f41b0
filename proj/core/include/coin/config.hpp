#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace coin {

// Every tunable of the pipeline. Loaded from a TOML-style file:
//
//   seed = 7
//   [optimizer]
//   iterations = 350
//
// Dotted keys ("optimizer.iterations = 350") are accepted as well.
struct TrackerConfig {
  std::uint64_t seed = 0;

  struct Segmenter {
    std::string backend = "reference";  // "reference" | "oracle"
    int k = 5;
    int stride = 4;
    std::size_t cap_per_label = 20000;
    std::size_t index_capacity = 1'000'000;
    bool use_xy = false;

    bool operator==(const Segmenter&) const = default;
  } segmenter;

  struct Optimizer {
    int init_samples = 50;
    int iterations = 350;
    double t0 = 0.01;
    double t_decay = 0.99;
    double sigma0_fraction = 0.05;
    double sigma_decay = 0.99;
    int redetect_samples = 400;
    std::string flow = "builtin";  // "builtin" | "files" | "none"
    int flow_radius = 32;

    bool operator==(const Optimizer&) const = default;
  } optimizer;

  struct Scoring {
    std::size_t min_appearance_pixels = 16;

    bool operator==(const Scoring&) const = default;
  } scoring;

  struct Tracking {
    double lost_threshold = 0.30;
    double redetect_threshold = 0.45;
    bool strict_causal = false;
    // Tracked frames scoring below redetect_threshold also try a global search.
    bool refresh_low_confidence = true;

    bool operator==(const Tracking&) const = default;
  } tracker;

  struct Adaptation {
    bool enabled = true;
    double min_boundary_distance = 20.0;
    // Tracked frames scoring below this are not trusted to gate examples.
    double min_score = 0.45;

    bool operator==(const Adaptation&) const = default;
  } adaptation;

  // Corruption applied by the oracle backend; see synth.hpp.
  struct Oracle {
    std::string fp_blobs;  // "x,y,r[,first,last];..."
    std::size_t hole_pixels = 0;
    int erosion = 0;

    bool operator==(const Oracle&) const = default;
  } oracle;

  bool operator==(const TrackerConfig&) const = default;
};

TrackerConfig parse_config(std::string_view text);
TrackerConfig load_config(const std::filesystem::path& path);
std::string dump_config(const TrackerConfig& config);

// Sets one dotted key from its textual value (CLI overrides).
void set_config_value(TrackerConfig& config, std::string_view key, std::string_view value);
std::vector<std::string> config_keys();

// Range checks across fields; throws Error(Config).
void validate(const TrackerConfig& config);

}  // namespace coin
