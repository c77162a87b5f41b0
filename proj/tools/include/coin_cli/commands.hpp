#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace coin::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kDataError = 3, kInternal = 4 };

struct TrackOptions {
  std::filesystem::path sequence;  // one sequence, or a directory of them
  std::filesystem::path out;
  std::optional<std::filesystem::path> config;
  std::vector<std::pair<std::string, std::string>> overrides;  // dotted key, value
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

struct EvalOptions {
  std::filesystem::path results;
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> out_csv;
};

struct StatsOptions {
  std::filesystem::path dataset;
  std::filesystem::path out;
  double sigma = 0.8;
  int gap = 5;
  double hist_lo = 1.0;
  double hist_hi = 8.0;
  int bins = 32;
};

struct SynthOptions {
  std::filesystem::path spec;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
};

struct OverlayOptions {
  std::filesystem::path sequence;
  std::filesystem::path results;
  std::filesystem::path out;
  std::array<int, 3> tint{0, 200, 80};  // RGB
  double alpha = 0.5;
};

int cmd_track(const TrackOptions& opts, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err);
int cmd_stats(const StatsOptions& opts, std::ostream& out, std::ostream& err);
int cmd_synth(const SynthOptions& opts, std::ostream& out, std::ostream& err);
int cmd_overlay(const OverlayOptions& opts, std::ostream& out, std::ostream& err);
// Prints the effective configuration (defaults, file, overrides).
int cmd_config(const std::optional<std::filesystem::path>& config,
               const std::vector<std::pair<std::string, std::string>>& overrides, std::ostream& out, std::ostream& err);

// Blended overlay color for one channel, as written by cmd_overlay.
int tinted(int value, int tint, double alpha);

}  // namespace coin::cli
