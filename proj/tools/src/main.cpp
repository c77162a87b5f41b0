#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coin_cli/commands.hpp"

namespace fs = std::filesystem;
using namespace coin::cli;

namespace {

std::vector<std::pair<std::string, std::string>> split_overrides(const std::vector<std::string>& items) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : items) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value, got '" + s + "'");
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coin: two-sided planar object tracker and evaluation tools"};
  app.require_subcommand(1);
  std::string root = ".";
  app.add_option("--root", root, "Base directory for relative paths");

  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : fs::path(root) / p; };

  std::string seq, out_dir, config, results, dataset, spec, csv_out;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  int jobs = 1;

  auto* track = app.add_subcommand("track", "Track one sequence or a directory of sequences");
  track->add_option("sequence", seq, "Sequence directory")->required();
  track->add_option("-o,--out", out_dir, "Output directory")->required();
  track->add_option("-c,--config", config, "Configuration file");
  track->add_option("--set", sets, "Override a configuration key (key=value)");
  track->add_option("--seed", seed, "Random seed");
  track->add_option("-j,--jobs", jobs, "Sequences tracked in parallel")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "IoU tables for tracker results");
  eval->add_option("results", results, "Results directory")->required();
  eval->add_option("dataset", dataset, "Dataset or sequence directory")->required();
  eval->add_option("-o,--out", csv_out, "Also write the CSV here");

  StatsOptions stats_opts;
  auto* stats = app.add_subcommand("stats", "Textureness and aspect-ratio statistics");
  stats->add_option("dataset", dataset, "Dataset or sequence directory")->required();
  stats->add_option("-o,--out", out_dir, "Output directory")->required();
  stats->add_option("--sigma", stats_opts.sigma, "LoG sigma");
  stats->add_option("--gap", stats_opts.gap, "Frame gap for the speed statistic");
  stats->add_option("--bins", stats_opts.bins, "Histogram bins")->check(CLI::PositiveNumber);
  stats->add_option("--hist-lo", stats_opts.hist_lo, "Lowest histogram edge");
  stats->add_option("--hist-hi", stats_opts.hist_hi, "Highest histogram edge");

  auto* synth = app.add_subcommand("synth", "Render a synthetic sequence from a scene file");
  synth->add_option("spec", spec, "Scene JSON")->required();
  synth->add_option("-o,--out", out_dir, "Output sequence directory")->required();
  synth->add_option("--seed", seed, "Override the scene seed");

  OverlayOptions overlay_opts;
  auto* overlay = app.add_subcommand("overlay", "Render results over the frames");
  overlay->add_option("sequence", seq, "Sequence directory")->required();
  overlay->add_option("results", results, "Results directory")->required();
  overlay->add_option("-o,--out", out_dir, "Output directory")->required();
  overlay->add_option("--tint", overlay_opts.tint, "Mask tint as R G B");
  overlay->add_option("--alpha", overlay_opts.alpha, "Tint opacity");

  auto* cfg = app.add_subcommand("config", "Print the effective configuration");
  cfg->add_option("-c,--config", config, "Configuration file");
  cfg->add_option("--set", sets, "Override a configuration key (key=value)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    const auto overrides = split_overrides(sets);
    const std::optional<fs::path> config_path = config.empty() ? std::nullopt : std::optional(resolve(config));
    if (*track) {
      return cmd_track({resolve(seq), resolve(out_dir), config_path, overrides, seed, jobs}, std::cout, std::cerr);
    }
    if (*eval) {
      return cmd_eval({resolve(results), resolve(dataset),
                       csv_out.empty() ? std::nullopt : std::optional(resolve(csv_out))},
                      std::cout, std::cerr);
    }
    if (*stats) {
      stats_opts.dataset = resolve(dataset);
      stats_opts.out = resolve(out_dir);
      return cmd_stats(stats_opts, std::cout, std::cerr);
    }
    if (*synth) return cmd_synth({resolve(spec), resolve(out_dir), seed}, std::cout, std::cerr);
    if (*overlay) {
      overlay_opts.sequence = resolve(seq);
      overlay_opts.results = resolve(results);
      overlay_opts.out = resolve(out_dir);
      return cmd_overlay(overlay_opts, std::cout, std::cerr);
    }
    if (*cfg) return cmd_config(config_path, overrides, std::cout, std::cerr);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
