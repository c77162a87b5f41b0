#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "coin/config.hpp"
#include "coin/dataset.hpp"
#include "coin/synth.hpp"
#include "coin_cli/commands.hpp"
#include "support/oracles.hpp"

namespace coin {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Run run(const std::string& args) {
  const auto dir = oracle::temp_dir("cli_run");
  const std::string cmd = std::string(COIN_EXECUTABLE) + " " + args + " > " + (dir / "out").string() + " 2> " +
                          (dir / "err").string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(dir / "out"), slurp(dir / "err")};
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

constexpr const char* kSmallScene = R"({
  "width": 160, "height": 120, "frames": 12, "seed": 3,
  "outline": {"type": "ellipse", "rx": 30, "ry": 26},
  "keyframes": [
    {"frame": 0, "rotation": [0, 0, 0], "translation": [-10, 0, 800]},
    {"frame": 11, "rotation": [0, 0.3, 0.2], "translation": [10, 4, 800]}
  ],
  "noise": 2.0
})";

fs::path write_text(const fs::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

fs::path synth_sequence(const std::string& name, const std::string& scene) {
  const auto dir = oracle::temp_dir(name);
  const auto spec = write_text(dir / "scene.json", scene);
  const auto r = run("synth " + q(spec) + " -o " + q(dir / "seq"));
  EXPECT_EQ(r.code, 0) << r.err;
  return dir / "seq";
}

TEST(CliSynth, WritesExpectedFrameCount) {
  const auto seq = synth_sequence("cli_synth", kSmallScene);
  std::size_t frames = 0;
  for (const auto& e : fs::directory_iterator(seq / "frames")) frames += e.path().extension() == ".png";
  EXPECT_EQ(frames, 12u);
  EXPECT_EQ(load_sequence(seq).ground_truth.size(), 3u);
  EXPECT_TRUE(fs::exists(seq / "gt_homographies.jsonl"));
}

TEST(CliSynth, MalformedSpecFails) {
  const auto dir = oracle::temp_dir("cli_synth_bad");
  const auto r = run("synth " + q(write_text(dir / "s.json", R"({"frames": "many"})")) + " -o " + q(dir / "o"));
  EXPECT_NE(r.code, 0);
  EXPECT_NE(run("synth " + q(dir / "missing.json") + " -o " + q(dir / "o")).code, 0);
}

TEST(CliTrack, OneRecordPerFrameAndByteDeterministic) {
  const auto seq = synth_sequence("cli_track", kSmallScene);
  const auto out = oracle::temp_dir("cli_track_out");
  const std::string common = " --set segmenter.backend='\"oracle\"' --seed 5";
  const auto a = run("track " + q(seq) + " -o " + q(out / "a") + common);
  const auto b = run("track " + q(seq) + " -o " + q(out / "b") + common);
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  const auto records = read_results(out / "a" / "results.jsonl");
  ASSERT_EQ(records.size(), 12u);
  for (int t = 0; t < 12; ++t) {
    EXPECT_EQ(records[t].frame, t);
    EXPECT_TRUE(fs::exists(out / "a" / records[t].mask_path));
  }
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(out / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), out / "a");
    EXPECT_EQ(slurp(e.path()), slurp(out / "b" / rel)) << rel;
    ++files;
  }
  EXPECT_EQ(files, 12u + 2u);
  // The effective configuration is stored next to the results.
  EXPECT_EQ(load_config(out / "a" / "config.toml").seed, 5u);
}

TEST(CliTrack, MissingInitNamesFile) {
  const auto seq = synth_sequence("cli_noinit", kSmallScene);
  fs::remove(seq / "init.json");
  const auto r = run("track " + q(seq) + " -o " + q(oracle::temp_dir("cli_noinit_out")));
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("init.json"), std::string::npos) << r.err;
}

TEST(CliTrack, ConfigErrorsAreUsageErrors) {
  const auto seq = synth_sequence("cli_badcfg", kSmallScene);
  const auto out = oracle::temp_dir("cli_badcfg_out");
  EXPECT_EQ(run("track " + q(seq) + " -o " + q(out) + " --set segmenter.kk=3").code, cli::kUsage);
  EXPECT_EQ(run("track " + q(seq) + " -o " + q(out) + " --set segmenter.k").code, cli::kUsage);
  EXPECT_EQ(run("track " + q(seq) + " -o " + q(out) + " -c " + q(out / "nope.toml")).code, cli::kDataError);
  EXPECT_EQ(run("").code, cli::kUsage);
  EXPECT_EQ(run("frobnicate").code, cli::kUsage);
}

// Results directory whose masks are the ground truth, with the listed frames
// marked lost (and empty).
fs::path fake_results(const fs::path& seq_dir, const std::string& name, const std::set<int>& lost) {
  const DiskSequence seq(seq_dir);
  const auto dir = oracle::temp_dir(name);
  fs::create_directories(dir / "masks");
  std::vector<FrameRecord> recs;
  const auto annotated = seq.annotated_frames();
  const LabelMask blank(160, 120, 1);
  for (int t = 0; t < seq.frame_count(); ++t) {
    FrameRecord r;
    r.frame = t;
    r.mode = lost.count(t) ? TrackingMode::Lost : TrackingMode::Tracking;
    if (r.mode == TrackingMode::Tracking) r.homography = Homography();
    r.mask_path = "masks/" + frame_name(t);
    const bool has_gt = std::find(annotated.begin(), annotated.end(), t) != annotated.end();
    const LabelMask m = r.mode == TrackingMode::Tracking && has_gt ? seq.ground_truth(t) : blank;
    write_gray8(dir / r.mask_path, label_mask_to_gray(m));
    recs.push_back(r);
  }
  write_results(dir / "results.jsonl", recs);
  return dir;
}

std::vector<std::string> csv_row(const std::string& csv, const std::string& first) {
  std::istringstream in(csv);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind(first + ",", 0) != 0) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    return cells;
  }
  return {};
}

TEST(CliEval, PerfectResults) {
  const auto seq = synth_sequence("cli_eval_perfect", kSmallScene);
  const auto res = fake_results(seq, "cli_eval_perfect_res", {});
  const auto r = run("eval " + q(res) + " " + q(seq));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto row = csv_row(r.out, "seq");
  ASSERT_EQ(row.size(), 7u) << r.out;
  EXPECT_EQ(std::stod(row[1]), 1.0);
  EXPECT_EQ(row[2], "3");
  EXPECT_EQ(std::stod(row[3]), 1.0);
  EXPECT_EQ(row[5], "100.000000");
}

TEST(CliEval, InjectedLostFractionIsExact) {
  const auto seq = synth_sequence("cli_eval_half", kSmallScene);
  // Half of the 12 frames lost, including annotated frame 5.
  const auto res = fake_results(seq, "cli_eval_half_res", {1, 3, 5, 7, 9, 11});
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_eval({res, seq, std::nullopt}, out, err), 0) << err.str();
  const auto row = csv_row(out.str(), "seq");
  ASSERT_EQ(row.size(), 7u);
  EXPECT_EQ(row[5], "50.000000");
  EXPECT_EQ(row[6], "12");
  // Frame 5 has an empty prediction: (1 + 0 + 1) / 3 overall, 1.0 over the two tracked GT frames.
  EXPECT_NEAR(std::stod(row[1]), 2.0 / 3.0, 1e-6);
  EXPECT_EQ(std::stod(row[3]), 1.0);
  EXPECT_EQ(row[4], "2");
}

TEST(CliEval, CoverageErrors) {
  const auto seq = synth_sequence("cli_eval_err", kSmallScene);
  const auto empty = oracle::temp_dir("cli_eval_empty");
  EXPECT_NE(run("eval " + q(empty) + " " + q(seq)).code, 0);
  EXPECT_NE(run("eval " + q(empty / "nope") + " " + q(seq)).code, 0);
  // A results file missing an annotated frame.
  const auto res = fake_results(seq, "cli_eval_gap", {});
  auto recs = read_results(res / "results.jsonl");
  recs.erase(recs.begin() + 10);
  write_results(res / "results.jsonl", recs);
  EXPECT_EQ(run("eval " + q(res) + " " + q(seq)).code, cli::kDataError);
}

std::vector<std::size_t> histogram_counts(const fs::path& csv, const std::string& kind) {
  std::vector<std::size_t> counts;
  std::istringstream in(slurp(csv));
  for (std::string line; std::getline(in, line);)
    if (line.rfind(kind + ",", 0) == 0) counts.push_back(std::stoul(line.substr(line.rfind(',') + 1)));
  return counts;
}

TEST(CliStats, StaticSequenceFillsFirstBin) {
  const auto seq = synth_sequence("cli_stats_static", R"({
    "width": 160, "height": 120, "frames": 30, "seed": 1,
    "outline": {"type": "ellipse", "rx": 40, "ry": 25},
    "keyframes": [{"frame": 0, "rotation": [0, 0, 0.3], "translation": [0, 0, 800]}]
  })");
  const auto out = oracle::temp_dir("cli_stats_static_out");
  const auto r = run("stats " + q(seq) + " -o " + q(out));
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* kind : {"vs_first", "speed"}) {
    const auto counts = histogram_counts(out / "histograms.csv", kind);
    ASSERT_EQ(counts.size(), 32u);
    EXPECT_GT(counts[0], 0u);
    for (std::size_t b = 1; b < counts.size(); ++b) EXPECT_EQ(counts[b], 0u) << kind << " bin " << b;
  }
  EXPECT_TRUE(fs::exists(out / "hist_vs_first.png"));
  EXPECT_TRUE(fs::exists(out / "textureness.csv"));
}

TEST(CliStats, ConstantTextureIsZero) {
  const auto seq = synth_sequence("cli_stats_flat", R"({
    "width": 120, "height": 100, "frames": 6, "seed": 1,
    "outline": {"type": "ellipse", "rx": 30},
    "obverse": {"mean": [100, 100, 100], "contrast": 0},
    "reverse": {"mean": [100, 100, 100], "contrast": 0},
    "background": {"mean": [100, 100, 100], "contrast": 0},
    "keyframes": [{"frame": 0}, {"frame": 5, "translation": [10, 0, 800]}]
  })");
  const auto out = oracle::temp_dir("cli_stats_flat_out");
  ASSERT_EQ(run("stats " + q(seq) + " -o " + q(out)).code, 0);
  std::istringstream in(slurp(out / "textureness.csv"));
  std::string line;
  std::getline(in, line);
  int rows = 0;
  for (; std::getline(in, line); ++rows) EXPECT_LT(std::abs(std::stod(line.substr(line.rfind(',') + 1))), 1e-6);
  EXPECT_EQ(rows, 2);
}

TEST(CliStats, RotationMassMatchesGeometry) {
  // Circle tilted to 1.2 rad: apparent aspect ratio 1 / cos(1.2) at the end.
  const auto seq = synth_sequence("cli_stats_rot", R"({
    "width": 240, "height": 200, "frames": 31, "seed": 1,
    "outline": {"type": "ellipse", "rx": 70},
    "keyframes": [{"frame": 0}, {"frame": 30, "rotation": [0, 1.2, 0]}]
  })");
  const auto out = oracle::temp_dir("cli_stats_rot_out");
  ASSERT_EQ(run("stats " + q(seq) + " -o " + q(out)).code, 0);
  const auto counts = histogram_counts(out / "histograms.csv", "vs_first");
  std::size_t beyond_first = 0, total = 0;
  for (std::size_t b = 0; b < counts.size(); ++b) total += counts[b], beyond_first += b > 0 ? counts[b] : 0;
  EXPECT_EQ(total, 6u);
  EXPECT_GT(beyond_first, 0u);
  // Last vs-first value against the analytic ratio.
  std::istringstream in(slurp(out / "ar_change.csv"));
  double last = 0.0;
  for (std::string line; std::getline(in, line);)
    if (line.find(",vs_first,") != std::string::npos) last = std::stod(line.substr(line.rfind(',') + 1));
  const double expected = 1.0 / std::cos(1.2);
  EXPECT_NEAR(last, expected, 0.1 * expected);
  // It sits in the bin the default log-spaced edges assign to the analytic value.
  const int bin = int(std::floor(std::log(expected) / (std::log(8.0) / 32.0)));
  EXPECT_GT(counts[bin] + counts[bin - 1] + counts[bin + 1], 0u);
}

TEST(CliStats, LayoutErrorsFail) {
  EXPECT_NE(run("stats " + q(oracle::temp_dir("cli_stats_none")) + " -o " + q(oracle::temp_dir("x"))).code, 0);
}

TEST(CliOverlay, ZeroFrameResultsFail) {
  const auto seq = synth_sequence("cli_ov_zero", kSmallScene);
  const auto res = oracle::temp_dir("cli_ov_zero_res");
  write_results(res / "results.jsonl", {});
  EXPECT_NE(run("overlay " + q(seq) + " " + q(res) + " -o " + q(oracle::temp_dir("cli_ov_zero_out"))).code, 0);
}

TEST(CliOverlay, InteriorPixelCarriesTint) {
  const auto seq = synth_sequence("cli_ov_tint", kSmallScene);
  const auto res = fake_results(seq, "cli_ov_tint_res", {});
  const auto out = oracle::temp_dir("cli_ov_tint_out");
  const auto r = run("overlay " + q(seq) + " " + q(res) + " -o " + q(out) + " --tint 250 10 40 --alpha 0.6");
  ASSERT_EQ(r.code, 0) << r.err;
  const Image frame = read_image(seq / "frames" / frame_name(5));
  const Image drawn = read_image(out / frame_name(5));
  const BinaryMask m = object_mask(DiskSequence(seq).ground_truth(5));
  // A pixel deep inside the mask, below the banner.
  const auto box = *m.bounding_box();
  const int x = int(box.center().x), y = int(box.center().y);
  ASSERT_TRUE(m(x, y) && m(x - 2, y) && m(x + 2, y) && m(x, y - 2) && m(x, y + 2));
  const std::array<int, 3> tint{250, 10, 40};
  for (int c = 0; c < 3; ++c) EXPECT_EQ(int(drawn.at(x, y, c)), cli::tinted(int(frame.at(x, y, c)), tint[c], 0.6));
  // Outside the mask and the banner the frame is untouched.
  EXPECT_EQ(drawn.at(2, 110, 0), frame.at(2, 110, 0));
}

TEST(CliConfig, DumpRoundTrips) {
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_config(std::nullopt, {{"segmenter.k", "9"}, {"seed", "4"}}, out, err), 0);
  const auto c = parse_config(out.str());
  EXPECT_EQ(c.segmenter.k, 9);
  EXPECT_EQ(c.seed, 4u);
  const auto dir = oracle::temp_dir("cli_config");
  write_text(dir / "c.toml", out.str());
  const auto r = run("config -c " + q(dir / "c.toml"));
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, out.str());
}

}  // namespace
}  // namespace coin
