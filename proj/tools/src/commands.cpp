#include "coin_cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "coin/config.hpp"
#include "coin/dataset.hpp"
#include "coin/errors.hpp"
#include "coin/evalkit.hpp"
#include "coin/synth.hpp"
#include "coin/tracker.hpp"

namespace coin::cli {

namespace fs = std::filesystem;

namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config: return kUsage;
    case ErrorCode::Io:
    case ErrorCode::MissingFrame:
    case ErrorCode::InvalidTemplate:
    case ErrorCode::DegenerateTrajectory:
    case ErrorCode::InsufficientData:
    case ErrorCode::EmptyMask:
    case ErrorCode::BackendFailure:
    case ErrorCode::DimensionMismatch:
      return kDataError;
    default: return kInternal;
  }
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}

struct NamedSequence {
  std::string name;
  fs::path dir;
};

// A sequence directory, or a directory whose subdirectories are sequences.
std::vector<NamedSequence> find_sequences(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "not a directory: " + dir.string());
  if (fs::exists(dir / "init.json") || fs::exists(dir / "frames")) return {{dir.filename().string(), dir}};
  std::vector<NamedSequence> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && (fs::exists(e.path() / "init.json") || fs::exists(e.path() / "frames")))
      out.push_back({e.path().filename().string(), e.path()});
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  if (out.empty()) throw Error(ErrorCode::Io, "no sequences under " + dir.string());
  return out;
}

TrackerConfig effective_config(const std::optional<fs::path>& path,
                               const std::vector<std::pair<std::string, std::string>>& overrides,
                               std::optional<std::uint64_t> seed = std::nullopt) {
  TrackerConfig config = path ? load_config(*path) : TrackerConfig{};
  for (const auto& [k, v] : overrides) set_config_value(config, k, v);
  if (seed) config.seed = *seed;
  validate(config);
  return config;
}

struct TrackSummary {
  std::size_t frames = 0;
  std::size_t tracking = 0;
};

TrackSummary track_one(const fs::path& seq_dir, const fs::path& out_dir, const TrackerConfig& config) {
  const DiskSequence seq(seq_dir);
  const auto backend = make_backend(config, seq_dir);
  const auto flow = make_flow_provider(config, seq_dir);
  fs::create_directories(out_dir / "masks");
  std::ofstream jsonl(out_dir / "results.jsonl", std::ios::binary);
  if (!jsonl) throw Error(ErrorCode::Io, "cannot write " + (out_dir / "results.jsonl").string());
  TrackSummary summary;
  run_sequence(seq, config, backend, flow.get(), [&](const FrameResult& r) {
    FrameRecord rec;
    rec.frame = r.frame;
    rec.mode = r.mode;
    rec.side = r.side;
    rec.score = r.breakdown;
    rec.homography = r.pose;
    rec.adaptation_bg = r.adaptation.n_bg_added;
    rec.adaptation_obj = r.adaptation.n_obj_added;
    rec.mask_path = "masks/" + frame_name(r.frame);
    write_gray8(out_dir / rec.mask_path, label_mask_to_gray(r.mask));
    jsonl << to_json_line(rec) << "\n";
    ++summary.frames;
    summary.tracking += r.mode == TrackingMode::Tracking;
  });
  jsonl.close();
  std::ofstream(out_dir / "config.toml", std::ios::binary) << dump_config(config);
  return summary;
}

std::string pct(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", 100.0 * fraction);
  return buf;
}

bool boundary(const BinaryMask& m, int x, int y) {
  if (!m(x, y)) return false;
  return x == 0 || y == 0 || x == m.width() - 1 || y == m.height() - 1 || !m(x - 1, y) || !m(x + 1, y) ||
         !m(x, y - 1) || !m(x, y + 1);
}

}  // namespace

int tinted(int value, int tint, double alpha) {
  return static_cast<int>(std::clamp(std::lround((1.0 - alpha) * value + alpha * tint), 0L, 255L));
}

int cmd_track(const TrackOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const TrackerConfig config = effective_config(opts.config, opts.overrides, opts.seed);
    const auto sequences = find_sequences(opts.sequence);
    const bool single = sequences.size() == 1 && sequences.front().dir == opts.sequence;
    std::vector<TrackSummary> summaries(sequences.size());
    std::vector<std::string> failures(sequences.size());
    std::vector<int> codes(sequences.size(), kOk);

    std::size_t next = 0;
    std::mutex mu;
    auto worker = [&] {
      for (;;) {
        std::size_t i;
        {
          std::lock_guard lock(mu);
          if (next >= sequences.size()) return;
          i = next++;
        }
        std::ostringstream diag;
        codes[i] = guarded(diag, [&] {
          summaries[i] = track_one(sequences[i].dir, single ? opts.out : opts.out / sequences[i].name, config);
          return int(kOk);
        });
        failures[i] = diag.str();
      }
    };
    const int jobs = std::max(1, std::min<int>(opts.jobs, static_cast<int>(sequences.size())));
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    int code = kOk;
    for (std::size_t i = 0; i < sequences.size(); ++i) {
      if (codes[i] != kOk) {
        err << sequences[i].name << ": " << failures[i];
        code = std::max(code, codes[i]);
        continue;
      }
      const auto& s = summaries[i];
      out << sequences[i].name << ": " << s.frames << " frames, "
          << pct(s.frames ? double(s.tracking) / double(s.frames) : 0.0) << "% tracking\n";
    }
    return code;
  });
}

int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!fs::is_directory(opts.results)) throw Error(ErrorCode::Io, "no results directory " + opts.results.string());
    const auto sequences = find_sequences(opts.dataset);
    const bool single = sequences.size() == 1 && sequences.front().dir == opts.dataset;
    std::ostringstream csv;
    csv << "sequence,mean_iou,gt_frames,tracking_iou,tracking_gt_frames,tracking_pct,frames\n";
    double sum_iou = 0.0, sum_tiou = 0.0, sum_pct = 0.0;
    int n_iou = 0, n_tiou = 0;
    for (const auto& s : sequences) {
      const fs::path rdir = single ? opts.results : opts.results / s.name;
      if (!fs::exists(rdir / "results.jsonl")) throw Error(ErrorCode::MissingFrame, "no results for " + s.name);
      const EvaluationRow row = evaluate_sequence(s.name, rdir, load_sequence(s.dir));
      csv << row.sequence << "," << format_optional(row.mean_iou) << "," << row.gt_frames << ","
          << format_optional(row.tracking_iou) << "," << row.tracking_gt_frames << "," << pct(row.tracking_fraction)
          << "," << row.frames << "\n";
      if (row.mean_iou) sum_iou += *row.mean_iou, ++n_iou;
      if (row.tracking_iou) sum_tiou += *row.tracking_iou, ++n_tiou;
      sum_pct += row.tracking_fraction;
    }
    auto avg = [](double s, int n) { return n ? std::optional<double>(s / n) : std::nullopt; };
    csv << "mean," << format_optional(avg(sum_iou, n_iou)) << ",," << format_optional(avg(sum_tiou, n_tiou)) << ",,"
        << pct(sum_pct / double(sequences.size())) << ",\n";
    out << csv.str();
    if (opts.out_csv) {
      std::ofstream f(*opts.out_csv, std::ios::binary);
      if (!f) throw Error(ErrorCode::Io, "cannot write " + opts.out_csv->string());
      f << csv.str();
    }
    return int(kOk);
  });
}

int cmd_stats(const StatsOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto sequences = find_sequences(opts.dataset);
    fs::create_directories(opts.out);
    std::ofstream tex(opts.out / "textureness.csv", std::ios::binary);
    std::ofstream arc(opts.out / "ar_change.csv", std::ios::binary);
    tex << "sequence,frame,textureness\n";
    arc << "sequence,kind,index,value\n";
    std::vector<double> all_first, all_speed;
    char buf[64];
    for (const auto& s : sequences) {
      const DiskSequence seq(s.dir);
      std::map<int, BinaryMask> gt;
      for (int t : seq.annotated_frames()) gt[t] = object_mask(seq.ground_truth(t));
      for (const auto& [t, m] : gt) {
        if (!m.any()) continue;
        std::snprintf(buf, sizeof(buf), "%.8f", textureness(seq.frame(t), m, opts.sigma));
        tex << s.name << "," << t << "," << buf << "\n";
      }
      std::vector<double> first;
      try {
        first = ar_change_vs_first(gt);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::InsufficientData) throw;
        err << s.name << ": " << e.what() << "\n";
      }
      const auto speed = ar_change_speed(gt, opts.gap);
      for (std::size_t i = 0; i < first.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.8f", first[i]);
        arc << s.name << ",vs_first," << i << "," << buf << "\n";
      }
      for (std::size_t i = 0; i < speed.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.8f", speed[i]);
        arc << s.name << ",speed," << i << "," << buf << "\n";
      }
      all_first.insert(all_first.end(), first.begin(), first.end());
      all_speed.insert(all_speed.end(), speed.begin(), speed.end());
    }
    const Histogram h_first = make_histogram(all_first, opts.hist_lo, opts.hist_hi, opts.bins);
    const Histogram h_speed = make_histogram(all_speed, opts.hist_lo, opts.hist_hi, opts.bins);
    std::ofstream hist(opts.out / "histograms.csv", std::ios::binary);
    hist << "kind,bin,lo,hi,count\n";
    for (const auto& [kind, h] : {std::pair{"vs_first", &h_first}, std::pair{"speed", &h_speed}})
      for (std::size_t b = 0; b < h->counts.size(); ++b) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f", h->edges[b], h->edges[b + 1]);
        hist << kind << "," << b << "," << buf << "," << h->counts[b] << "\n";
      }
    write_histogram_png(opts.out / "hist_vs_first.png", h_first);
    write_histogram_png(opts.out / "hist_speed.png", h_speed);
    out << sequences.size() << " sequences, " << all_first.size() << " vs-first and " << all_speed.size()
        << " speed measurements\n";
    return int(kOk);
  });
}

int cmd_synth(const SynthOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    SceneSpec spec = load_scene(opts.spec);
    if (opts.seed) spec.seed = *opts.seed;
    const GeneratedSequence g = generate(spec, opts.out);
    out << spec.frames << " frames, " << g.annotated.size() << " annotated, obverse init " << g.init.obverse_frame
        << ", reverse init " << (g.init.reverse_frame ? std::to_string(*g.init.reverse_frame) : "none") << ", "
        << g.edge_on_frames.size() << " edge-on\n";
    return int(kOk);
  });
}

int cmd_overlay(const OverlayOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!(opts.alpha >= 0.0 && opts.alpha <= 1.0)) throw Error(ErrorCode::Config, "alpha must be in [0, 1]");
    const auto records = read_results(opts.results / "results.jsonl");
    if (records.empty()) throw Error(ErrorCode::MissingFrame, "no result records to draw");
    const SequenceRecord seq = load_sequence(opts.sequence);
    const BinaryMask obverse_tmpl = object_mask(label_mask_from_gray(read_gray8(seq.ground_truth.at(seq.init.obverse_frame))));
    std::optional<BinaryMask> reverse_tmpl;
    if (seq.init.reverse_frame)
      reverse_tmpl = object_mask(label_mask_from_gray(read_gray8(seq.ground_truth.at(*seq.init.reverse_frame))));
    fs::create_directories(opts.out);

    for (const auto& r : records) {
      if (r.frame < 0 || r.frame >= seq.frame_count())
        throw Error(ErrorCode::MissingFrame, "result for nonexistent frame " + std::to_string(r.frame));
      cv::Mat img = cv::imread(seq.frames[r.frame].string(), cv::IMREAD_COLOR);
      if (img.empty()) throw Error(ErrorCode::Io, "cannot read " + seq.frames[r.frame].string());
      const BinaryMask mask = object_mask(label_mask_from_gray(read_gray8(opts.results / r.mask_path)));
      if (mask.width() != img.cols || mask.height() != img.rows)
        throw Error(ErrorCode::DimensionMismatch, "mask size differs from frame " + std::to_string(r.frame));
      for (int y = 0; y < img.rows; ++y)
        for (int x = 0; x < img.cols; ++x) {
          auto& px = img.at<cv::Vec3b>(y, x);
          if (boundary(mask, x, y)) {
            px = cv::Vec3b(255, 255, 255);
          } else if (mask(x, y)) {
            for (int c = 0; c < 3; ++c) px[c] = static_cast<uchar>(tinted(px[c], opts.tint[2 - c], opts.alpha));
          }
        }
      const BinaryMask* tmpl = r.side == Label::Reverse ? (reverse_tmpl ? &*reverse_tmpl : nullptr) : &obverse_tmpl;
      if (r.homography && tmpl) {
        const BinaryMask warped = warp_mask(*r.homography, *tmpl, img.cols, img.rows);
        for (int y = 0; y < img.rows; ++y)
          for (int x = 0; x < img.cols; ++x)
            if (boundary(warped, x, y)) img.at<cv::Vec3b>(y, x) = cv::Vec3b(60, 60, 255);
      }
      const int banner = std::min(img.rows, 20);
      img.rowRange(0, banner) *= 0.3;
      char text[128];
      std::snprintf(text, sizeof(text), "%06d  %s  %s  score %.3f", r.frame, std::string(to_string(r.mode)).c_str(),
                    std::string(to_string(r.side)).c_str(), r.score.total);
      const cv::Scalar color = r.mode == TrackingMode::Tracking ? cv::Scalar(120, 255, 120) : cv::Scalar(80, 80, 255);
      cv::putText(img, text, {4, banner - 6}, cv::FONT_HERSHEY_SIMPLEX, 0.45, color, 1, cv::LINE_8);
      const fs::path dst = opts.out / frame_name(r.frame);
      if (!cv::imwrite(dst.string(), img)) throw Error(ErrorCode::Io, "cannot write " + dst.string());
    }
    out << records.size() << " overlays written\n";
    return int(kOk);
  });
}

int cmd_config(const std::optional<fs::path>& config, const std::vector<std::pair<std::string, std::string>>& overrides,
               std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    out << dump_config(effective_config(config, overrides));
    return int(kOk);
  });
}

}  // namespace coin::cli
