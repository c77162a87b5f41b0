#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coin/adaptation.hpp"
#include "coin/geometry.hpp"
#include "coin/image.hpp"
#include "coin/scoring.hpp"
#include "coin/segmenter.hpp"

namespace coin {

// init.json. A missing reverse frame means the reverse side is never shown.
struct InitSpec {
  int obverse_frame = 0;
  std::optional<int> reverse_frame;
};

// On-disk sequence:
//   frames/%06d.png|jpg   contiguous from 0
//   gt/%06d.png           sparse label masks (0 bg, 128 obverse, 255 reverse)
//   init.json             {"obverse_frame": i, "reverse_frame": j}
struct SequenceRecord {
  std::filesystem::path dir;
  std::vector<std::filesystem::path> frames;
  std::map<int, std::filesystem::path> ground_truth;
  InitSpec init;

  int frame_count() const { return static_cast<int>(frames.size()); }
};

SequenceRecord load_sequence(const std::filesystem::path& dir);
InitSpec read_init(const std::filesystem::path& path);
void write_init(const std::filesystem::path& path, const InitSpec& init);

// Frame access used by the tracker; lets tests feed in-memory sequences.
class SequenceSource {
public:
  virtual ~SequenceSource() = default;
  virtual int frame_count() const = 0;
  virtual Image frame(int t) const = 0;
  virtual std::vector<int> annotated_frames() const = 0;
  // Full-resolution labels; only valid for annotated frames.
  virtual LabelMask ground_truth(int t) const = 0;
  virtual InitSpec init() const = 0;
};

class DiskSequence final : public SequenceSource {
public:
  explicit DiskSequence(SequenceRecord record) : record_(std::move(record)) {}
  explicit DiskSequence(const std::filesystem::path& dir) : record_(load_sequence(dir)) {}

  int frame_count() const override { return record_.frame_count(); }
  Image frame(int t) const override;
  std::vector<int> annotated_frames() const override;
  LabelMask ground_truth(int t) const override;
  InitSpec init() const override { return record_.init; }

  const SequenceRecord& record() const { return record_; }

private:
  SequenceRecord record_;
};

// One line of the tracker's JSON-lines output.
struct FrameRecord {
  int frame = 0;
  TrackingMode mode = TrackingMode::Lost;
  Label side = Label::Obverse;
  ScoreBreakdown score;
  std::optional<Homography> homography;
  std::size_t adaptation_bg = 0;
  std::size_t adaptation_obj = 0;
  std::string mask_path;  // relative to the results directory

  bool operator==(const FrameRecord&) const = default;
};

std::string to_json_line(const FrameRecord& r);
FrameRecord frame_record_from_json(const std::string& line);

void write_results(const std::filesystem::path& path, const std::vector<FrameRecord>& records);
std::vector<FrameRecord> read_results(const std::filesystem::path& path);

std::string frame_name(int t, const char* ext = ".png");

}  // namespace coin
