#include "coin/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <regex>

#include <nlohmann/json.hpp>

#include "coin/errors.hpp"

namespace coin {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string frame_name(int t, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d%s", t, ext);
  return buf;
}

namespace {

// Files named NNNNNN.<ext> in dir, keyed by number.
std::map<int, fs::path> numbered_files(const fs::path& dir, const std::vector<std::string>& exts) {
  std::map<int, fs::path> out;
  if (!fs::is_directory(dir)) return out;
  static const std::regex pattern(R"((\d{6})\.(\w+))");
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (!std::regex_match(name, m, pattern)) continue;
    if (std::find(exts.begin(), exts.end(), m[2].str()) == exts.end()) continue;
    const int t = std::stoi(m[1].str());
    if (out.count(t)) throw Error(ErrorCode::Io, "duplicate frame " + std::to_string(t) + " in " + dir.string());
    out[t] = entry.path();
  }
  return out;
}

}  // namespace

InitSpec read_init(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "missing " + path.string());
  try {
    const json j = json::parse(in);
    InitSpec init;
    init.obverse_frame = j.at("obverse_frame").get<int>();
    if (j.contains("reverse_frame") && !j.at("reverse_frame").is_null())
      init.reverse_frame = j.at("reverse_frame").get<int>();
    return init;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, path.string() + ": " + e.what());
  }
}

void write_init(const fs::path& path, const InitSpec& init) {
  ordered_json j;
  j["obverse_frame"] = init.obverse_frame;
  j["reverse_frame"] = init.reverse_frame ? ordered_json(*init.reverse_frame) : ordered_json(nullptr);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

SequenceRecord load_sequence(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "not a directory: " + dir.string());
  SequenceRecord rec;
  rec.dir = dir;
  rec.init = read_init(dir / "init.json");
  const auto frames = numbered_files(dir / "frames", {"png", "jpg", "jpeg"});
  if (frames.empty()) throw Error(ErrorCode::Io, "no frames in " + (dir / "frames").string());
  int expected = 0;
  for (const auto& [t, p] : frames) {
    if (t != expected) throw Error(ErrorCode::MissingFrame, "frame " + std::to_string(expected) + " missing");
    rec.frames.push_back(p);
    ++expected;
  }
  rec.ground_truth = numbered_files(dir / "gt", {"png"});
  for (const auto& [t, p] : rec.ground_truth)
    if (t >= rec.frame_count())
      throw Error(ErrorCode::MissingFrame, "ground truth for nonexistent frame " + std::to_string(t));
  auto check_init = [&](int t, const char* what) {
    if (t < 0 || t >= rec.frame_count() || !rec.ground_truth.count(t))
      throw Error(ErrorCode::Io, std::string(what) + " frame " + std::to_string(t) + " has no ground truth");
  };
  check_init(rec.init.obverse_frame, "obverse");
  if (rec.init.reverse_frame) check_init(*rec.init.reverse_frame, "reverse");
  return rec;
}

Image DiskSequence::frame(int t) const {
  if (t < 0 || t >= frame_count()) throw Error(ErrorCode::MissingFrame, "frame " + std::to_string(t));
  return read_image(record_.frames[t]);
}

std::vector<int> DiskSequence::annotated_frames() const {
  std::vector<int> out;
  for (const auto& [t, _] : record_.ground_truth) out.push_back(t);
  return out;
}

LabelMask DiskSequence::ground_truth(int t) const {
  const auto it = record_.ground_truth.find(t);
  if (it == record_.ground_truth.end())
    throw Error(ErrorCode::MissingFrame, "no ground truth for frame " + std::to_string(t));
  return label_mask_from_gray(read_gray8(it->second));
}

std::string to_json_line(const FrameRecord& r) {
  ordered_json j;
  j["frame"] = r.frame;
  j["mode"] = std::string(to_string(r.mode));
  j["side"] = std::string(to_string(r.side));
  ordered_json s;
  s["obj"] = r.score.s_obj;
  s["cover"] = r.score.s_cover;
  s["occl"] = r.score.s_occl;
  s["appearance"] = r.score.s_appearance;
  s["total"] = r.score.total;
  j["score"] = s;
  if (r.homography) {
    const auto a = r.homography->to_array();
    j["homography"] = ordered_json(std::vector<double>(a.begin(), a.end()));
  } else {
    j["homography"] = nullptr;
  }
  ordered_json ad;
  ad["bg"] = r.adaptation_bg;
  ad["obj"] = r.adaptation_obj;
  j["adaptation"] = ad;
  j["mask_path"] = r.mask_path;
  return j.dump();
}

FrameRecord frame_record_from_json(const std::string& line) {
  try {
    const json j = json::parse(line);
    FrameRecord r;
    r.frame = j.at("frame").get<int>();
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "tracking") {
      r.mode = TrackingMode::Tracking;
    } else if (mode == "lost") {
      r.mode = TrackingMode::Lost;
    } else {
      throw Error(ErrorCode::Io, "unknown mode '" + mode + "'");
    }
    r.side = label_from_string(j.at("side").get<std::string>());
    const auto& s = j.at("score");
    r.score = {s.at("obj").get<double>(), s.at("cover").get<double>(), s.at("occl").get<double>(),
               s.at("appearance").get<double>(), s.at("total").get<double>()};
    if (!j.at("homography").is_null()) {
      const auto v = j.at("homography").get<std::vector<double>>();
      if (v.size() != 9) throw Error(ErrorCode::Io, "homography must have 9 entries");
      std::array<double, 9> a{};
      std::copy(v.begin(), v.end(), a.begin());
      r.homography = Homography::from_array(a);
    }
    r.adaptation_bg = j.at("adaptation").at("bg").get<std::size_t>();
    r.adaptation_obj = j.at("adaptation").at("obj").get<std::size_t>();
    r.mask_path = j.at("mask_path").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, std::string("malformed result record: ") + e.what());
  }
}

void write_results(const fs::path& path, const std::vector<FrameRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (const auto& r : records) out << to_json_line(r) << "\n";
}

std::vector<FrameRecord> read_results(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::vector<FrameRecord> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(frame_record_from_json(line));
  return out;
}

}  // namespace coin
