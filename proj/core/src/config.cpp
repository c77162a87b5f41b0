#include "coin/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "coin/errors.hpp"

namespace coin {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view expected) {
  throw Error(ErrorCode::Config,
              "key '" + std::string(key) + "': expected " + std::string(expected) + ", got '" + std::string(value) + "'");
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad(key, v, "a number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad(key, v, "true or false");
}

std::string parse_string(std::string_view key, std::string_view v) {
  if (v.size() < 2 || v.front() != '"' || v.back() != '"') bad(key, v, "a quoted string");
  std::string out;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    if (v[i] == '\\' && i + 2 < v.size()) {
      out.push_back(v[++i]);
    } else if (v[i] == '"') {
      bad(key, v, "a quoted string");
    } else {
      out.push_back(v[i]);
    }
  }
  return out;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out + "\"";
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

struct Field {
  std::function<void(TrackerConfig&, std::string_view key, std::string_view)> set;
  std::function<std::string(const TrackerConfig&)> get;
};

#define COIN_INT_FIELD(path, T)                                                                          \
  Field{[](TrackerConfig& c, std::string_view k, std::string_view v) { c.path = parse_number<T>(k, v); }, \
        [](const TrackerConfig& c) { return std::to_string(c.path); }}
#define COIN_DOUBLE_FIELD(path)                                                                               \
  Field{[](TrackerConfig& c, std::string_view k, std::string_view v) { c.path = parse_number<double>(k, v); }, \
        [](const TrackerConfig& c) { return format_double(c.path); }}
#define COIN_BOOL_FIELD(path)                                                                        \
  Field{[](TrackerConfig& c, std::string_view k, std::string_view v) { c.path = parse_bool(k, v); }, \
        [](const TrackerConfig& c) { return std::string(c.path ? "true" : "false"); }}
#define COIN_STRING_FIELD(path)                                                                        \
  Field{[](TrackerConfig& c, std::string_view k, std::string_view v) { c.path = parse_string(k, v); }, \
        [](const TrackerConfig& c) { return quote(c.path); }}

const std::map<std::string, Field, std::less<>>& fields() {
  static const std::map<std::string, Field, std::less<>> table = {
      {"seed", COIN_INT_FIELD(seed, std::uint64_t)},
      {"segmenter.backend", COIN_STRING_FIELD(segmenter.backend)},
      {"segmenter.k", COIN_INT_FIELD(segmenter.k, int)},
      {"segmenter.stride", COIN_INT_FIELD(segmenter.stride, int)},
      {"segmenter.cap_per_label", COIN_INT_FIELD(segmenter.cap_per_label, std::size_t)},
      {"segmenter.index_capacity", COIN_INT_FIELD(segmenter.index_capacity, std::size_t)},
      {"segmenter.use_xy", COIN_BOOL_FIELD(segmenter.use_xy)},
      {"optimizer.init_samples", COIN_INT_FIELD(optimizer.init_samples, int)},
      {"optimizer.iterations", COIN_INT_FIELD(optimizer.iterations, int)},
      {"optimizer.t0", COIN_DOUBLE_FIELD(optimizer.t0)},
      {"optimizer.t_decay", COIN_DOUBLE_FIELD(optimizer.t_decay)},
      {"optimizer.sigma0_fraction", COIN_DOUBLE_FIELD(optimizer.sigma0_fraction)},
      {"optimizer.sigma_decay", COIN_DOUBLE_FIELD(optimizer.sigma_decay)},
      {"optimizer.redetect_samples", COIN_INT_FIELD(optimizer.redetect_samples, int)},
      {"optimizer.flow", COIN_STRING_FIELD(optimizer.flow)},
      {"optimizer.flow_radius", COIN_INT_FIELD(optimizer.flow_radius, int)},
      {"scoring.min_appearance_pixels", COIN_INT_FIELD(scoring.min_appearance_pixels, std::size_t)},
      {"tracker.lost_threshold", COIN_DOUBLE_FIELD(tracker.lost_threshold)},
      {"tracker.redetect_threshold", COIN_DOUBLE_FIELD(tracker.redetect_threshold)},
      {"tracker.strict_causal", COIN_BOOL_FIELD(tracker.strict_causal)},
      {"tracker.refresh_low_confidence", COIN_BOOL_FIELD(tracker.refresh_low_confidence)},
      {"adaptation.enabled", COIN_BOOL_FIELD(adaptation.enabled)},
      {"adaptation.min_boundary_distance", COIN_DOUBLE_FIELD(adaptation.min_boundary_distance)},
      {"adaptation.min_score", COIN_DOUBLE_FIELD(adaptation.min_score)},
      {"oracle.fp_blobs", COIN_STRING_FIELD(oracle.fp_blobs)},
      {"oracle.hole_pixels", COIN_INT_FIELD(oracle.hole_pixels, std::size_t)},
      {"oracle.erosion", COIN_INT_FIELD(oracle.erosion, int)},
  };
  return table;
}

}  // namespace

void set_config_value(TrackerConfig& config, std::string_view key, std::string_view value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw Error(ErrorCode::Config, "unknown key '" + std::string(key) + "'");
  it->second.set(config, key, trim(value));
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : fields()) keys.push_back(k);
  return keys;
}

void validate(const TrackerConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::Config, what);
  };
  require(c.segmenter.backend == "reference" || c.segmenter.backend == "oracle",
          "segmenter.backend must be \"reference\" or \"oracle\"");
  require(c.segmenter.k >= 1, "segmenter.k must be >= 1");
  require(c.segmenter.stride >= 1, "segmenter.stride must be >= 1");
  require(c.segmenter.cap_per_label >= 1, "segmenter.cap_per_label must be >= 1");
  require(c.optimizer.init_samples >= 1, "optimizer.init_samples must be >= 1");
  require(c.optimizer.iterations >= 1, "optimizer.iterations must be >= 1");
  require(c.optimizer.t0 > 0.0, "optimizer.t0 must be positive");
  require(c.optimizer.t_decay > 0.0 && c.optimizer.t_decay <= 1.0, "optimizer.t_decay must be in (0, 1]");
  require(c.optimizer.sigma0_fraction > 0.0, "optimizer.sigma0_fraction must be positive");
  require(c.optimizer.sigma_decay > 0.0 && c.optimizer.sigma_decay <= 1.0, "optimizer.sigma_decay must be in (0, 1]");
  require(c.optimizer.redetect_samples >= 1, "optimizer.redetect_samples must be >= 1");
  require(c.optimizer.flow == "builtin" || c.optimizer.flow == "files" || c.optimizer.flow == "none",
          "optimizer.flow must be \"builtin\", \"files\" or \"none\"");
  require(c.optimizer.flow_radius >= 0, "optimizer.flow_radius must be >= 0");
  require(c.tracker.lost_threshold >= 0.0 && c.tracker.lost_threshold <= 1.0, "tracker.lost_threshold must be in [0, 1]");
  require(c.tracker.redetect_threshold >= 0.0 && c.tracker.redetect_threshold <= 1.0,
          "tracker.redetect_threshold must be in [0, 1]");
  require(c.adaptation.min_boundary_distance >= 0.0, "adaptation.min_boundary_distance must be >= 0");
  require(c.adaptation.min_score >= 0.0 && c.adaptation.min_score <= 1.0, "adaptation.min_score must be in [0, 1]");
  require(c.oracle.erosion >= 0, "oracle.erosion must be >= 0");
}

TrackerConfig parse_config(std::string_view text) {
  TrackerConfig config;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;

    // Strip comments outside quotes.
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_quotes = !in_quotes;
      if (line[i] == '#' && !in_quotes) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorCode::Config, "line " + std::to_string(line_no) + ": malformed section");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::Config, "line " + std::to_string(line_no) + ": expected key = value");
    std::string key(trim(line.substr(0, eq)));
    if (!section.empty()) key = section + "." + key;
    try {
      set_config_value(config, key, line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(ErrorCode::Config, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  validate(config);
  return config;
}

TrackerConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const TrackerConfig& config) {
  std::string out;
  // Top-level keys must precede any section header.
  for (const auto& [key, f] : fields())
    if (key.find('.') == std::string::npos) out += key + " = " + f.get(config) + "\n";
  std::string section;
  for (const auto& [key, f] : fields()) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) continue;
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      out += "\n[" + sec + "]\n";
      section = sec;
    }
    out += key.substr(dot + 1) + " = " + f.get(config) + "\n";
  }
  return out;
}

}  // namespace coin
