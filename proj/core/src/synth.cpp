#include "coin/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <nlohmann/json.hpp>

#include "coin/errors.hpp"
#include "coin/random.hpp"

namespace coin {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

bool Outline::contains(double u, double v) const {
  if (kind == Kind::Ellipse) {
    const double a = u / rx, b = v / ry;
    return a * a + b * b <= 1.0;
  }
  // Crossing number.
  bool in = false;
  const std::size_t n = points.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2 &p = points[i], &q = points[j];
    if ((p.y > v) != (q.y > v) && u < (q.x - p.x) * (v - p.y) / (q.y - p.y) + p.x) in = !in;
  }
  return in;
}

Rect Outline::bounds() const {
  if (kind == Kind::Ellipse) return {-rx, -ry, rx, ry};
  Rect r{1e300, 1e300, -1e300, -1e300};
  for (const auto& p : points) {
    r.x0 = std::min(r.x0, p.x), r.y0 = std::min(r.y0, p.y);
    r.x1 = std::max(r.x1, p.x), r.y1 = std::max(r.y1, p.y);
  }
  return r;
}

Rect Occluder::at(int t) const {
  const double k = t - start;
  return {rect.x0 + k * velocity.x, rect.y0 + k * velocity.y, rect.x1 + k * velocity.x, rect.y1 + k * velocity.y};
}

namespace {

[[noreturn]] void spec_error(const std::string& what) { throw Error(ErrorCode::Config, "scene: " + what); }

std::array<double, 3> color3(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) spec_error("colors need three components");
  return {v[0], v[1], v[2]};
}

Eigen::Vector3d vec3(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) spec_error("vectors need three components");
  return {v[0], v[1], v[2]};
}

TextureSpec texture_from(const json& j, TextureSpec t) {
  for (const auto& [k, v] : j.items()) {
    if (k == "mean") {
      t.mean = color3(v);
    } else if (k == "contrast") {
      t.contrast = v.get<double>();
    } else if (k == "scale") {
      t.scale = v.get<double>();
    } else {
      spec_error("unknown texture key '" + k + "'");
    }
  }
  if (t.scale <= 0.0) spec_error("texture scale must be positive");
  return t;
}

// Zero-mean, unit-variance Gaussian noise blurred at `scale`.
Image noise_field(int w, int h, double scale, std::uint64_t seed) {
  RandomSource rng(seed);
  Image n(w, h, 1);
  for (auto& v : n.data()) v = static_cast<float>(rng.normal(0.0, 1.0));
  n = gaussian_blur(n, scale);
  double mean = 0.0, sq = 0.0;
  for (float v : n.data()) mean += v;
  mean /= double(n.data().size());
  for (float v : n.data()) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / double(n.data().size()));
  for (auto& v : n.data()) v = static_cast<float>((v - mean) / (sd > 0.0 ? sd : 1.0));
  return n;
}

Image colorize(const Image& noise, const TextureSpec& t) {
  Image out(noise.width(), noise.height(), 3);
  for (int y = 0; y < noise.height(); ++y)
    for (int x = 0; x < noise.width(); ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = static_cast<float>(t.mean[c] + t.contrast * noise.at(x, y));
  return out;
}

float quantize(double v) { return static_cast<float>(std::clamp(std::round(v), 0.0, 255.0)); }

}  // namespace

SceneSpec parse_scene(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    spec_error(e.what());
  }
  if (!j.is_object()) spec_error("top level must be an object");
  SceneSpec s;
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "width") {
        s.width = v.get<int>();
      } else if (k == "height") {
        s.height = v.get<int>();
      } else if (k == "frames") {
        s.frames = v.get<int>();
      } else if (k == "focal") {
        s.focal = v.get<double>();
      } else if (k == "seed") {
        s.seed = v.get<std::uint64_t>();
      } else if (k == "outline") {
        const auto type = v.at("type").get<std::string>();
        if (type == "ellipse") {
          s.outline.kind = Outline::Kind::Ellipse;
          s.outline.rx = v.at("rx").get<double>();
          s.outline.ry = v.value("ry", s.outline.rx);
          if (s.outline.rx <= 0.0 || s.outline.ry <= 0.0) spec_error("ellipse radii must be positive");
        } else if (type == "polygon") {
          s.outline.kind = Outline::Kind::Polygon;
          for (const auto& p : v.at("points")) {
            const auto xy = p.get<std::vector<double>>();
            if (xy.size() != 2) spec_error("polygon points need two coordinates");
            s.outline.points.push_back({xy[0], xy[1]});
          }
          if (s.outline.points.size() < 3) spec_error("polygon needs at least three points");
        } else {
          spec_error("unknown outline type '" + type + "'");
        }
      } else if (k == "obverse") {
        s.obverse = texture_from(v, s.obverse);
      } else if (k == "reverse") {
        s.reverse = texture_from(v, s.reverse);
      } else if (k == "background") {
        s.background = texture_from(v, s.background);
      } else if (k == "keyframes") {
        for (const auto& kf : v) {
          Keyframe f;
          f.frame = kf.at("frame").get<int>();
          if (kf.contains("rotation")) f.rotation = vec3(kf.at("rotation"));
          if (kf.contains("translation")) f.translation = vec3(kf.at("translation"));
          s.keyframes.push_back(f);
        }
      } else if (k == "occluders") {
        for (const auto& oc : v) {
          Occluder o;
          const auto r = oc.at("rect").get<std::vector<double>>();
          if (r.size() != 4) spec_error("occluder rect is [x0, y0, x1, y1]");
          o.rect = {r[0], r[1], r[2], r[3]};
          if (oc.contains("velocity")) {
            const auto vel = oc.at("velocity").get<std::vector<double>>();
            if (vel.size() != 2) spec_error("occluder velocity is [vx, vy]");
            o.velocity = {vel[0], vel[1]};
          }
          o.start = oc.value("start", 0);
          o.end = oc.value("end", INT_MAX);
          if (oc.contains("color")) o.color = color3(oc.at("color"));
          s.occluders.push_back(o);
        }
      } else if (k == "gain") {
        s.gain_amplitude = v.value("amplitude", 0.0);
        s.gain_period = v.value("period", 50.0);
      } else if (k == "noise") {
        s.noise = v.get<double>();
      } else if (k == "gt_every") {
        s.gt_every = v.get<int>();
      } else if (k == "dense_gt") {
        s.dense_gt = v.get<bool>();
      } else if (k == "write_flow") {
        s.write_flow = v.get<bool>();
      } else if (k == "allow_flip") {
        s.allow_flip = v.get<bool>();
      } else if (k == "obverse_frame") {
        s.obverse_frame = v.get<int>();
      } else if (k == "reverse_frame") {
        if (!v.is_null()) s.reverse_frame = v.get<int>();
      } else {
        spec_error("unknown key '" + k + "'");
      }
    }
  } catch (const json::exception& e) {
    spec_error(e.what());
  }
  if (s.width < 8 || s.height < 8) spec_error("frame must be at least 8x8");
  if (s.frames < 1) spec_error("frames must be >= 1");
  if (s.focal <= 0.0) spec_error("focal must be positive");
  if (s.gt_every < 1) spec_error("gt_every must be >= 1");
  if (s.gain_period <= 0.0) spec_error("gain period must be positive");
  if (s.keyframes.empty()) s.keyframes.push_back(Keyframe{});
  std::stable_sort(s.keyframes.begin(), s.keyframes.end(),
                   [](const Keyframe& a, const Keyframe& b) { return a.frame < b.frame; });
  return s;
}

SceneSpec load_scene(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read scene " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene(ss.str());
}

SceneRenderer::SceneRenderer(SceneSpec spec) : spec_(std::move(spec)) {
  if (spec_.keyframes.empty()) spec_.keyframes.push_back(Keyframe{});
  const Rect b = spec_.outline.bounds();
  tex_bounds_ = {std::floor(b.x0) - 2.0, std::floor(b.y0) - 2.0, std::ceil(b.x1) + 2.0, std::ceil(b.y1) + 2.0};
  const int tw = static_cast<int>(tex_bounds_.x1 - tex_bounds_.x0) + 1;
  const int th = static_cast<int>(tex_bounds_.y1 - tex_bounds_.y0) + 1;
  obverse_tex_ = colorize(noise_field(tw, th, spec_.obverse.scale, RandomSource::derive(spec_.seed, 1001)), spec_.obverse);
  reverse_tex_ = colorize(noise_field(tw, th, spec_.reverse.scale, RandomSource::derive(spec_.seed, 1002)), spec_.reverse);
  background_ = colorize(noise_field(spec_.width, spec_.height, spec_.background.scale,
                                     RandomSource::derive(spec_.seed, 1003)),
                         spec_.background);
}

Eigen::Matrix3d SceneRenderer::camera() const {
  Eigen::Matrix3d k;
  k << spec_.focal, 0.0, (spec_.width - 1) / 2.0, 0.0, spec_.focal, (spec_.height - 1) / 2.0, 0.0, 0.0, 1.0;
  return k;
}

void SceneRenderer::pose(int t, Eigen::Matrix3d& rotation, Eigen::Vector3d& translation) const {
  const auto& kf = spec_.keyframes;
  Eigen::Vector3d rv = kf.front().rotation, tv = kf.front().translation;
  if (t >= kf.back().frame) {
    rv = kf.back().rotation, tv = kf.back().translation;
  } else if (t > kf.front().frame) {
    for (std::size_t i = 0; i + 1 < kf.size(); ++i) {
      if (t < kf[i].frame || t > kf[i + 1].frame) continue;
      const double span = kf[i + 1].frame - kf[i].frame;
      const double a = span > 0.0 ? (t - kf[i].frame) / span : 0.0;
      rv = (1.0 - a) * kf[i].rotation + a * kf[i + 1].rotation;
      tv = (1.0 - a) * kf[i].translation + a * kf[i + 1].translation;
      break;
    }
  }
  const double angle = rv.norm();
  rotation = angle > 0.0 ? Eigen::AngleAxisd(angle, rv / angle).toRotationMatrix() : Eigen::Matrix3d::Identity();
  translation = tv;
}

Eigen::Matrix3d SceneRenderer::plane_to_image(int t) const {
  Eigen::Matrix3d r;
  Eigen::Vector3d tv;
  pose(t, r, tv);
  Eigen::Matrix3d m;
  m.col(0) = r.col(0);
  m.col(1) = r.col(1);
  m.col(2) = tv;
  return camera() * m;
}

double SceneRenderer::facing(int t) const {
  Eigen::Matrix3d r;
  Eigen::Vector3d tv;
  pose(t, r, tv);
  return r.col(2).dot(tv) / tv.norm();
}

Homography SceneRenderer::inter_frame(int from, int to) const {
  return Homography(plane_to_image(to) * plane_to_image(from).inverse());
}

std::array<double, 3> SceneRenderer::texture_color(const Image& tex, double u, double v) const {
  const double x = u - tex_bounds_.x0, y = v - tex_bounds_.y0;
  return {sample_bilinear(tex, x, y, 0), sample_bilinear(tex, x, y, 1), sample_bilinear(tex, x, y, 2)};
}

template <typename Fn>
void SceneRenderer::for_each_object_pixel(int t, Fn&& fn) const {
  const int w = spec_.width, h = spec_.height;
  if (std::abs(facing(t)) <= 1e-9) return;
  Eigen::Matrix3d r;
  Eigen::Vector3d tv;
  pose(t, r, tv);
  const Eigen::Matrix3d g = plane_to_image(t);
  const Eigen::FullPivLU<Eigen::Matrix3d> lu(g);
  if (!lu.isInvertible()) return;
  const Eigen::Matrix3d gi = lu.inverse();
  // Image bounding box of the outline.
  const Rect b = spec_.outline.bounds();
  double x0 = 0, y0 = 0, x1 = w - 1, y1 = h - 1;
  bool bounded = true;
  double bx0 = 1e300, by0 = 1e300, bx1 = -1e300, by1 = -1e300;
  for (const auto& p : {Point2{b.x0, b.y0}, Point2{b.x1, b.y0}, Point2{b.x1, b.y1}, Point2{b.x0, b.y1}}) {
    const Eigen::Vector3d q = g * Eigen::Vector3d(p.x, p.y, 1.0);
    if (q.z() <= 1e-9) {
      bounded = false;
      break;
    }
    bx0 = std::min(bx0, q.x() / q.z()), bx1 = std::max(bx1, q.x() / q.z());
    by0 = std::min(by0, q.y() / q.z()), by1 = std::max(by1, q.y() / q.z());
  }
  if (bounded) {
    if (bx1 < -1.0 || by1 < -1.0 || bx0 > w || by0 > h) return;
    x0 = std::max(0.0, std::floor(bx0) - 1), x1 = std::min(w - 1.0, std::ceil(bx1) + 1);
    y0 = std::max(0.0, std::floor(by0) - 1), y1 = std::min(h - 1.0, std::ceil(by1) + 1);
  }
  for (int y = int(y0); y <= int(y1); ++y)
    for (int x = int(x0); x <= int(x1); ++x) {
      const Eigen::Vector3d q = gi * Eigen::Vector3d(x, y, 1.0);
      if (std::abs(q.z()) < 1e-15) continue;
      const double u = q.x() / q.z(), v = q.y() / q.z();
      // The plane point must lie in front of the camera.
      if ((r.col(0) * u + r.col(1) * v + tv).z() <= 0.0) continue;
      if (spec_.outline.contains(u, v)) fn(x, y, u, v);
    }
}

namespace {

struct PixelBox {
  int x0, y0, x1, y1;
};

PixelBox occluder_pixels(const Occluder& o, int t, int w, int h) {
  const Rect rc = o.at(t);
  return {std::max(0, int(std::ceil(rc.x0))), std::max(0, int(std::ceil(rc.y0))), std::min(w - 1, int(std::floor(rc.x1))),
          std::min(h - 1, int(std::floor(rc.y1)))};
}

}  // namespace

void SceneRenderer::rasterize(int t, BinaryMask& outline, BinaryMask& visible) const {
  const int w = spec_.width, h = spec_.height;
  outline = BinaryMask(w, h);
  for_each_object_pixel(t, [&](int x, int y, double, double) { outline.set(x, y); });
  visible = outline;
  for (const auto& o : spec_.occluders) {
    if (!o.active(t)) continue;
    const PixelBox b = occluder_pixels(o, t, w, h);
    for (int y = b.y0; y <= b.y1; ++y)
      for (int x = b.x0; x <= b.x1; ++x) visible.set(x, y, false);
  }
}

SynthFrame SceneRenderer::render(int t) const {
  const int w = spec_.width, h = spec_.height;
  SynthFrame f;
  f.frame = t;
  f.facing = facing(t);
  f.side = f.facing >= 0.0 ? Label::Obverse : Label::Reverse;
  f.edge_on = std::abs(f.facing) < kEdgeOnCosine;
  f.labels = LabelMask(w, h, 1);
  f.outline = BinaryMask(w, h);

  std::vector<double> color(std::size_t(w) * h * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) color[(std::size_t(y) * w + x) * 3 + c] = background_.at(x, y, c);

  const Image& tex = f.side == Label::Obverse ? obverse_tex_ : reverse_tex_;
  for_each_object_pixel(t, [&](int x, int y, double u, double v) {
    f.outline.set(x, y, true);
    const auto col = texture_color(tex, u, v);
    for (int c = 0; c < 3; ++c) color[(std::size_t(y) * w + x) * 3 + c] = col[c];
  });

  BinaryMask visible = f.outline;
  for (const auto& o : spec_.occluders) {
    if (!o.active(t)) continue;
    const PixelBox b = occluder_pixels(o, t, w, h);
    for (int y = b.y0; y <= b.y1; ++y)
      for (int x = b.x0; x <= b.x1; ++x) {
        visible.set(x, y, false);
        for (int c = 0; c < 3; ++c) color[(std::size_t(y) * w + x) * 3 + c] = o.color[c];
      }
  }
  for (std::size_t i = 0; i < visible.size(); ++i)
    if (visible.bits()[i]) f.labels.labels[i] = f.side;

  const double gain = 1.0 + spec_.gain_amplitude * std::sin(2.0 * M_PI * t / spec_.gain_period);
  RandomSource rng(RandomSource::derive(spec_.seed, static_cast<std::uint64_t>(t)));
  f.image = Image(w, h, 3);
  const auto pixels = f.image.data();
  if (spec_.noise > 0.0) {
    std::normal_distribution<double> noise(0.0, spec_.noise);
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = quantize(gain * color[i] + noise(rng.engine()));
  } else {
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = quantize(gain * color[i]);
  }
  return f;
}

FlowField SceneRenderer::flow(int t) const {
  const int w = spec_.width, h = spec_.height;
  FlowField field(w, h);
  BinaryMask outline, visible;
  rasterize(t, outline, visible);
  const Eigen::Matrix3d m = plane_to_image(t + 1) * plane_to_image(t).inverse();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!outline(x, y)) continue;
      const Eigen::Vector3d q = m * Eigen::Vector3d(x, y, 1.0);
      if (std::abs(q.z()) < 1e-12) continue;
      field.dx(x, y) = static_cast<float>(q.x() / q.z() - x);
      field.dy(x, y) = static_cast<float>(q.y() / q.z() - y);
    }
  for (const auto& o : spec_.occluders) {
    if (!o.active(t) || !o.active(t + 1)) continue;
    const PixelBox b = occluder_pixels(o, t, w, h);
    for (int y = b.y0; y <= b.y1; ++y)
      for (int x = b.x0; x <= b.x1; ++x) {
        field.dx(x, y) = static_cast<float>(o.velocity.x);
        field.dy(x, y) = static_cast<float>(o.velocity.y);
      }
  }
  return field;
}

namespace {

ordered_json array9(const Eigen::Matrix3d& m) {
  const Homography h(m);
  const auto a = h.to_array();
  return ordered_json(std::vector<double>(a.begin(), a.end()));
}

}  // namespace

GeneratedSequence generate(const SceneSpec& spec, const fs::path& out_dir) {
  const SceneRenderer renderer(spec);
  GeneratedSequence out;
  for (int t = 0; t < spec.frames; ++t) {
    out.sides.push_back(renderer.visible_side(t));
    if (renderer.edge_on(t)) out.edge_on_frames.push_back(t);
  }
  if (!spec.allow_flip) {
    if (!out.edge_on_frames.empty())
      throw Error(ErrorCode::DegenerateTrajectory,
                  "object is edge-on at frame " + std::to_string(out.edge_on_frames.front()) + " and allow_flip is off");
    for (int t = 1; t < spec.frames; ++t)
      if (out.sides[t] != out.sides[t - 1])
        throw Error(ErrorCode::DegenerateTrajectory, "side flips at frame " + std::to_string(t) + " and allow_flip is off");
  }

  // Initialization frames: explicit, or the first clean full view of a side.
  auto pick = [&](Label side, std::optional<int> explicit_frame) -> std::optional<int> {
    if (explicit_frame) {
      if (*explicit_frame < 0 || *explicit_frame >= spec.frames)
        throw Error(ErrorCode::Config, "scene: initialization frame out of range");
      if (renderer.visible_side(*explicit_frame) != side || renderer.edge_on(*explicit_frame))
        throw Error(ErrorCode::Config, "scene: initialization frame does not show the " +
                                           std::string(to_string(side)) + " side");
      return explicit_frame;
    }
    for (int pass = 0; pass < 2; ++pass)
      for (int t = 0; t < spec.frames; ++t) {
        const bool annotated = spec.dense_gt || t % spec.gt_every == 0;
        if (pass == 0 && !annotated) continue;
        if (renderer.visible_side(t) != side || std::abs(renderer.facing(t)) < 0.5) continue;
        BinaryMask outline, visible;
        renderer.rasterize(t, outline, visible);
        if (outline.any() && visible == outline) return t;
      }
    return std::nullopt;
  };
  const auto obverse = pick(Label::Obverse, spec.obverse_frame);
  if (!obverse) throw Error(ErrorCode::DegenerateTrajectory, "scene never shows a clean obverse view");
  out.init.obverse_frame = *obverse;
  out.init.reverse_frame = pick(Label::Reverse, spec.reverse_frame);

  fs::create_directories(out_dir / "frames");
  fs::create_directories(out_dir / "gt");
  fs::create_directories(out_dir / "oracle");
  if (spec.write_flow) fs::create_directories(out_dir / "flow");
  write_init(out_dir / "init.json", out.init);

  std::ofstream hom(out_dir / "gt_homographies.jsonl", std::ios::binary);
  if (!hom) throw Error(ErrorCode::Io, "cannot write " + (out_dir / "gt_homographies.jsonl").string());
  for (int t = 0; t < spec.frames; ++t) {
    const SynthFrame f = renderer.render(t);
    write_image(out_dir / "frames" / frame_name(t), f.image);
    const Gray8 labels = label_mask_to_gray(f.labels);
    write_gray8(out_dir / "oracle" / frame_name(t), labels);
    const bool init_frame = t == out.init.obverse_frame || (out.init.reverse_frame && t == *out.init.reverse_frame);
    if (spec.dense_gt || t % spec.gt_every == 0 || init_frame) {
      write_gray8(out_dir / "gt" / frame_name(t), labels);
      out.annotated.push_back(t);
    }
    if (spec.write_flow && t + 1 < spec.frames) write_flow(out_dir / "flow" / frame_name(t, ".flo"), renderer.flow(t));

    ordered_json j;
    j["frame"] = t;
    j["side"] = std::string(to_string(f.side));
    j["facing"] = f.facing;
    j["edge_on"] = f.edge_on;
    const Eigen::Matrix3d g = renderer.plane_to_image(t);
    const bool invertible = Eigen::FullPivLU<Eigen::Matrix3d>(g).isInvertible() && !f.edge_on;
    j["plane_to_image"] = invertible ? array9(g) : ordered_json(nullptr);
    const std::optional<int> canon = f.side == Label::Obverse ? std::optional<int>(out.init.obverse_frame)
                                                                : out.init.reverse_frame;
    j["homography"] = invertible && canon ? array9(g * renderer.plane_to_image(*canon).inverse()) : ordered_json(nullptr);
    hom << j.dump() << "\n";
  }
  return out;
}

std::vector<FalsePositiveBlob> parse_fp_blobs(std::string_view text) {
  std::vector<FalsePositiveBlob> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find(';', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string item(text.substr(pos, end - pos));
    pos = end + 1;
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> v;
    std::stringstream ss(item);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(tok, &used));
        if (tok.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error(ErrorCode::Config, "bad fp blob '" + item + "'");
      }
    }
    if (v.size() != 3 && v.size() != 5) throw Error(ErrorCode::Config, "fp blob needs x,y,r[,first,last]: '" + item + "'");
    FalsePositiveBlob b{v[0], v[1], v[2]};
    if (b.radius < 0.0) throw Error(ErrorCode::Config, "fp blob radius must be >= 0");
    if (v.size() == 5) b.first = static_cast<int>(v[3]), b.last = static_cast<int>(v[4]);
    out.push_back(b);
  }
  return out;
}

LabelMask oracle_segmenter(const LabelMask& truth, const Corruption& c, int frame_index) {
  LabelMask out = truth;
  const int w = truth.cols, h = truth.rows;
  auto idx = [w](int x, int y) { return std::size_t(y) * w + x; };

  for (int step = 0; step < c.erosion; ++step) {
    const LabelMask before = out;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (before.labels[idx(x, y)] == Label::Background) continue;
        bool edge = false;
        for (int dy = -1; dy <= 1 && !edge; ++dy)
          for (int dx = -1; dx <= 1 && !edge; ++dx) {
            const int nx = x + dx, ny = y + dy;
            edge = nx < 0 || ny < 0 || nx >= w || ny >= h || before.labels[idx(nx, ny)] == Label::Background;
          }
        if (edge) out.labels[idx(x, y)] = Label::Background;
      }
  }

  if (c.hole_pixels > 0) {
    const BinaryMask obj = object_mask(out);
    if (obj.any()) {
      const DistanceMap dist = boundary_distance(obj);
      std::size_t center = 0;
      float best = -1.0f;
      for (std::size_t i = 0; i < obj.size(); ++i)
        if (obj.bits()[i] && dist.values[i] > best) best = dist.values[i], center = i;
      const long cx = long(center % w), cy = long(center / w);
      std::vector<std::pair<long, std::size_t>> pixels;
      for (std::size_t i = 0; i < obj.size(); ++i)
        if (obj.bits()[i]) {
          const long dx = long(i % w) - cx, dy = long(i / w) - cy;
          pixels.emplace_back(dx * dx + dy * dy, i);
        }
      const std::size_t n = std::min(c.hole_pixels, pixels.size());
      std::partial_sort(pixels.begin(), pixels.begin() + n, pixels.end());
      for (std::size_t i = 0; i < n; ++i) out.labels[pixels[i].second] = Label::Background;
    }
  }

  for (const auto& b : c.fp_blobs) {
    if (frame_index < b.first || frame_index > b.last) continue;
    const int x0 = std::max(0, int(std::floor(b.x - b.radius))), x1 = std::min(w - 1, int(std::ceil(b.x + b.radius)));
    const int y0 = std::max(0, int(std::floor(b.y - b.radius))), y1 = std::min(h - 1, int(std::ceil(b.y + b.radius)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - b.x, dy = y - b.y;
        if (dx * dx + dy * dy <= b.radius * b.radius && truth.labels[idx(x, y)] == Label::Background)
          out.labels[idx(x, y)] = b.label;
      }
  }
  return out;
}

}  // namespace coin
