#pragma once

#include <array>
#include <climits>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "coin/dataset.hpp"
#include "coin/flow.hpp"
#include "coin/geometry.hpp"
#include "coin/image.hpp"
#include "coin/segmenter.hpp"

namespace coin {

// Filtered Gaussian noise: mean color plus contrast * unit-variance noise
// blurred with `scale` (texels).
struct TextureSpec {
  std::array<double, 3> mean{128.0, 128.0, 128.0};
  double contrast = 30.0;
  double scale = 4.0;
};

// Object outline in plane units (one unit projects to one pixel at depth
// equal to the focal length).
struct Outline {
  enum class Kind { Ellipse, Polygon } kind = Kind::Ellipse;
  double rx = 80.0;
  double ry = 80.0;
  std::vector<Point2> points;

  bool contains(double u, double v) const;
  Rect bounds() const;
};

// Pose of the object plane in camera coordinates. The plane point (u, v)
// sits at R [u v 0]^T + t.
struct Keyframe {
  int frame = 0;
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();  // axis * angle
  Eigen::Vector3d translation{0.0, 0.0, 800.0};
};

struct Occluder {
  Rect rect;  // image pixels at frame `start`
  Point2 velocity;
  int start = 0;
  int end = INT_MAX;
  std::array<double, 3> color{40.0, 40.0, 40.0};

  bool active(int t) const { return t >= start && t <= end; }
  Rect at(int t) const;
};

struct SceneSpec {
  int width = 640;
  int height = 480;
  int frames = 100;
  double focal = 800.0;
  std::uint64_t seed = 0;
  Outline outline;
  TextureSpec obverse{{200.0, 160.0, 60.0}, 40.0, 3.0};
  TextureSpec reverse{{90.0, 140.0, 210.0}, 40.0, 3.0};
  TextureSpec background{{70.0, 70.0, 70.0}, 20.0, 8.0};
  std::vector<Keyframe> keyframes;  // linearly interpolated, held at the ends
  std::vector<Occluder> occluders;
  double gain_amplitude = 0.0;  // gain = 1 + a sin(2 pi t / period)
  double gain_period = 50.0;
  double noise = 0.0;  // per-channel Gaussian sigma, intensity units
  int gt_every = 5;
  bool dense_gt = false;
  bool write_flow = false;
  bool allow_flip = true;
  std::optional<int> obverse_frame;
  std::optional<int> reverse_frame;
};

SceneSpec parse_scene(std::string_view json_text);
SceneSpec load_scene(const std::filesystem::path& path);

// |cos| of the plane normal against the viewing ray below which a frame is
// edge-on.
inline constexpr double kEdgeOnCosine = 0.05;

struct SynthFrame {
  int frame = 0;
  Image image;          // RGB, integer valued in [0, 255]
  LabelMask labels;     // visible object pixels labeled with the visible side
  BinaryMask outline;   // projected outline ignoring occluders
  Label side = Label::Obverse;
  double facing = 1.0;  // signed cosine; positive shows the obverse
  bool edge_on = false;
};

class SceneRenderer {
public:
  explicit SceneRenderer(SceneSpec spec);

  const SceneSpec& spec() const { return spec_; }
  Eigen::Matrix3d camera() const;
  void pose(int t, Eigen::Matrix3d& rotation, Eigen::Vector3d& translation) const;
  // K [r1 r2 t], mapping plane units to pixels.
  Eigen::Matrix3d plane_to_image(int t) const;
  double facing(int t) const;
  Label visible_side(int t) const { return facing(t) >= 0.0 ? Label::Obverse : Label::Reverse; }
  bool edge_on(int t) const { return std::abs(facing(t)) < kEdgeOnCosine; }

  // H from frame `from` to frame `to` induced by the plane.
  Homography inter_frame(int from, int to) const;

  SynthFrame render(int t) const;
  // Projected outline and its unoccluded part, without shading.
  void rasterize(int t, BinaryMask& outline, BinaryMask& visible) const;
  // Motion of every pixel of frame t to frame t+1.
  FlowField flow(int t) const;

private:
  std::array<double, 3> texture_color(const Image& tex, double u, double v) const;
  // Calls fn(x, y, u, v) for every pixel whose back-projection hits the
  // outline.
  template <typename Fn>
  void for_each_object_pixel(int t, Fn&& fn) const;

  SceneSpec spec_;
  Image obverse_tex_;
  Image reverse_tex_;
  Image background_;
  Rect tex_bounds_;
};

struct GeneratedSequence {
  InitSpec init;
  std::vector<int> annotated;
  std::vector<int> edge_on_frames;
  std::vector<Label> sides;
};

// Writes frames/, gt/, oracle/ (dense labels), init.json,
// gt_homographies.jsonl and optionally flow/. Throws DegenerateTrajectory when
// the object shows its edge or flips while allow_flip is off.
GeneratedSequence generate(const SceneSpec& spec, const std::filesystem::path& out_dir);

struct FalsePositiveBlob {
  double x = 0.0;
  double y = 0.0;
  double radius = 0.0;
  int first = 0;
  int last = INT_MAX;
  Label label = Label::Obverse;
};

struct Corruption {
  std::vector<FalsePositiveBlob> fp_blobs;
  std::size_t hole_pixels = 0;  // removed from the object interior per frame
  int erosion = 0;              // boundary pixels stripped, 8-neighbourhood steps
};

// "x,y,r[,first,last];..." -> blobs.
std::vector<FalsePositiveBlob> parse_fp_blobs(std::string_view text);

// Ground-truth labels with the configured corruption applied: erosion, then a
// disc-shaped hole of exactly hole_pixels around the deepest interior pixel,
// then blobs painted over background.
LabelMask oracle_segmenter(const LabelMask& truth, const Corruption& corruption, int frame_index);

}  // namespace coin
