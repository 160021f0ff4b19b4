#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cova/geometry.hpp"
#include "cova/metadata.hpp"

namespace cova {

struct SceneConfig {
  int width_px = 640;
  int height_px = 352;
  int num_frames = 1000;
  int gop_length = 250;
  /// Expected moving-object arrivals per frame (Poisson).
  double object_spawn_rate = 0.005;
  std::vector<std::string> label_set{"car", "bus", "truck"};
  int static_object_count = 0;
  /// Standard deviation of motion-vector noise, quarter-pixels.
  double mv_noise_sigma = 0.0;
  /// Fraction of background macroblocks per frame carrying a spurious motion vector.
  double texture_noise_rate = 0.0;
  std::uint64_t seed = 0;
  bool b_frames = false;

  int min_object_size = 32;
  int max_object_size = 56;
  int min_speed = 2;  ///< px/frame, horizontal
  int max_speed = 4;
  int max_vertical_speed = 0;
  /// Per-frame probability that a mover picks a new velocity segment.
  double velocity_change_rate = 0.005;
  /// Objects travel in disjoint horizontal lanes of this height.
  int lane_height = 64;
  /// 0 means unlimited.
  int max_concurrent_movers = 0;
  /// Probability a new object is drawn as an ellipse rather than a rectangle.
  double ellipse_fraction = 0.0;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
  int mb_cols() const noexcept { return width_px / kMacroblockSize; }
  int mb_rows() const noexcept { return height_px / kMacroblockSize; }
  int lane_count() const noexcept { return height_px / lane_height; }
};

/// Named configurations: "sparse" (reference scene), "dense", "static", "empty".
SceneConfig scene_preset(std::string_view name);

enum class ObjectShape : std::uint8_t { Rectangle, Ellipse };

struct ObjectState {
  Box bbox;
  double vx = 0.0;
  double vy = 0.0;

  friend bool operator==(const ObjectState&, const ObjectState&) = default;
};

struct GroundTruthObject {
  int object_id = 0;
  std::string label;
  bool is_static = false;
  int first_frame = 0;
  int last_frame = 0;
  /// One entry per frame in [first_frame, last_frame].
  std::vector<ObjectState> states;
  std::uint8_t intensity = 0;
  ObjectShape shape = ObjectShape::Rectangle;

  bool present(int t) const noexcept { return t >= first_frame && t <= last_frame; }
  const ObjectState& at(int t) const { return states.at(static_cast<std::size_t>(t - first_frame)); }

  friend bool operator==(const GroundTruthObject&, const GroundTruthObject&) = default;
};

struct Scene {
  SceneConfig config;
  std::vector<GroundTruthObject> objects;
  GrayFrame background;
};

Scene generate_scene(const SceneConfig& config);

/// The static background for a configuration (a pure function of the seed).
GrayFrame render_background(const SceneConfig& config);

GrayFrame render_frame(const Scene& scene, int t);

/// Emulates the metadata a partial decode of an encoded version of the scene
/// would recover. Motion vectors point to the reference block: mv = -4 * displacement.
MetadataStream encode_metadata(const Scene& scene);

/// Binary PGM (P5).
void write_pgm(const GrayFrame& frame, const std::filesystem::path& path);
GrayFrame read_pgm(const std::filesystem::path& path);

std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);
void write_scene(const Scene& scene, const std::filesystem::path& path);
Scene read_scene(const std::filesystem::path& path);

}  // namespace cova
