#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cova/geometry.hpp"
#include "cova/scene.hpp"

namespace cova {

struct Detection {
  std::int64_t frame_index = 0;
  int object_id = -1;  ///< ground-truth id, for diagnostics only
  Box bbox;
  std::string label;
  double confidence = 1.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct OracleNoise {
  double miss_prob = 0.0;
  double misclassify_prob = 0.0;
  double jitter_sigma = 0.0;  ///< pixels
  /// Objects smaller than this (px^2) are missed with twice miss_prob.
  double small_object_miss_area = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Stand-in object detector backed by the scene's ground truth. Each
/// (seed, frame, object) draws from its own random stream, so a frame's
/// detections do not depend on which other frames were queried.
std::vector<Detection> detect(const Scene& scene, std::int64_t frame_index, const OracleNoise& noise = {});

/// Detections for several frames, in the order given.
std::vector<std::vector<Detection>> detect_batch(const Scene& scene, std::span<const std::int64_t> frames,
                                                 const OracleNoise& noise = {});

}  // namespace cova
