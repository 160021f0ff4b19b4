#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cova/geometry.hpp"
#include "cova/oracle.hpp"
#include "cova/tracking.hpp"

namespace cova {

inline constexpr const char* kUnknownLabel = "unknown";

enum class ObjectSource : std::uint8_t { Propagated, AnchorDetected, StaticMerged, GroundTruth };

const char* source_name(ObjectSource s) noexcept;
/// Throws ParseError for unknown names.
ObjectSource parse_source(const std::string& name);

struct AnalyzedObject {
  int track_id = 0;
  std::string label;
  Box bbox;
  ObjectSource source = ObjectSource::Propagated;

  friend bool operator==(const AnalyzedObject&, const AnalyzedObject&) = default;
};

/// Per-frame object lists for the contiguous range starting at first_frame.
struct FrameAnalysis {
  std::int64_t first_frame = 0;
  std::vector<std::vector<AnalyzedObject>> frames;

  std::int64_t frame_count() const noexcept { return static_cast<std::int64_t>(frames.size()); }
  const std::vector<AnalyzedObject>& at(std::int64_t frame) const {
    return frames.at(static_cast<std::size_t>(frame - first_frame));
  }

  friend bool operator==(const FrameAnalysis&, const FrameAnalysis&) = default;
};

struct PropagationParams {
  /// Blob/detection pairs associate when IoU is strictly greater.
  double iou_threshold = 0.3;
  /// A detection belongs to a blob for splitting when this fraction of it lies inside the blob.
  double split_containment = 0.5;
  double static_iou = 0.7;
  /// Drop tracks whose anchors found no detection instead of labelling them "unknown".
  bool drop_unknown = false;

  void validate() const;
};

struct AnchorDetections {
  std::int64_t frame_index = 0;
  std::vector<Detection> detections;
};

struct AssociationResult {
  std::vector<std::pair<int, int>> matches;  ///< (blob, detection), in match order
  std::vector<int> unmatched_blobs;
  std::vector<int> unmatched_detections;
};

/// Greedy matching by descending IoU, each side used at most once; only
/// pairs with IoU strictly above the threshold match. Ties go to the lower
/// (blob, detection) index.
AssociationResult associate(std::span<const Box> blobs, std::span<const Detection> detections, double iou_threshold);

/// Projects each detection's position relative to the track's box on
/// `anchor_frame` onto every frame of the track, one sub-track per
/// detection. Returns nothing when fewer than two detections are given.
std::vector<Track> split_blob(const Track& track, std::int64_t anchor_frame, std::span<const Detection> detections,
                              int& next_track_id);

struct StaticTrack {
  int track_id = 0;
  std::string label;
  Box bbox;
  std::int64_t first_frame = 0;
  std::int64_t last_frame = 0;
  int anchor_count = 0;
};

/// Chains detections on consecutive anchors (sorted by frame) whose boxes
/// overlap with IoU above the threshold and whose labels agree. A detection
/// seen on only one anchor yields a chain with anchor_count 1.
std::vector<StaticTrack> static_merge(std::span<const AnchorDetections> anchors, double iou_threshold,
                                      int& next_track_id);

struct TrackLabel {
  std::string label;
  double confidence = 0.0;
  std::int64_t anchor_frame = 0;
};

struct LabeledTracks {
  std::vector<Track> tracks;         ///< after splitting
  std::map<int, TrackLabel> labels;  ///< tracks with at least one matched anchor detection
  /// (frame, track_id) -> the detection matched to that track on that anchor frame.
  std::map<std::pair<std::int64_t, int>, Detection> anchor_matches;
  std::vector<AnchorDetections> unmatched;  ///< per anchor, detections no track claimed
  int splits = 0;
  int label_conflicts = 0;
};

/// Associates anchor detections with the tracks covering each anchor,
/// splitting tracks whose box holds several detections. A track seen on
/// several anchors keeps its highest-confidence label.
LabeledTracks label_tracks(std::vector<Track> tracks, std::span<const AnchorDetections> anchors,
                           const PropagationParams& params, int& next_track_id);

/// Copies each track's label to every frame of its span. Statics chained over
/// several anchors cover their whole span; single-anchor chains only their frame.
FrameAnalysis propagate_labels(const LabeledTracks& labeled, std::span<const StaticTrack> statics,
                               std::int64_t first_frame, std::int64_t frame_count, const PropagationParams& params);

}  // namespace cova
