#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cova/analysis_io.hpp"
#include "cova/blobnet.hpp"
#include "cova/metadata.hpp"
#include "cova/oracle.hpp"
#include "cova/propagation.hpp"
#include "cova/scene.hpp"
#include "cova/selection.hpp"
#include "cova/tracking.hpp"
#include "cova/training.hpp"

namespace cova {

struct PipelineConfig {
  std::filesystem::path stream_path;
  std::filesystem::path model_path;
  std::filesystem::path scene_path;
  std::filesystem::path output_path;
  std::string video_id = "video";

  /// Threads processing chunks. Does not influence results.
  int worker_count = 1;
  /// I-frame-aligned chunks the stream is cut into; tracks never cross chunks.
  int chunk_count = 8;
  std::uint64_t seed = 0;

  TrainConfig train;
  SortParams tracker;
  int min_blob_cells = 2;
  PropagationParams propagation;
  OracleNoise oracle;
  /// Anchor frames handed to the detector per batch, and the request queue bound.
  int detector_batch = 16;
  int queue_capacity = 4;

  /// Throws ConfigError when any value is out of range.
  void validate() const;
  /// Canonical key = value text of every setting that can change results.
  std::string canonical() const;
  std::string config_hash() const { return fnv1a_hex(canonical()); }
};

struct StageTimes {
  double blobnet_s = 0.0;  ///< features + forward + threshold
  double ccl_s = 0.0;
  double tracking_s = 0.0;
  double selection_s = 0.0;
  double detection_s = 0.0;
  double propagation_s = 0.0;
};

struct PipelineReport {
  SelectionReport selection;
  /// total_frames / decoded_frames; infinite when nothing is decoded.
  double effective_decode_speedup = 0.0;
  int chunk_count = 0;
  std::int64_t frames_processed = 0;
  std::int64_t blobs = 0;
  std::int64_t tracks = 0;
  std::int64_t detections = 0;
  std::int64_t detector_batches = 0;
  std::int64_t splits = 0;
  std::int64_t label_conflicts = 0;
  std::int64_t static_tracks = 0;
  std::int64_t unknown_tracks = 0;
  std::int64_t clamp_warnings = 0;
  StageTimes stage_times;
  double wall_s = 0.0;
  /// Metadata frames per second through the whole pipeline on this machine.
  double metadata_fps = 0.0;
};

struct PipelineOutput {
  FrameAnalysis analysis;
  PipelineReport report;
  std::vector<Track> tracks;       ///< global ids, after selection
  std::vector<AnchorPlan> plans;   ///< one per GoP, stream order
};

/// Runs the cascade: per chunk, features -> BlobNet -> CCL -> SORT -> anchor
/// selection; anchors from every chunk go through one batched detector
/// consumer; labels are then propagated per chunk and the shards merged in
/// frame order with track ids made global.
PipelineOutput run_pipeline(const MetadataStream& stream, const Scene& scene, const BlobNetModel& model,
                            const PipelineConfig& config);

/// Stage one only (features, BlobNet, CCL, SORT), chunk by chunk, with
/// global track ids.
std::vector<Track> track_stream(const MetadataStream& stream, const BlobNetModel& model, const PipelineConfig& config);

/// Report as JSON text. Wall-clock fields are grouped under "timing".
std::string report_to_json(const PipelineReport& report, int indent = 2);

}  // namespace cova
