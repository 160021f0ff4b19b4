#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "cova/geometry.hpp"

namespace cova {

// ---------------------------------------------------------------------------
// Blobs

struct Blob {
  std::int64_t frame_index = 0;
  Box bbox_mb;  ///< macroblock units
  Box bbox_px;  ///< exactly 16 * bbox_mb
  int cells = 0;

  friend bool operator==(const Blob&, const Blob&) = default;
};

/// 8-connected component labels: 0 is background, components are numbered
/// 1..n in raster order of their first cell.
Grid<int> label_components(const BinaryGrid& bitmap);

/// One blob per 8-connected component with at least `min_cells` cells, in
/// raster order of each component's first cell.
std::vector<Blob> connected_components(const BinaryGrid& bitmap, std::int64_t frame_index = 0, int min_cells = 2);

// ---------------------------------------------------------------------------
// Assignment

struct Assignment {
  std::vector<std::pair<int, int>> pairs;  ///< (row, col), sorted by row
  double cost = 0.0;
};

/// Minimum-cost one-to-one assignment of min(rows, cols) pairs. Among
/// optimal assignments the lexicographically smallest (row, col) sequence is
/// returned. Throws InputError on non-finite costs.
Assignment hungarian(const Grid<double>& cost);

// ---------------------------------------------------------------------------
// Kalman box filter (constant velocity over centre, area and aspect ratio)

struct KalmanParams {
  std::array<double, 4> measurement_noise{1.0, 1.0, 10.0, 10.0};
  std::array<double, 7> process_noise{1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 1e-4};
  std::array<double, 7> initial_covariance{10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4};
  double min_scale = 1e-6;
};

/// State (u, v, s, r, du, dv, ds): box centre, area, aspect ratio and velocities.
struct KalmanBoxState {
  std::array<double, 7> mean{};
  std::array<double, 49> covariance{};  ///< row-major 7x7
  int frames_since_update = 0;
  int hit_streak = 0;
  int clamp_count = 0;  ///< times the area had to be clamped after a predict
};

std::array<double, 4> box_to_measurement(const Box& b);
Box measurement_to_box(double u, double v, double s, double r);
Box state_box(const KalmanBoxState& state);

KalmanBoxState kalman_init(const Box& box, const KalmanParams& params = {});
KalmanBoxState kalman_predict(KalmanBoxState state, const KalmanParams& params = {});
KalmanBoxState kalman_update(KalmanBoxState state, const Box& measured, const KalmanParams& params = {});

// ---------------------------------------------------------------------------
// Tracks

enum class TrackStatus : std::uint8_t { Tentative, Confirmed, Dead };

struct Track {
  int track_id = 0;
  TrackStatus status = TrackStatus::Tentative;
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;
  /// One pixel box per frame in [start_frame, end_frame].
  std::vector<Box> boxes;
  bool anchor_assigned = false;

  bool covers(std::int64_t frame) const noexcept { return frame >= start_frame && frame <= end_frame; }
  const Box& box_at(std::int64_t frame) const { return boxes.at(static_cast<std::size_t>(frame - start_frame)); }

  friend bool operator==(const Track&, const Track&) = default;
};

struct SortParams {
  double iou_min = 0.3;
  int max_age = 3;
  int min_hits = 2;
  KalmanParams kalman;
};

/// SORT: Kalman prediction, 1-IoU Hungarian association, track birth and death.
///
/// Emitted tracks start at the frame they were confirmed (the min_hits-th
/// match) and end at their last matched frame. Frames inside that span with
/// no matching blob carry the predicted box.
class SortTracker {
 public:
  explicit SortTracker(SortParams params = {});

  /// Processes the blobs of `frame`. Frames must strictly increase.
  void step(std::int64_t frame, std::span<const Blob> blobs);

  /// Terminates all live tracks and returns every confirmed track, sorted
  /// by (start_frame, track_id). The tracker is empty afterwards.
  std::vector<Track> finish();

  /// Live tracks (tentative and confirmed) as of the last step.
  std::vector<Track> live_tracks() const;
  /// Confirmed tracks that have already died.
  const std::vector<Track>& finished_tracks() const noexcept { return finished_; }
  int clamp_warnings() const noexcept { return clamp_warnings_; }
  const SortParams& params() const noexcept { return params_; }

 private:
  struct Live {
    int id = 0;
    KalmanBoxState kf;
    int hits = 0;
    std::int64_t first_frame = 0;
    std::int64_t last_match = 0;
    std::int64_t confirm_frame = -1;
    std::vector<Box> history;  ///< from first_frame to the current frame
  };

  Track emit(const Live& t, TrackStatus status) const;

  SortParams params_;
  std::vector<Live> live_;
  std::vector<Track> finished_;
  std::int64_t last_frame_ = -1;
  bool started_ = false;
  int next_id_ = 0;
  int clamp_warnings_ = 0;
};

/// Convenience wrapper mirroring one tracker step.
void sort_step(SortTracker& tracker, std::int64_t frame, std::span<const Blob> blobs);

/// JSON Lines: a header line, then one track per line.
void write_tracks(const std::vector<Track>& tracks, const std::filesystem::path& path);
std::vector<Track> read_tracks(const std::filesystem::path& path);

}  // namespace cova
