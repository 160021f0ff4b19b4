#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "cova/metadata.hpp"
#include "cova/tracking.hpp"

namespace cova {

struct AnchorPlan {
  int gop_index = 0;
  std::set<std::int64_t> anchor_frames;
  /// Anchors plus every frame they depend on.
  std::set<std::int64_t> decode_frames;
  /// track_id -> anchor frame chosen for it.
  std::map<int, std::int64_t> track_anchor;

  friend bool operator==(const AnchorPlan&, const AnchorPlan&) = default;
};

struct SelectionReport {
  std::int64_t total_frames = 0;
  std::int64_t decoded_frames = 0;
  std::int64_t anchor_frames = 0;
  double decode_filtration_rate = 1.0;
  double inference_filtration_rate = 1.0;
};

/// Track-aware anchor selection for one GoP.
///
/// Only tracks that end inside `gop` and have no anchor yet are considered.
/// Frames are visited in order; the latest frame where a considered track
/// starts is the candidate, and every track end commits the current
/// candidate as an anchor. Tracks that began in an earlier GoP start at the
/// GoP's first frame. Served tracks get `anchor_assigned` set.
AnchorPlan select_anchors(const GoP& gop, std::span<Track> tracks);

/// Runs select_anchors over every GoP in order.
std::vector<AnchorPlan> select_all(std::span<const GoP> gops, std::span<Track> tracks);

SelectionReport make_report(std::span<const AnchorPlan> plans, std::int64_t total_frames);

}  // namespace cova
