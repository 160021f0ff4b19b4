#include "cova/selection.hpp"

#include <algorithm>
#include <optional>

#include "cova/errors.hpp"

namespace cova {

AnchorPlan select_anchors(const GoP& gop, std::span<Track> tracks) {
  AnchorPlan plan;
  plan.gop_index = gop.gop_index;
  if (gop.frames.empty()) return plan;

  const std::int64_t first = gop.first_frame();
  std::vector<Track*> current;
  for (auto& t : tracks)
    if (!t.anchor_assigned && gop.contains(t.end_frame)) current.push_back(&t);
  if (current.empty()) return plan;

  std::vector<std::pair<std::int64_t, Track*>> starts, ends;
  for (Track* t : current) {
    starts.emplace_back(std::max(t->start_frame, first), t);
    ends.emplace_back(t->end_frame, t);
  }
  auto by_frame = [](const auto& a, const auto& b) { return a.first < b.first; };
  std::stable_sort(starts.begin(), starts.end(), by_frame);
  std::stable_sort(ends.begin(), ends.end(), by_frame);

  std::optional<int> candidate;  // position inside the GoP
  std::size_t si = 0, ei = 0;
  for (int pos = 0; pos < gop.size(); ++pos) {
    const std::int64_t frame = gop.frames[static_cast<std::size_t>(pos)].frame_index;
    while (si < starts.size() && starts[si].first == frame) {
      candidate = pos;
      ++si;
    }
    while (ei < ends.size() && ends[ei].first == frame) {
      Track* t = ends[ei].second;
      if (!candidate || t->start_frame > gop.frames[static_cast<std::size_t>(*candidate)].frame_index)
        throw InvariantError("track " + std::to_string(t->track_id) + " ends at frame " + std::to_string(frame) +
                             " without a preceding start event");
      const std::int64_t anchor = gop.frames[static_cast<std::size_t>(*candidate)].frame_index;
      if (plan.anchor_frames.insert(anchor).second) {
        plan.decode_frames.insert(anchor);
        for (int dep : dependent_frames(gop, *candidate))
          plan.decode_frames.insert(gop.frames[static_cast<std::size_t>(dep)].frame_index);
      }
      plan.track_anchor[t->track_id] = anchor;
      t->anchor_assigned = true;
      ++ei;
    }
  }
  if (ei != ends.size()) throw InvariantError("terminating track left without an anchor");
  return plan;
}

std::vector<AnchorPlan> select_all(std::span<const GoP> gops, std::span<Track> tracks) {
  std::vector<AnchorPlan> plans;
  plans.reserve(gops.size());
  for (const auto& g : gops) plans.push_back(select_anchors(g, tracks));
  return plans;
}

SelectionReport make_report(std::span<const AnchorPlan> plans, std::int64_t total_frames) {
  std::set<std::int64_t> decoded, anchors;
  for (const auto& p : plans) {
    decoded.insert(p.decode_frames.begin(), p.decode_frames.end());
    anchors.insert(p.anchor_frames.begin(), p.anchor_frames.end());
  }
  SelectionReport r;
  r.total_frames = total_frames;
  r.decoded_frames = static_cast<std::int64_t>(decoded.size());
  r.anchor_frames = static_cast<std::int64_t>(anchors.size());
  if (total_frames > 0) {
    r.decode_filtration_rate = 1.0 - static_cast<double>(r.decoded_frames) / static_cast<double>(total_frames);
    r.inference_filtration_rate = 1.0 - static_cast<double>(r.anchor_frames) / static_cast<double>(total_frames);
  }
  return r;
}

}  // namespace cova
