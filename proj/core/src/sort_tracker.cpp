#include <algorithm>

#include "cova/errors.hpp"
#include "cova/tracking.hpp"

namespace cova {

SortTracker::SortTracker(SortParams params) : params_(params) {
  if (params.iou_min < 0.0 || params.iou_min > 1.0) throw ConfigError("iou_min must be in [0,1]");
  if (params.max_age < 0) throw ConfigError("max_age must be >= 0");
  if (params.min_hits < 1) throw ConfigError("min_hits must be >= 1");
}

Track SortTracker::emit(const Live& t, TrackStatus status) const {
  Track out;
  out.track_id = t.id;
  out.status = status;
  out.start_frame = t.confirm_frame;
  out.end_frame = t.last_match;
  const auto begin = t.history.begin() + (t.confirm_frame - t.first_frame);
  const auto end = t.history.begin() + (t.last_match - t.first_frame) + 1;
  out.boxes.assign(begin, end);
  return out;
}

void SortTracker::step(std::int64_t frame, std::span<const Blob> blobs) {
  if (started_ && frame <= last_frame_)
    throw SequencingError("tracker frames must strictly increase: got " + std::to_string(frame) + " after " +
                          std::to_string(last_frame_));
  for (const auto& b : blobs)
    if (b.frame_index != frame) throw SequencingError("blob from frame " + std::to_string(b.frame_index) +
                                                      " passed to tracker step for frame " + std::to_string(frame));

  // Predict every live track forward to `frame`, filling skipped frames.
  std::vector<Box> predicted;
  predicted.reserve(live_.size());
  for (auto& t : live_) {
    const std::int64_t steps = frame - last_frame_;
    for (std::int64_t s = 0; s < steps; ++s) {
      const int before = t.kf.clamp_count;
      t.kf = kalman_predict(t.kf, params_.kalman);
      clamp_warnings_ += t.kf.clamp_count - before;
      t.history.push_back(state_box(t.kf));
    }
    predicted.push_back(t.history.back());
  }

  std::vector<int> blob_track(blobs.size(), -1);
  std::vector<char> track_matched(live_.size(), 0);
  if (!live_.empty() && !blobs.empty()) {
    Grid<double> cost(static_cast<int>(live_.size()), static_cast<int>(blobs.size()));
    for (std::size_t i = 0; i < live_.size(); ++i)
      for (std::size_t j = 0; j < blobs.size(); ++j)
        cost.at(static_cast<int>(i), static_cast<int>(j)) = 1.0 - iou(predicted[i], blobs[j].bbox_px);
    for (const auto& [i, j] : hungarian(cost).pairs) {
      if (iou(predicted[static_cast<std::size_t>(i)], blobs[static_cast<std::size_t>(j)].bbox_px) < params_.iou_min)
        continue;
      blob_track[static_cast<std::size_t>(j)] = i;
      track_matched[static_cast<std::size_t>(i)] = 1;
    }
  }

  for (std::size_t j = 0; j < blobs.size(); ++j) {
    const int i = blob_track[j];
    if (i < 0) continue;
    auto& t = live_[static_cast<std::size_t>(i)];
    t.kf = kalman_update(t.kf, blobs[j].bbox_px, params_.kalman);
    t.history.back() = blobs[j].bbox_px;
    t.last_match = frame;
    ++t.hits;
    if (t.confirm_frame < 0 && t.hits >= params_.min_hits) t.confirm_frame = frame;
  }

  std::vector<Live> survivors;
  survivors.reserve(live_.size() + blobs.size());
  for (std::size_t i = 0; i < live_.size(); ++i) {
    auto& t = live_[i];
    if (!track_matched[i] && frame - t.last_match > params_.max_age) {
      if (t.confirm_frame >= 0) finished_.push_back(emit(t, TrackStatus::Dead));
      continue;
    }
    survivors.push_back(std::move(t));
  }
  for (std::size_t j = 0; j < blobs.size(); ++j) {
    if (blob_track[j] >= 0) continue;
    Live t;
    t.id = next_id_++;
    t.kf = kalman_init(blobs[j].bbox_px, params_.kalman);
    t.kf.hit_streak = 1;
    t.hits = 1;
    t.first_frame = frame;
    t.last_match = frame;
    if (params_.min_hits <= 1) t.confirm_frame = frame;
    t.history.push_back(blobs[j].bbox_px);
    survivors.push_back(std::move(t));
  }
  live_ = std::move(survivors);
  last_frame_ = frame;
  started_ = true;
}

std::vector<Track> SortTracker::finish() {
  for (const auto& t : live_)
    if (t.confirm_frame >= 0) finished_.push_back(emit(t, TrackStatus::Dead));
  live_.clear();
  std::vector<Track> out = std::move(finished_);
  finished_.clear();
  std::sort(out.begin(), out.end(), [](const Track& a, const Track& b) {
    return a.start_frame != b.start_frame ? a.start_frame < b.start_frame : a.track_id < b.track_id;
  });
  return out;
}

std::vector<Track> SortTracker::live_tracks() const {
  std::vector<Track> out;
  for (const auto& t : live_) {
    Track tr;
    tr.track_id = t.id;
    tr.status = t.confirm_frame >= 0 ? TrackStatus::Confirmed : TrackStatus::Tentative;
    tr.start_frame = t.first_frame;
    tr.end_frame = t.first_frame + static_cast<std::int64_t>(t.history.size()) - 1;
    tr.boxes = t.history;
    out.push_back(std::move(tr));
  }
  return out;
}

void sort_step(SortTracker& tracker, std::int64_t frame, std::span<const Blob> blobs) { tracker.step(frame, blobs); }

}  // namespace cova
