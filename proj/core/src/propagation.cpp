#include "cova/propagation.hpp"

#include <algorithm>
#include <tuple>

#include "cova/errors.hpp"

namespace cova {

const char* source_name(ObjectSource s) noexcept {
  switch (s) {
    case ObjectSource::Propagated: return "propagated";
    case ObjectSource::AnchorDetected: return "anchor_detected";
    case ObjectSource::StaticMerged: return "static_merged";
    case ObjectSource::GroundTruth: return "ground_truth";
  }
  return "propagated";
}

ObjectSource parse_source(const std::string& name) {
  for (auto s : {ObjectSource::Propagated, ObjectSource::AnchorDetected, ObjectSource::StaticMerged,
                 ObjectSource::GroundTruth})
    if (name == source_name(s)) return s;
  throw ParseError("unknown object source '" + name + "'");
}

void PropagationParams::validate() const {
  if (!(iou_threshold >= 0.0 && iou_threshold < 1.0)) throw ConfigError("iou_threshold must be in [0,1)");
  if (!(split_containment > 0.0 && split_containment <= 1.0)) throw ConfigError("split_containment must be in (0,1]");
  if (!(static_iou >= 0.0 && static_iou < 1.0)) throw ConfigError("static_iou must be in [0,1)");
}

AssociationResult associate(std::span<const Box> blobs, std::span<const Detection> detections, double iou_threshold) {
  std::vector<std::tuple<double, int, int>> pairs;
  for (int i = 0; i < static_cast<int>(blobs.size()); ++i)
    for (int j = 0; j < static_cast<int>(detections.size()); ++j) {
      const double v = iou(blobs[static_cast<std::size_t>(i)], detections[static_cast<std::size_t>(j)].bbox);
      if (v > iou_threshold) pairs.emplace_back(v, i, j);
    }
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    return std::tie(std::get<1>(a), std::get<2>(a)) < std::tie(std::get<1>(b), std::get<2>(b));
  });
  AssociationResult r;
  std::vector<char> blob_used(blobs.size(), 0), det_used(detections.size(), 0);
  for (const auto& [v, i, j] : pairs) {
    if (blob_used[static_cast<std::size_t>(i)] || det_used[static_cast<std::size_t>(j)]) continue;
    blob_used[static_cast<std::size_t>(i)] = det_used[static_cast<std::size_t>(j)] = 1;
    r.matches.emplace_back(i, j);
  }
  for (int i = 0; i < static_cast<int>(blobs.size()); ++i)
    if (!blob_used[static_cast<std::size_t>(i)]) r.unmatched_blobs.push_back(i);
  for (int j = 0; j < static_cast<int>(detections.size()); ++j)
    if (!det_used[static_cast<std::size_t>(j)]) r.unmatched_detections.push_back(j);
  return r;
}

std::vector<Track> split_blob(const Track& track, std::int64_t anchor_frame, std::span<const Detection> detections,
                              int& next_track_id) {
  std::vector<Track> out;
  if (detections.size() < 2 || !track.covers(anchor_frame)) return out;
  const Box ref = track.box_at(anchor_frame);
  if (ref.w <= 0.0 || ref.h <= 0.0) return out;
  for (const auto& d : detections) {
    const double fx = (d.bbox.x - ref.x) / ref.w, fy = (d.bbox.y - ref.y) / ref.h;
    const double fw = d.bbox.w / ref.w, fh = d.bbox.h / ref.h;
    Track sub;
    sub.track_id = next_track_id++;
    sub.status = track.status;
    sub.start_frame = track.start_frame;
    sub.end_frame = track.end_frame;
    sub.anchor_assigned = track.anchor_assigned;
    sub.boxes.reserve(track.boxes.size());
    for (const auto& b : track.boxes) sub.boxes.push_back(Box{b.x + fx * b.w, b.y + fy * b.h, fw * b.w, fh * b.h});
    out.push_back(std::move(sub));
  }
  return out;
}

std::vector<StaticTrack> static_merge(std::span<const AnchorDetections> anchors, double iou_threshold,
                                      int& next_track_id) {
  struct Open {
    StaticTrack track;
    Box last_box;
    std::size_t last_anchor = 0;
  };
  std::vector<Open> chains;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    if (a > 0 && anchors[a].frame_index <= anchors[a - 1].frame_index)
      throw SequencingError("anchor frames must be sorted and distinct");
    const auto& dets = anchors[a].detections;
    // Candidate links from chains ending on the previous anchor, best IoU first.
    std::vector<std::tuple<double, std::size_t, std::size_t>> links;
    for (std::size_t c = 0; c < chains.size(); ++c) {
      if (a == 0 || chains[c].last_anchor != a - 1) continue;
      for (std::size_t j = 0; j < dets.size(); ++j) {
        if (dets[j].label != chains[c].track.label) continue;
        const double v = iou(chains[c].last_box, dets[j].bbox);
        if (v > iou_threshold) links.emplace_back(v, c, j);
      }
    }
    std::sort(links.begin(), links.end(), [](const auto& x, const auto& y) {
      if (std::get<0>(x) != std::get<0>(y)) return std::get<0>(x) > std::get<0>(y);
      return std::tie(std::get<1>(x), std::get<2>(x)) < std::tie(std::get<1>(y), std::get<2>(y));
    });
    std::vector<char> det_used(dets.size(), 0), chain_used(chains.size(), 0);
    for (const auto& [v, c, j] : links) {
      if (chain_used[c] || det_used[j]) continue;
      chain_used[c] = det_used[j] = 1;
      chains[c].last_box = dets[j].bbox;
      chains[c].last_anchor = a;
      chains[c].track.last_frame = anchors[a].frame_index;
      ++chains[c].track.anchor_count;
    }
    for (std::size_t j = 0; j < dets.size(); ++j) {
      if (det_used[j]) continue;
      Open o;
      o.track.label = dets[j].label;
      o.track.bbox = dets[j].bbox;
      o.track.first_frame = o.track.last_frame = anchors[a].frame_index;
      o.track.anchor_count = 1;
      o.last_box = dets[j].bbox;
      o.last_anchor = a;
      chains.push_back(std::move(o));
    }
  }
  std::vector<StaticTrack> out;
  out.reserve(chains.size());
  for (auto& c : chains) {
    c.track.track_id = next_track_id++;
    out.push_back(std::move(c.track));
  }
  return out;
}

LabeledTracks label_tracks(std::vector<Track> tracks, std::span<const AnchorDetections> anchors,
                           const PropagationParams& params, int& next_track_id) {
  LabeledTracks out;
  std::map<int, std::vector<TrackLabel>> votes;

  for (const auto& anchor : anchors) {
    const std::int64_t frame = anchor.frame_index;
    const auto& dets = anchor.detections;
    std::vector<char> det_used(dets.size(), 0);

    // Splits: each detection is offered to the covering track it overlaps most.
    std::vector<std::size_t> covering;
    for (std::size_t i = 0; i < tracks.size(); ++i)
      if (tracks[i].covers(frame)) covering.push_back(i);
    std::map<std::size_t, std::vector<std::size_t>> held;
    for (std::size_t j = 0; j < dets.size(); ++j) {
      double best = 0.0;
      std::size_t owner = tracks.size();
      for (std::size_t i : covering) {
        const Box& b = tracks[i].box_at(frame);
        if (containment(dets[j].bbox, b) <= params.split_containment) continue;
        const double inter = intersection_area(dets[j].bbox, b);
        if (inter > best) {
          best = inter;
          owner = i;
        }
      }
      if (owner < tracks.size()) held[owner].push_back(j);
    }
    std::vector<std::size_t> retired;
    for (const auto& [i, js] : held) {
      if (js.size() < 2) continue;
      std::vector<Detection> parts;
      for (auto j : js) parts.push_back(dets[j]);
      auto subs = split_blob(tracks[i], frame, parts, next_track_id);
      for (std::size_t k = 0; k < subs.size(); ++k) {
        const Detection& d = parts[k];
        det_used[js[k]] = 1;
        votes[subs[k].track_id].push_back(TrackLabel{d.label, d.confidence, frame});
        out.anchor_matches[{frame, subs[k].track_id}] = d;
        tracks.push_back(std::move(subs[k]));
      }
      retired.push_back(i);
      ++out.splits;
    }
    if (!retired.empty()) {
      std::sort(retired.begin(), retired.end());
      std::vector<int> retired_ids;
      for (auto i : retired) retired_ids.push_back(tracks[i].track_id);
      for (auto it = retired.rbegin(); it != retired.rend(); ++it)
        tracks.erase(tracks.begin() + static_cast<std::ptrdiff_t>(*it));
      for (int id : retired_ids) {
        votes.erase(id);
        std::erase_if(out.anchor_matches, [id](const auto& kv) { return kv.first.second == id; });
      }
    }

    // Regular association of the remaining tracks and detections.
    std::vector<std::size_t> track_idx;
    std::vector<Box> boxes;
    for (std::size_t i = 0; i < tracks.size(); ++i)
      if (tracks[i].covers(frame) && !out.anchor_matches.contains({frame, tracks[i].track_id})) {
        track_idx.push_back(i);
        boxes.push_back(tracks[i].box_at(frame));
      }
    std::vector<std::size_t> det_idx;
    std::vector<Detection> free_dets;
    for (std::size_t j = 0; j < dets.size(); ++j)
      if (!det_used[j]) {
        det_idx.push_back(j);
        free_dets.push_back(dets[j]);
      }
    const auto assoc = associate(boxes, free_dets, params.iou_threshold);
    for (const auto& [bi, dj] : assoc.matches) {
      const Track& t = tracks[track_idx[static_cast<std::size_t>(bi)]];
      const Detection& d = free_dets[static_cast<std::size_t>(dj)];
      det_used[det_idx[static_cast<std::size_t>(dj)]] = 1;
      votes[t.track_id].push_back(TrackLabel{d.label, d.confidence, frame});
      out.anchor_matches[{frame, t.track_id}] = d;
    }
    AnchorDetections rest{frame, {}};
    for (std::size_t j = 0; j < dets.size(); ++j)
      if (!det_used[j]) rest.detections.push_back(dets[j]);
    out.unmatched.push_back(std::move(rest));
  }

  for (const auto& [id, vs] : votes) {
    if (vs.empty()) continue;
    const TrackLabel* best = &vs.front();
    for (const auto& v : vs) {
      if (v.label != vs.front().label) {
        ++out.label_conflicts;
        break;
      }
    }
    for (const auto& v : vs)
      if (v.confidence > best->confidence) best = &v;
    out.labels[id] = *best;
  }
  std::sort(tracks.begin(), tracks.end(), [](const Track& a, const Track& b) {
    return a.start_frame != b.start_frame ? a.start_frame < b.start_frame : a.track_id < b.track_id;
  });
  out.tracks = std::move(tracks);
  return out;
}

FrameAnalysis propagate_labels(const LabeledTracks& labeled, std::span<const StaticTrack> statics,
                               std::int64_t first_frame, std::int64_t frame_count, const PropagationParams& params) {
  FrameAnalysis fa;
  fa.first_frame = first_frame;
  fa.frames.resize(static_cast<std::size_t>(std::max<std::int64_t>(frame_count, 0)));
  const std::int64_t last_frame = first_frame + frame_count - 1;
  auto slot = [&](std::int64_t f) -> std::vector<AnalyzedObject>& {
    return fa.frames[static_cast<std::size_t>(f - first_frame)];
  };

  for (const auto& t : labeled.tracks) {
    const auto it = labeled.labels.find(t.track_id);
    if (it == labeled.labels.end() && params.drop_unknown) continue;
    const std::string label = it == labeled.labels.end() ? kUnknownLabel : it->second.label;
    const std::int64_t from = std::max(t.start_frame, first_frame), to = std::min(t.end_frame, last_frame);
    for (std::int64_t f = from; f <= to; ++f) {
      const auto m = labeled.anchor_matches.find({f, t.track_id});
      if (m != labeled.anchor_matches.end())
        slot(f).push_back(AnalyzedObject{t.track_id, m->second.label, m->second.bbox, ObjectSource::AnchorDetected});
      else
        slot(f).push_back(AnalyzedObject{t.track_id, label, t.box_at(f), ObjectSource::Propagated});
    }
  }
  for (const auto& s : statics) {
    const ObjectSource src = s.anchor_count > 1 ? ObjectSource::StaticMerged : ObjectSource::AnchorDetected;
    const std::int64_t from = std::max(s.first_frame, first_frame), to = std::min(s.last_frame, last_frame);
    for (std::int64_t f = from; f <= to; ++f) slot(f).push_back(AnalyzedObject{s.track_id, s.label, s.bbox, src});
  }
  return fa;
}

}  // namespace cova
