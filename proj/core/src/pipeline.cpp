#include "cova/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <exception>
#include <future>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

#include "cova/errors.hpp"
#include "cova/features.hpp"
#include "json.hpp"

namespace cova {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct DetectionRequest {
  std::vector<std::int64_t> frames;
  std::promise<std::vector<std::vector<Detection>>> reply;
};

/// Bounded multi-producer queue drained by one batching consumer.
class DetectorQueue {
 public:
  explicit DetectorQueue(std::size_t capacity) : capacity_(capacity) {}

  std::future<std::vector<std::vector<Detection>>> submit(std::vector<std::int64_t> frames) {
    DetectionRequest req{std::move(frames), {}};
    auto fut = req.reply.get_future();
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_; });
    items_.push_back(std::move(req));
    not_empty_.notify_one();
    return fut;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
  }

  /// Takes queued requests until `max_frames` frames are gathered. Returns
  /// an empty batch once closed and drained.
  std::vector<DetectionRequest> take(std::size_t max_frames) {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    std::vector<DetectionRequest> batch;
    std::size_t frames = 0;
    while (!items_.empty() && (batch.empty() || frames + items_.front().frames.size() <= max_frames)) {
      frames += items_.front().frames.size();
      batch.push_back(std::move(items_.front()));
      items_.pop_front();
    }
    not_full_.notify_all();
    return batch;
  }

 private:
  std::size_t capacity_;
  std::mutex mu_;
  std::condition_variable not_full_, not_empty_;
  std::deque<DetectionRequest> items_;
  bool closed_ = false;
};

struct ChunkResult {
  FrameAnalysis analysis;
  std::vector<Track> tracks;
  std::vector<AnchorPlan> plans;
  int id_space = 0;  ///< local track ids are in [0, id_space)
  std::int64_t blobs = 0, detections = 0, splits = 0, conflicts = 0, statics = 0, unknown = 0, clamps = 0;
  StageTimes times;
};

struct StageOne {
  std::vector<Track> tracks;
  std::int64_t blobs = 0, clamps = 0;
};

/// Features -> BlobNet -> CCL -> SORT over one chunk's frames. `current` names
/// the frame being processed for diagnostics.
StageOne track_frames(std::span<const FrameMeta> frames, const BlobNetModel& model, const PipelineConfig& cfg,
                      StageTimes& times, std::int64_t& current) {
  StageOne r;
  const Embedding emb = model.embedding();
  const int depth = model.arch().temporal_depth;
  SortTracker tracker(cfg.tracker);
  for (std::size_t pos = 0; pos < frames.size(); ++pos) {
    current = frames[pos].frame_index;
    auto t0 = Clock::now();
    const auto window = window_ending_at(frames, pos, depth);
    const auto mask = threshold_mask(blobnet_forward(model, build_features(window, emb)), cfg.train.threshold);
    times.blobnet_s += seconds_since(t0);
    t0 = Clock::now();
    const auto blobs = connected_components(mask, current, cfg.min_blob_cells);
    r.blobs += static_cast<std::int64_t>(blobs.size());
    times.ccl_s += seconds_since(t0);
    t0 = Clock::now();
    tracker.step(current, blobs);
    times.tracking_s += seconds_since(t0);
  }
  current = -1;
  r.clamps = tracker.clamp_warnings();
  r.tracks = tracker.finish();
  return r;
}

std::string chunk_context(const Chunk& chunk, std::int64_t frame) {
  std::string where = "chunk " + std::to_string(chunk.chunk_index);
  if (frame >= 0) where += ", frame " + std::to_string(frame);
  return where;
}

ChunkResult process_chunk(const Chunk& chunk, std::span<const FrameMeta> frames, const BlobNetModel& model,
                          const PipelineConfig& cfg, DetectorQueue& detector) {
  ChunkResult r;
  std::int64_t current = -1;
  try {
    auto stage_one = track_frames(frames, model, cfg, r.times, current);
    r.blobs = stage_one.blobs;
    r.clamps = stage_one.clamps;
    r.tracks = std::move(stage_one.tracks);

    auto t0 = Clock::now();
    r.plans = select_all(chunk.gops, r.tracks);
    r.times.selection_s += seconds_since(t0);

    std::set<std::int64_t> anchor_set;
    for (const auto& p : r.plans) anchor_set.insert(p.anchor_frames.begin(), p.anchor_frames.end());
    std::vector<std::int64_t> anchors(anchor_set.begin(), anchor_set.end());
    t0 = Clock::now();
    auto found = anchors.empty() ? std::vector<std::vector<Detection>>{} : detector.submit(anchors).get();
    r.times.detection_s += seconds_since(t0);

    t0 = Clock::now();
    std::vector<AnchorDetections> per_anchor;
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      r.detections += static_cast<std::int64_t>(found[i].size());
      per_anchor.push_back(AnchorDetections{anchors[i], std::move(found[i])});
    }
    int next_id = 0;
    for (const auto& t : r.tracks) next_id = std::max(next_id, t.track_id + 1);
    const LabeledTracks labeled = label_tracks(r.tracks, per_anchor, cfg.propagation, next_id);
    const auto statics = static_merge(labeled.unmatched, cfg.propagation.static_iou, next_id);
    r.analysis = propagate_labels(labeled, statics, chunk.first_frame(), chunk.frame_count(), cfg.propagation);
    r.tracks = labeled.tracks;
    r.splits = labeled.splits;
    r.conflicts = labeled.label_conflicts;
    for (const auto& s : statics)
      if (s.anchor_count > 1) ++r.statics;
    for (const auto& t : labeled.tracks)
      if (!labeled.labels.contains(t.track_id)) ++r.unknown;
    r.id_space = next_id;
    r.times.propagation_s += seconds_since(t0);
  } catch (const ConfigError& e) {
    throw ConfigError(chunk_context(chunk, current) + ": " + e.what());
  } catch (const std::exception& e) {
    throw DataError(chunk_context(chunk, current) + ": " + e.what());
  }
  return r;
}

}  // namespace

void PipelineConfig::validate() const {
  if (worker_count < 1) throw ConfigError("worker_count must be >= 1");
  if (chunk_count < 1) throw ConfigError("chunk_count must be >= 1");
  if (min_blob_cells < 1) throw ConfigError("min_blob_cells must be >= 1");
  if (detector_batch < 1) throw ConfigError("detector_batch must be >= 1");
  if (queue_capacity < 1) throw ConfigError("queue_capacity must be >= 1");
  if (tracker.iou_min < 0.0 || tracker.iou_min > 1.0) throw ConfigError("tracker.iou_min must be in [0,1]");
  if (tracker.max_age < 0) throw ConfigError("tracker.max_age must be >= 0");
  if (tracker.min_hits < 1) throw ConfigError("tracker.min_hits must be >= 1");
  train.validate();
  propagation.validate();
  oracle.validate();
}

PipelineOutput run_pipeline(const MetadataStream& stream, const Scene& scene, const BlobNetModel& model,
                            const PipelineConfig& config) {
  config.validate();
  const auto wall0 = Clock::now();
  PipelineOutput out;
  out.analysis.first_frame = 0;

  const auto chunks = chunk_at_iframes(stream, config.chunk_count);
  const std::int64_t total = static_cast<std::int64_t>(stream.frames.size());
  OracleNoise noise = config.oracle;
  noise.seed = config.seed;

  DetectorQueue queue(static_cast<std::size_t>(config.queue_capacity));
  std::atomic<std::int64_t> batches{0};
  std::thread consumer([&] {
    for (;;) {
      auto batch = queue.take(static_cast<std::size_t>(config.detector_batch));
      if (batch.empty()) return;
      ++batches;
      std::vector<std::int64_t> frames;
      for (const auto& req : batch) frames.insert(frames.end(), req.frames.begin(), req.frames.end());
      try {
        auto found = detect_batch(scene, frames, noise);
        std::size_t k = 0;
        for (auto& req : batch) {
          std::vector<std::vector<Detection>> mine;
          for (std::size_t i = 0; i < req.frames.size(); ++i) mine.push_back(std::move(found[k++]));
          req.reply.set_value(std::move(mine));
        }
      } catch (...) {
        for (auto& req : batch) req.reply.set_exception(std::current_exception());
      }
    }
  });

  std::vector<ChunkResult> results(chunks.size());
  std::vector<std::exception_ptr> errors(chunks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= chunks.size()) return;
      const auto& c = chunks[i];
      const auto begin = static_cast<std::size_t>(c.first_frame());
      const std::span<const FrameMeta> frames(stream.frames.data() + begin, static_cast<std::size_t>(c.frame_count()));
      try {
        results[i] = process_chunk(c, frames, model, config, queue);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    const int n = std::min<int>(config.worker_count, std::max<int>(1, static_cast<int>(chunks.size())));
    std::vector<std::thread> pool;
    for (int w = 1; w < n; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  }
  queue.close();
  consumer.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  // Deterministic merge in chunk order with global track ids.
  auto& rep = out.report;
  int offset = 0;
  out.analysis.frames.reserve(static_cast<std::size_t>(total));
  for (auto& r : results) {
    for (auto& frame : r.analysis.frames) {
      for (auto& o : frame) o.track_id += offset;
      out.analysis.frames.push_back(std::move(frame));
    }
    for (auto& t : r.tracks) {
      t.track_id += offset;
      out.tracks.push_back(std::move(t));
    }
    for (auto& p : r.plans) {
      std::map<int, std::int64_t> remapped;
      for (const auto& [id, f] : p.track_anchor) remapped[id + offset] = f;
      p.track_anchor = std::move(remapped);
      out.plans.push_back(std::move(p));
    }
    offset += r.id_space;
    rep.blobs += r.blobs;
    rep.detections += r.detections;
    rep.splits += r.splits;
    rep.label_conflicts += r.conflicts;
    rep.static_tracks += r.statics;
    rep.unknown_tracks += r.unknown;
    rep.clamp_warnings += r.clamps;
    rep.stage_times.blobnet_s += r.times.blobnet_s;
    rep.stage_times.ccl_s += r.times.ccl_s;
    rep.stage_times.tracking_s += r.times.tracking_s;
    rep.stage_times.selection_s += r.times.selection_s;
    rep.stage_times.detection_s += r.times.detection_s;
    rep.stage_times.propagation_s += r.times.propagation_s;
  }
  rep.selection = make_report(out.plans, total);
  rep.effective_decode_speedup = rep.selection.decoded_frames > 0
                                     ? static_cast<double>(total) / static_cast<double>(rep.selection.decoded_frames)
                                     : std::numeric_limits<double>::infinity();
  rep.chunk_count = static_cast<int>(chunks.size());
  rep.frames_processed = total;
  rep.tracks = static_cast<std::int64_t>(out.tracks.size());
  rep.detector_batches = batches.load();
  rep.wall_s = seconds_since(wall0);
  rep.metadata_fps = rep.wall_s > 0.0 ? static_cast<double>(total) / rep.wall_s : 0.0;
  return out;
}

std::vector<Track> track_stream(const MetadataStream& stream, const BlobNetModel& model, const PipelineConfig& config) {
  config.validate();
  std::vector<Track> out;
  int offset = 0;
  for (const auto& c : chunk_at_iframes(stream, config.chunk_count)) {
    const std::span<const FrameMeta> frames(stream.frames.data() + static_cast<std::size_t>(c.first_frame()),
                                            static_cast<std::size_t>(c.frame_count()));
    StageTimes times;
    std::int64_t current = -1;
    StageOne r;
    try {
      r = track_frames(frames, model, config, times, current);
    } catch (const std::exception& e) {
      throw DataError(chunk_context(c, current) + ": " + e.what());
    }
    int id_space = 0;
    for (auto& t : r.tracks) {
      id_space = std::max(id_space, t.track_id + 1);
      t.track_id += offset;
      out.push_back(std::move(t));
    }
    offset += id_space;
  }
  return out;
}

std::string report_to_json(const PipelineReport& r, int indent) {
  using nlohmann::json;
  auto finite_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j{
      {"total_frames", r.selection.total_frames},
      {"decoded_frames", r.selection.decoded_frames},
      {"anchor_frames", r.selection.anchor_frames},
      {"decode_filtration_rate", r.selection.decode_filtration_rate},
      {"inference_filtration_rate", r.selection.inference_filtration_rate},
      {"effective_decode_speedup", finite_or_null(r.effective_decode_speedup)},
      {"chunks", r.chunk_count},
      {"stage_frames",
       {{"blobnet", r.frames_processed},
        {"tracking", r.frames_processed},
        {"decoded", r.selection.decoded_frames},
        {"detector", r.selection.anchor_frames}}},
      {"blobs", r.blobs},
      {"tracks", r.tracks},
      {"detections", r.detections},
      {"splits", r.splits},
      {"label_conflicts", r.label_conflicts},
      {"static_tracks", r.static_tracks},
      {"unknown_tracks", r.unknown_tracks},
      {"kalman_clamp_warnings", r.clamp_warnings},
      {"timing",
       {{"wall_s", r.wall_s},
        {"metadata_fps", r.metadata_fps},
        {"detector_batches", r.detector_batches},
        {"stage_s",
         {{"blobnet", r.stage_times.blobnet_s},
          {"ccl", r.stage_times.ccl_s},
          {"tracking", r.stage_times.tracking_s},
          {"selection", r.stage_times.selection_s},
          {"detection_wait", r.stage_times.detection_s},
          {"propagation", r.stage_times.propagation_s}}},
        {"note", "host CPU metadata throughput; not comparable to GPU decoder numbers"}}},
  };
  return j.dump(indent);
}

}  // namespace cova
