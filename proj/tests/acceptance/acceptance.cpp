// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "cova/analysis_io.hpp"
#include "cova/blobnet.hpp"
#include "cova/mog.hpp"
#include "cova/pipeline.hpp"
#include "cova/query.hpp"
#include "cova/selection.hpp"
#include "cova/tracking.hpp"
#include "cova/training.hpp"
#include "oracles.hpp"

using namespace cova;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (ok) return;
    if (pass) detail.clear();
    pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
  void note(const std::string& s) {
    if (!pass) return;
    if (!detail.empty()) detail += ", ";
    detail += s;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// --- anchor selection --------------------------------------------------------

MetadataStream gop_stream(int n, int gop_len, const std::set<int>& b_positions = {}) {
  MetadataStream s;
  s.header = StreamHeader{1, "synthetic-h264", 16, 16, gop_len};
  for (int t = 0; t < n; ++t) {
    FrameMeta f;
    f.frame_index = t;
    f.gop_index = t / gop_len;
    const int pos = t % gop_len;
    f.type = pos == 0 ? FrameType::I : (b_positions.count(pos) && pos + 1 < gop_len && t + 1 < n ? FrameType::B : FrameType::P);
    const MbType mb = f.type == FrameType::I ? MbType::I : (f.type == FrameType::B ? MbType::B : MbType::P);
    f.grid = Grid<MacroblockMeta>(1, 1, MacroblockMeta{mb, 0, {}});
    s.frames.push_back(std::move(f));
  }
  return s;
}

Track span_track(int id, std::int64_t start, std::int64_t end) {
  Track t;
  t.track_id = id;
  t.status = TrackStatus::Dead;
  t.start_frame = start;
  t.end_frame = end;
  t.boxes.assign(static_cast<std::size_t>(end - start + 1), Box{0, 0, 16, 16});
  return t;
}

Outcome anchor_selection() {
  Outcome o;
  using Set = std::set<std::int64_t>;
  {
    // Three objects, the last appearing on the third frame of the GoP and all
    // still present there: that frame is the single anchor.
    const auto s = gop_stream(12, 6);
    const auto gops = split_gops(s);
    std::vector<Track> tracks{span_track(0, 2, 9), span_track(1, 7, 10), span_track(2, 8, 11)};
    const auto p = select_anchors(gops[1], tracks);
    o.require(p.anchor_frames == Set{8} && p.decode_frames == Set{6, 7, 8}, "all-present trace");
  }
  {
    const auto s = gop_stream(10, 10);
    const auto gops = split_gops(s);
    std::vector<Track> tracks{span_track(0, 1, 3), span_track(1, 2, 8)};
    const auto p = select_anchors(gops[0], tracks);
    o.require(p.anchor_frames == Set{2} && p.decode_frames == Set{0, 1, 2}, "overlapping pair trace");
  }
  {
    const auto s = gop_stream(20, 10);
    const auto gops = split_gops(s);
    std::vector<Track> tracks{span_track(0, 4, 10)};
    const auto p = select_anchors(gops[1], tracks);
    o.require(p.anchor_frames == Set{10} && p.decode_frames == Set{10}, "I-frame trace");
  }

  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<int> len(1, 300), gop(1, 30);
  int violations = 0;
  std::size_t tracks_seen = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = len(rng);
    const auto s = gop_stream(n, gop(rng), trial % 3 == 0 ? std::set<int>{1, 3, 5, 7} : std::set<int>{});
    const auto gops = split_gops(s);
    std::uniform_int_distribution<int> count(0, 20), frame(0, n - 1);
    std::vector<Track> tracks;
    for (int i = count(rng); i > 0; --i) {
      int a = frame(rng), b = frame(rng);
      if (a > b) std::swap(a, b);
      tracks.push_back(span_track(static_cast<int>(tracks.size()), a, b));
    }
    const auto plans = select_all(gops, tracks);
    for (const auto& t : tracks) {
      ++tracks_seen;
      int owners = 0;
      for (const auto& p : plans) {
        const auto it = p.track_anchor.find(t.track_id);
        if (it == p.track_anchor.end()) continue;
        ++owners;
        if (!t.covers(it->second) || !p.anchor_frames.count(it->second) || !p.decode_frames.count(it->second)) ++violations;
      }
      if (owners != 1 || !t.anchor_assigned) ++violations;
    }
  }
  o.require(violations == 0, std::to_string(violations) + " coverage violations");
  o.note("3 traces, 1000 instances, " + std::to_string(tracks_seen) + " tracks covered");
  return o;
}

// --- hungarian -----------------------------------------------------------------

Outcome hungarian_optimality() {
  Outcome o;
  std::mt19937_64 rng(2718);
  std::uniform_int_distribution<int> dim(1, 7), units(0, 64 * 100);
  int mismatches = 0;
  for (int trial = 0; trial < 500; ++trial) {
    Grid<double> cost(dim(rng), dim(rng));
    // Multiples of 1/64: every partial sum is exact, so "equal" means bit-equal.
    for (auto& v : cost.data) v = units(rng) / 64.0;
    const auto got = hungarian(cost);
    double total = 0.0;
    std::set<int> rows, cols;
    for (auto [r, c] : got.pairs) {
      total += cost.at(r, c);
      rows.insert(r);
      cols.insert(c);
    }
    const bool complete = got.pairs.size() == static_cast<std::size_t>(std::min(cost.rows, cost.cols)) &&
                          rows.size() == got.pairs.size() && cols.size() == got.pairs.size();
    if (!complete || total != oracle::brute_force_assignment(cost)) ++mismatches;
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " of 500 differ from brute force");
  o.note("500 matrices exact");
  return o;
}

// --- kalman --------------------------------------------------------------------

Outcome kalman_correctness() {
  Outcome o;
  double worst_dyn = 0.0;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(50, 500), size(16, 80), vel(-5, 5);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = kalman_init(Box{pos(rng), pos(rng), size(rng), size(rng)});
    s.mean[4] = vel(rng);
    s.mean[5] = vel(rng);
    const auto m0 = s.mean;
    const int steps = 1 + trial % 20;
    for (int i = 0; i < steps; ++i) s = kalman_predict(s);
    worst_dyn = std::max(worst_dyn, std::abs(s.mean[0] - (m0[0] + steps * m0[4])));
    worst_dyn = std::max(worst_dyn, std::abs(s.mean[1] - (m0[1] + steps * m0[5])));
    worst_dyn = std::max(worst_dyn, std::abs(s.mean[2] - m0[2]));
    worst_dyn = std::max(worst_dyn, std::abs(s.mean[3] - m0[3]));
    worst_dyn = std::max(worst_dyn, std::abs(s.mean[4] - m0[4]));
  }
  o.require(worst_dyn <= 1e-9, "constant-velocity drift " + fmt("%.2e", worst_dyn));

  const Box target{184, 77, 48, 32};
  auto s = kalman_init(Box{180, 80, 48, 32});
  for (int i = 0; i < 50; ++i) s = kalman_update(kalman_predict(s), target);
  const auto z = box_to_measurement(target);
  double worst_conv = 0.0;
  for (std::size_t i = 0; i < 4; ++i) worst_conv = std::max(worst_conv, std::abs(s.mean[i] - z[i]));
  o.require(worst_conv < 1e-3, "residual after 50 updates " + fmt("%.2e", worst_conv));
  o.note("dynamics error " + fmt("%.1e", worst_dyn) + ", residual after 50 updates " + fmt("%.1e", worst_conv));
  return o;
}

// --- blobnet -------------------------------------------------------------------

Outcome blobnet_gradients() {
  Outcome o;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0), emb(-0.5, 0.5);
  std::uniform_int_distribution<int> combo(0, ComboTable::kSize - 1);
  auto features = [&] {
    FeatureTensor x(2, 8, 8);
    for (auto& v : x.values) v = u(rng);
    for (auto& c : x.combos) c = static_cast<std::uint8_t>(combo(rng));
    return x;
  };
  double worst = 0.0;
  for (int trial = 0; trial < 2; ++trial) {
    BlobNetModel m = BlobNetModel::random({}, 100 + static_cast<std::uint64_t>(trial));
    for (int i = 0; i < ComboTable::kSize; ++i) m.parameters()[static_cast<std::size_t>(i)] = emb(rng);
    const auto x = features();
    const auto y = oracle::random_bitmap(rng, 8, 8, 0.3);
    worst = std::max(worst, oracle::gradient_check(m, x, y));
    worst = std::max(worst, oracle::gradient_check(m, x, y, 3.0));
  }
  o.require(worst <= 1e-5, "gradient relative error " + fmt("%.2e", worst));

  TrainConfig cfg;
  cfg.seed = 4;
  cfg.epochs = 200;
  cfg.batch_size = 1;
  const TrainingSample s{0, features(), oracle::random_bitmap(rng, 8, 8, 0.3)};
  const auto r = blobnet_train(BlobNetModel::random({}, 4), std::span<const TrainingSample>(&s, 1), cfg);
  const auto mask = threshold_mask(blobnet_forward(r.model, s.input), 0.5);
  std::size_t same = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) same += mask.data[i] == s.target.data[i];
  const double acc = static_cast<double>(same) / static_cast<double>(mask.size());
  o.require(acc >= 0.99, "overfit accuracy " + fmt("%.3f", acc));
  o.note("worst relative error " + fmt("%.1e", worst) + ", overfit accuracy " + fmt("%.3f", acc) + " in 200 steps");
  return o;
}

// --- connected components --------------------------------------------------------

Outcome ccl_oracle() {
  Outcome o;
  std::mt19937_64 rng(17);
  int mismatches = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto g = oracle::random_bitmap(rng, 40, 40, 0.1 + 0.05 * (trial % 10));
    const auto expected = oracle::flood_fill_components(g);
    const auto labels = label_components(g);
    std::vector<std::set<oracle::Cell>> got;
    for (int r = 0; r < labels.rows; ++r)
      for (int c = 0; c < labels.cols; ++c) {
        const int id = labels.at(r, c);
        if (id <= 0) continue;
        if (got.size() < static_cast<std::size_t>(id)) got.resize(static_cast<std::size_t>(id));
        got[static_cast<std::size_t>(id - 1)].insert({r, c});
      }
    if (got != expected) ++mismatches;
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " of 500 bitmaps differ");
  o.note("500 bitmaps identical");
  return o;
}

// --- iou -------------------------------------------------------------------------

Outcome iou_properties() {
  Outcome o;
  o.require(iou(Box{0, 0, 2, 2}, Box{1, 1, 2, 2}) == 1.0 / 7.0, "1/7 fixture");
  std::mt19937_64 rng(4);
  int bad = 0;
  for (int i = 0; i < 100000; ++i) {
    const Box p = oracle::random_box(rng), q = oracle::random_box(rng);
    const double v = iou(p, q);
    if (v != iou(q, p) || v < 0.0 || v > 1.0) ++bad;
    if (p.area() > 0 && iou(p, p) != 1.0) ++bad;
  }
  o.require(bad == 0, std::to_string(bad) + " property violations");
  o.note("1/7 exact, 100000 random pairs");
  return o;
}

// --- mixture of gaussians -----------------------------------------------------------

Outcome mog_segmentation() {
  Outcome o;
  SceneConfig c;
  c.width_px = 160;
  c.height_px = 96;
  c.num_frames = 120;
  c.gop_length = 50;
  c.object_spawn_rate = 0.0;
  c.seed = 2;
  Scene s;
  s.config = c;
  s.background = render_background(c);

  MogState still(c.width_px, c.height_px);
  BinaryGrid mask;
  for (int t = 0; t < 51; ++t) mask = still.step(s.background);
  const auto lit = std::count(mask.data.begin(), mask.data.end(), 1);
  o.require(lit == 0, std::to_string(lit) + " foreground pixels on a static scene");

  GroundTruthObject obj;
  obj.label = "car";
  obj.first_frame = 50;
  obj.last_frame = 100;
  obj.intensity = 230;
  for (int t = 50; t <= 100; ++t) obj.states.push_back({Box{3.0 * (t - 50), 40, 40, 32}, 3.0, 0.0});
  s.objects.push_back(obj);
  MogState moving(c.width_px, c.height_px);
  double worst = 1.0;
  for (int t = 0; t <= 100; ++t) {
    const auto m = moving.step(render_frame(s, t));
    if (t >= 55) worst = std::min(worst, oracle::mask_iou(m, oracle::rendered_foreground(s, t)));
  }
  o.require(worst >= 0.5, "moving-object mask IoU " + fmt("%.3f", worst));
  o.note("static mask empty, worst moving IoU " + fmt("%.3f", worst));
  return o;
}

// --- reference run ------------------------------------------------------------------

struct Reference {
  Scene scene;
  MetadataStream stream;
  BlobNetModel model;
  PipelineConfig config;
  PipelineOutput output;
  double seconds = 0.0;
};

Reference& reference() {
  static Reference ref = [] {
    const auto t0 = std::chrono::steady_clock::now();
    Reference r;
    r.scene = generate_scene(scene_preset("sparse"));
    r.stream = encode_metadata(r.scene);
    r.config.seed = r.scene.config.seed;
    r.config.train.seed = r.config.seed;
    const auto samples = collect_training_samples(r.scene, r.stream, r.config.train);
    r.model = blobnet_train(BlobNetModel::random({}, r.config.train.seed), samples, r.config.train).model;
    r.output = run_pipeline(r.stream, r.scene, r.model, r.config);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }();
  return ref;
}

Outcome reference_run() {
  Outcome o;
  Reference& ref = reference();
  const auto& sc = ref.scene.config;
  const auto& sel = ref.output.report.selection;
  o.require(sc.num_frames == 5000 && sc.gop_length == 50, "reference scene shape");
  o.require(sel.decode_filtration_rate >= 0.70, "decode filtration " + fmt("%.4f", sel.decode_filtration_rate));
  o.require(sel.inference_filtration_rate >= 0.95, "inference filtration " + fmt("%.4f", sel.inference_filtration_rate));

  const FrameAnalysis truth = ground_truth_analysis(ref.scene);
  const FrameAnalysis& got = ref.output.analysis;
  const int w = sc.width_px, h = sc.height_px;
  double min_bp = 1.0, max_cnt = 0.0;
  int subset_failures = 0, equivalence_failures = 0;
  const std::vector<Region> quadrants{Region::upper_left(), Region::upper_right(), Region::lower_left(), Region::lower_right()};
  for (const auto& label : sc.label_set) {
    const Query bp{QueryKind::BP, label, std::nullopt}, cnt{QueryKind::CNT, label, std::nullopt};
    const auto bp_r = run_query(got, bp, w, h);
    const auto cnt_r = run_query(got, cnt, w, h);
    const double acc = evaluate(bp_r, run_query(truth, bp, w, h));
    const double err = evaluate(cnt_r, run_query(truth, cnt, w, h));
    min_bp = std::min(min_bp, acc);
    max_cnt = std::max(max_cnt, err);
    o.require(acc >= 0.90, label + " BP accuracy " + fmt("%.4f", acc));
    o.require(err <= 0.15, label + " CNT error " + fmt("%.4f", err));
    for (const auto& r : quadrants) {
      const auto lbp = run_query(got, Query{QueryKind::LBP, label, r}, w, h);
      if (!std::includes(bp_r.frames.begin(), bp_r.frames.end(), lbp.frames.begin(), lbp.frames.end())) ++subset_failures;
    }
    const auto full_bp = run_query(got, Query{QueryKind::LBP, label, Region::full()}, w, h);
    const auto full_cnt = run_query(got, Query{QueryKind::LCNT, label, Region::full()}, w, h);
    if (full_bp.frames != bp_r.frames || full_cnt.average != cnt_r.average) ++equivalence_failures;
  }
  o.require(subset_failures == 0, "LBP not a subset of BP in " + std::to_string(subset_failures) + " cases");
  o.require(equivalence_failures == 0, "full-region mismatch for " + std::to_string(equivalence_failures) + " labels");
  o.require(ref.seconds < 300.0, "runtime " + fmt("%.1f s", ref.seconds));
  o.note("decode " + fmt("%.3f", sel.decode_filtration_rate) + ", inference " + fmt("%.4f", sel.inference_filtration_rate) +
         ", min BP " + fmt("%.3f", min_bp) + ", max CNT error " + fmt("%.3f", max_cnt) + ", train+run " +
         fmt("%.1f s", ref.seconds));
  return o;
}

Outcome speedup_identity() {
  Outcome o;
  const auto& rep = reference().output.report;
  const auto& sel = rep.selection;
  const double by_rate = 1.0 / (1.0 - sel.decode_filtration_rate);
  const double by_count = static_cast<double>(sel.total_frames) / static_cast<double>(sel.decoded_frames);
  o.require(std::abs(rep.effective_decode_speedup - by_rate) <= 1e-9 * by_rate, "speedup differs from 1/(1-rate)");
  o.require(std::abs(rep.effective_decode_speedup - by_count) <= 1e-12 * by_count, "speedup differs from total/decoded");
  o.require(sel.decode_filtration_rate < 0.70 || rep.effective_decode_speedup >= 1.0 / 0.3 - 1e-9,
            "speedup below 3.33 at rate >= 0.70");
  o.note("speedup " + fmt("%.3fx", rep.effective_decode_speedup) + " = 1/(1-" + fmt("%.4f", sel.decode_filtration_rate) + ")");
  return o;
}

int call_cli(const std::vector<std::string>& args, std::string& out) {
  std::vector<std::string> store{"cova"};
  store.insert(store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : store) argv.push_back(s.data());
  std::ostringstream o, e;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
  out = o.str() + e.str();
  return code;
}

Outcome determinism_and_persistence() {
  Outcome o;
  Reference& ref = reference();
  auto serialized = [&](const PipelineOutput& out) {
    StoredAnalysis st;
    st.header = AnalysisHeader{1, ref.config.video_id, ref.config.config_hash(), ref.stream.header.width_px,
                               ref.stream.header.height_px};
    st.analysis = out.analysis;
    return serialize_analysis(st);
  };
  const std::string one = serialized(ref.output);
  for (int workers : {2, 4}) {
    PipelineConfig cfg = ref.config;
    cfg.worker_count = workers;
    o.require(serialized(run_pipeline(ref.stream, ref.scene, ref.model, cfg)) == one,
              "analysis differs with " + std::to_string(workers) + " workers");
  }

  const char* base = std::getenv("COVA_TEST_TMP");
  const fs::path dir = fs::path(base ? base : fs::temp_directory_path().string()) / "acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_stream(ref.stream, dir / "meta.jsonl");
  StoredAnalysis st;
  st.header = AnalysisHeader{1, ref.config.video_id, ref.config.config_hash(), ref.stream.header.width_px,
                             ref.stream.header.height_px};
  st.analysis = ref.output.analysis;
  write_analysis(st, dir / "analysis.jsonl");

  const std::int64_t reads_before = stream_reads();
  std::string first, second;
  const std::vector<std::string> args{"query", "--analysis", (dir / "analysis.jsonl").string(), "--kind", "lcnt",
                                      "--label", "car", "--region", "lower-right"};
  const int c1 = call_cli(args, first);
  const int c2 = call_cli(args, second);
  const std::int64_t reads = stream_reads() - reads_before;
  o.require(c1 == 0 && c2 == 0, "query exit codes " + std::to_string(c1) + "/" + std::to_string(c2));
  o.require(first == second, "repeated query output differs");
  o.require(reads == 0, std::to_string(reads) + " metadata reads during queries");
  o.note("workers 1/2/4 byte-identical (" + std::to_string(one.size()) + " bytes), " + std::to_string(reads) +
         " metadata reads over 2 queries");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"anchor selection traces and coverage", anchor_selection},
      {"hungarian optimality", hungarian_optimality},
      {"kalman dynamics and convergence", kalman_correctness},
      {"blobnet gradients and overfit", blobnet_gradients},
      {"connected components vs flood fill", ccl_oracle},
      {"iou properties", iou_properties},
      {"mixture-of-gaussians segmentation", mog_segmentation},
      {"end-to-end reference run", reference_run},
      {"decode speedup identity", speedup_identity},
      {"determinism and persistence", determinism_and_persistence},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("%s %2zu %-40s %7.2f s  %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, s, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
