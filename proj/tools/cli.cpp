#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "cova/analysis_io.hpp"
#include "cova/config.hpp"
#include "cova/errors.hpp"
#include "cova/pipeline.hpp"
#include "cova/query.hpp"
#include "json.hpp"

namespace cova {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config_path;

  std::uint64_t resolve_seed(std::uint64_t fallback) const {
    if (seed) return *seed;
    if (auto env = seed_from_env()) return *env;
    return fallback;
  }
};

void add_common(CLI::App* cmd, Common& c, bool with_config) {
  cmd->add_option("--seed", c.seed, "Random seed (falls back to COVA_SEED)");
  if (with_config) cmd->add_option("--config", c.config_path, "key = value configuration file");
}

PipelineConfig load_config(const Common& c) {
  PipelineConfig cfg;
  if (!c.config_path.empty()) apply_config(cfg, read_config_file(c.config_path));
  cfg.seed = c.resolve_seed(cfg.seed);
  cfg.train.seed = cfg.seed;
  return cfg;
}

fs::path sibling(const fs::path& of, const char* name) { return of.parent_path() / name; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

fs::path default_report_path(const fs::path& analysis) {
  fs::path p = analysis;
  p.replace_extension(".report.json");
  return p;
}

TrainResult train_model(const Scene& scene, const MetadataStream& stream, const TrainConfig& tc, std::size_t* samples_out) {
  const auto samples = collect_training_samples(scene, stream, tc);
  if (samples_out) *samples_out = samples.size();
  BlobNetArch arch;
  arch.temporal_depth = tc.temporal_depth;
  return blobnet_train(BlobNetModel::random(arch, tc.seed), samples, tc);
}

json query_json(const Query& q, const QueryResult& r) {
  json j{{"kind", kind_name(q.kind)}, {"label", q.label}, {"total_frames", r.total_frames}};
  if (q.region) j["region"] = {q.region->x0, q.region->y0, q.region->x1, q.region->y1};
  if (is_count(q.kind)) {
    j["average"] = r.average;
  } else {
    j["frame_count"] = r.frames.size();
    j["frames"] = r.frames;
  }
  if (r.unknown_label) j["warning"] = "label '" + q.label + "' does not occur in the analysis";
  return j;
}

// --- subcommands -----------------------------------------------------------

struct GenArgs {
  Common common;
  std::string preset = "sparse";
  std::string out_dir;
  std::optional<int> frames, gop;
  bool b_frames = false;
  int pgm_limit = 100;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  SceneConfig sc = scene_preset(a.preset);
  sc.seed = a.common.resolve_seed(sc.seed);
  if (a.frames) sc.num_frames = *a.frames;
  if (a.gop) sc.gop_length = *a.gop;
  if (a.b_frames) sc.b_frames = true;
  sc.validate();
  const Scene scene = generate_scene(sc);
  const MetadataStream stream = encode_metadata(scene);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir / "frames");
  write_scene(scene, dir / "scene.json");
  write_stream(stream, dir / "meta.jsonl");
  const int limit = a.pgm_limit < 0 ? sc.num_frames : std::min(a.pgm_limit, sc.num_frames);
  for (int t = 0; t < limit; ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%06d.pgm", t);
    write_pgm(render_frame(scene, t), dir / "frames" / name);
  }
  out << json{{"scene", (dir / "scene.json").string()},
              {"stream", (dir / "meta.jsonl").string()},
              {"frames_written", limit},
              {"num_frames", sc.num_frames},
              {"objects", scene.objects.size()},
              {"seed", sc.seed}}
             .dump(2)
      << '\n';
  return 0;
}

struct TrainArgs {
  Common common;
  std::string video, scene, out;
  std::optional<double> fraction;
  std::optional<int> epochs;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  PipelineConfig cfg = load_config(a.common);
  if (a.fraction) cfg.train.train_fraction = *a.fraction;
  if (a.epochs) cfg.train.epochs = *a.epochs;
  cfg.train.validate();
  const fs::path video(a.video);
  const MetadataStream stream = read_stream(video);
  const Scene scene = read_scene(a.scene.empty() ? sibling(video, "scene.json") : fs::path(a.scene));
  std::size_t n = 0;
  const TrainResult r = train_model(scene, stream, cfg.train, &n);
  save_model(r.model, a.out);
  out << json{{"model", a.out},
              {"samples", n},
              {"parameters", r.model.parameter_count()},
              {"initial_loss", r.initial_loss},
              {"final_loss", r.final_loss},
              {"epochs", r.epoch_loss.size()}}
             .dump(2)
      << '\n';
  return 0;
}

struct AnalyzeArgs {
  Common common;
  std::string stream, scene, model, out, report, save_model, video_id;
  bool train = false;
  std::optional<int> workers, chunks;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  PipelineConfig cfg = load_config(a.common);
  if (a.workers) cfg.worker_count = *a.workers;
  if (a.chunks) cfg.chunk_count = *a.chunks;
  cfg.stream_path = a.stream;
  cfg.scene_path = a.scene.empty() ? sibling(cfg.stream_path, "scene.json") : fs::path(a.scene);
  cfg.output_path = a.out;
  cfg.model_path = a.model;
  if (!a.video_id.empty()) cfg.video_id = a.video_id;
  cfg.validate();
  if (a.model.empty() && !a.train) throw ConfigError("analyze needs --model or --train");
  if (!a.model.empty() && a.train) throw ConfigError("--model and --train are mutually exclusive");

  const MetadataStream stream = read_stream(cfg.stream_path);
  const Scene scene = read_scene(cfg.scene_path);
  BlobNetModel model;
  if (a.train) {
    model = train_model(scene, stream, cfg.train, nullptr).model;
    if (!a.save_model.empty()) save_model(model, a.save_model);
  } else {
    model = load_model(cfg.model_path);
  }
  const PipelineOutput result = run_pipeline(stream, scene, model, cfg);

  StoredAnalysis stored;
  stored.header.video_id = cfg.video_id;
  stored.header.config_hash = cfg.config_hash();
  stored.header.width_px = stream.header.width_px;
  stored.header.height_px = stream.header.height_px;
  stored.analysis = result.analysis;
  write_analysis(stored, cfg.output_path);

  json report = json::parse(report_to_json(result.report));
  report["video_id"] = stored.header.video_id;
  report["config_hash"] = stored.header.config_hash;
  report["analysis"] = cfg.output_path.string();
  const fs::path report_path = a.report.empty() ? default_report_path(cfg.output_path) : fs::path(a.report);
  write_text(report_path, report.dump(2) + "\n");
  out << report.dump(2) << '\n';
  return 0;
}

struct QueryArgs {
  Common common;
  std::string analysis, kind = "bp", label, region, eval_scene;
};

int cmd_query(const QueryArgs& a, std::ostream& out, std::ostream& err) {
  Query q;
  q.kind = parse_kind(a.kind);
  q.label = a.label;
  if (!a.region.empty()) q.region = parse_region(a.region);
  q.validate();
  const StoredAnalysis stored = read_analysis(a.analysis);
  const QueryResult r = run_query(stored.analysis, q, stored.header.width_px, stored.header.height_px);
  if (r.unknown_label) err << "warning: label '" << q.label << "' does not occur in the analysis\n";
  json j = query_json(q, r);
  j["video_id"] = stored.header.video_id;
  j["config_hash"] = stored.header.config_hash;
  if (!a.eval_scene.empty()) {
    const Scene scene = read_scene(a.eval_scene);
    const QueryResult truth = run_query(ground_truth_analysis(scene), q, scene.config.width_px, scene.config.height_px);
    j[is_count(q.kind) ? "absolute_error" : "accuracy"] = evaluate(r, truth);
  }
  out << j.dump(2) << '\n';
  return 0;
}

struct ReportArgs {
  Common common;
  std::string analysis, report, scene, region = "lower-right";
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
  if (a.analysis.empty() && a.report.empty()) throw ConfigError("report needs --analysis or --report");
  const fs::path report_path = a.report.empty() ? default_report_path(a.analysis) : fs::path(a.report);
  json report = read_json_file(report_path);
  if (!a.scene.empty()) {
    const fs::path analysis_path = a.analysis.empty() ? fs::path(report.value("analysis", "")) : fs::path(a.analysis);
    const StoredAnalysis stored = read_analysis(analysis_path);
    const Scene scene = read_scene(a.scene);
    const FrameAnalysis truth = ground_truth_analysis(scene);
    const Region region = parse_region(a.region);
    json metrics = json::array();
    for (const auto& label : scene.config.label_set) {
      for (auto kind : {QueryKind::BP, QueryKind::CNT, QueryKind::LBP, QueryKind::LCNT}) {
        Query q{kind, label, is_local(kind) ? std::optional<Region>(region) : std::nullopt};
        const auto r = run_query(stored.analysis, q, stored.header.width_px, stored.header.height_px);
        const auto t = run_query(truth, q, scene.config.width_px, scene.config.height_px);
        json m{{"kind", kind_name(kind)}, {"label", label}, {is_count(kind) ? "absolute_error" : "accuracy", evaluate(r, t)}};
        if (q.region) m["region"] = a.region;
        metrics.push_back(std::move(m));
      }
    }
    report["queries"] = std::move(metrics);
  }
  out << report.dump(2) << '\n';
  return 0;
}

int cmd_validate(const std::string& file, std::ostream& out) {
  const MetadataStream s = read_stream(file);
  const auto gops = split_gops(s);
  std::int64_t i_frames = 0, b_frames = 0;
  for (const auto& f : s.frames) {
    if (f.type == FrameType::I) ++i_frames;
    if (f.type == FrameType::B) ++b_frames;
  }
  out << json{{"valid", true},
              {"frames", s.frames.size()},
              {"gops", gops.size()},
              {"i_frames", i_frames},
              {"b_frames", b_frames},
              {"width", s.header.width_px},
              {"height", s.header.height_px},
              {"gop_length", s.header.gop_length},
              {"codec", s.header.codec}}
             .dump(2)
      << '\n';
  return 0;
}

struct TracksArgs {
  Common common;
  std::string stream, model, out;
  std::optional<int> chunks;
};

int cmd_tracks(const TracksArgs& a, std::ostream& out) {
  PipelineConfig cfg = load_config(a.common);
  if (a.chunks) cfg.chunk_count = *a.chunks;
  const MetadataStream stream = read_stream(a.stream);
  const auto tracks = track_stream(stream, load_model(a.model), cfg);
  write_tracks(tracks, a.out);
  out << json{{"tracks", tracks.size()}, {"out", a.out}}.dump(2) << '\n';
  return 0;
}

struct PlanArgs {
  Common common;
  std::string tracks, stream, out;
};

int cmd_plan(const PlanArgs& a, std::ostream& out) {
  const MetadataStream stream = read_stream(a.stream);
  auto tracks = read_tracks(a.tracks);
  const auto gops = split_gops(stream);
  const auto plans = select_all(gops, tracks);
  std::string text;
  for (const auto& p : plans) {
    json anchors = json::object();
    for (const auto& [id, f] : p.track_anchor) anchors[std::to_string(id)] = f;
    text += json{{"gop", p.gop_index}, {"anchors", p.anchor_frames}, {"decode", p.decode_frames}, {"track_anchor", anchors}}
                .dump();
    text += '\n';
  }
  write_text(a.out, text);
  const auto r = make_report(plans, static_cast<std::int64_t>(stream.frames.size()));
  out << json{{"total_frames", r.total_frames},
              {"decoded_frames", r.decoded_frames},
              {"anchor_frames", r.anchor_frames},
              {"decode_filtration_rate", r.decode_filtration_rate},
              {"inference_filtration_rate", r.inference_filtration_rate}}
             .dump(2)
      << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compressed-domain video analytics over synthetic encoder metadata", "cova"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic scene, its metadata stream and frames");
  add_common(g, gen.common, false);
  g->add_option("--preset", gen.preset, "sparse | dense | static | empty")->capture_default_str();
  g->add_option("--out", gen.out_dir, "Output directory")->required();
  g->add_option("--frames", gen.frames, "Override the number of frames");
  g->add_option("--gop", gen.gop, "Override the GoP length");
  g->add_flag("--b-frames", gen.b_frames, "Emit B-frames");
  g->add_option("--pgm-limit", gen.pgm_limit, "Frames written as PGM (-1 for all)")->capture_default_str();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train BlobNet on MoG-labelled frames of one video");
  add_common(t, train.common, true);
  t->add_option("--video", train.video, "Metadata stream")->required();
  t->add_option("--scene", train.scene, "Scene file (default: scene.json next to the stream)");
  t->add_option("--frames", train.fraction, "Fraction of the video used for training");
  t->add_option("--epochs", train.epochs, "Training epochs");
  t->add_option("--out", train.out, "Model checkpoint to write")->required();

  AnalyzeArgs analyze;
  auto* an = app.add_subcommand("analyze", "Run the cascade and persist the per-frame analysis");
  add_common(an, analyze.common, true);
  an->add_option("--stream", analyze.stream, "Metadata stream")->required();
  an->add_option("--scene", analyze.scene, "Scene file backing the detector (default: next to the stream)");
  an->add_option("--model", analyze.model, "BlobNet checkpoint");
  an->add_flag("--train", analyze.train, "Train a model for this video first");
  an->add_option("--save-model", analyze.save_model, "Where to keep the model trained by --train");
  an->add_option("--out", analyze.out, "Analysis JSONL to write")->required();
  an->add_option("--report", analyze.report, "Report JSON (default: <out>.report.json)");
  an->add_option("--workers", analyze.workers, "Worker threads");
  an->add_option("--chunks", analyze.chunks, "I-frame aligned chunks");
  an->add_option("--video-id", analyze.video_id, "Identifier stored with the analysis");

  QueryArgs query;
  auto* q = app.add_subcommand("query", "Answer a BP/CNT/LBP/LCNT query from a persisted analysis");
  add_common(q, query.common, false);
  q->add_option("--analysis", query.analysis, "Analysis JSONL")->required();
  q->add_option("--kind", query.kind, "bp | cnt | lbp | lcnt")->capture_default_str();
  q->add_option("--label", query.label, "Object label")->required();
  q->add_option("--region", query.region, "upper-left | upper-right | lower-left | lower-right | full | x0,y0,x1,y1");
  q->add_option("--eval", query.eval_scene, "Scene file to score the result against");

  ReportArgs report;
  auto* r = app.add_subcommand("report", "Print the pipeline report, optionally with query metrics");
  add_common(r, report.common, false);
  r->add_option("--analysis", report.analysis, "Analysis JSONL (its report sits next to it)");
  r->add_option("--report", report.report, "Report JSON");
  r->add_option("--scene", report.scene, "Scene file; adds accuracy / absolute error for every label");
  r->add_option("--region", report.region, "Region used for the local queries")->capture_default_str();

  std::string validate_file;
  Common validate_common;
  auto* v = app.add_subcommand("validate", "Check a metadata stream");
  add_common(v, validate_common, false);
  v->add_option("file", validate_file, "Metadata stream")->required();

  TracksArgs tracks;
  auto* tr = app.add_subcommand("tracks", "Dump blob tracks of a stream");
  add_common(tr, tracks.common, true);
  tr->add_option("--stream", tracks.stream, "Metadata stream")->required();
  tr->add_option("--model", tracks.model, "BlobNet checkpoint")->required();
  tr->add_option("--out", tracks.out, "Tracks JSONL to write")->required();
  tr->add_option("--chunks", tracks.chunks, "I-frame aligned chunks");

  PlanArgs plan;
  auto* p = app.add_subcommand("plan", "Select anchor frames for a set of tracks");
  add_common(p, plan.common, false);
  p->add_option("--tracks", plan.tracks, "Tracks JSONL")->required();
  p->add_option("--stream", plan.stream, "Metadata stream")->required();
  p->add_option("--out", plan.out, "Plan JSONL to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (g->parsed()) return cmd_gen(gen, out);
    if (t->parsed()) return cmd_train(train, out);
    if (an->parsed()) return cmd_analyze(analyze, out);
    if (q->parsed()) return cmd_query(query, out, err);
    if (r->parsed()) return cmd_report(report, out);
    if (v->parsed()) return cmd_validate(validate_file, out);
    if (tr->parsed()) return cmd_tracks(tracks, out);
    if (p->parsed()) return cmd_plan(plan, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace cova
