#include "cova/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "cova/errors.hpp"
#include "json.hpp"

namespace cova {
namespace {

using nlohmann::json;

constexpr std::uint32_t kBackgroundSalt = 0xB4C6u;
constexpr std::uint32_t kEncoderSalt = 0xE2C0u;

std::mt19937_64 make_rng(std::uint64_t seed, std::uint32_t salt, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), salt,
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

std::uint8_t draw_intensity(std::mt19937_64& rng) {
  // Background spans [90,150]; objects sit at least 40 levels away from it.
  const bool dark = std::bernoulli_distribution(0.5)(rng);
  return static_cast<std::uint8_t>(dark ? uniform_int(rng, 0, 50) : uniform_int(rng, 200, 255));
}

struct LaneBook {
  std::vector<std::vector<std::pair<int, int>>> busy;

  explicit LaneBook(int lanes) : busy(static_cast<std::size_t>(lanes)) {}

  bool free(int lane, int first, int last) const {
    for (const auto& [a, b] : busy[static_cast<std::size_t>(lane)])
      if (first <= b && a <= last) return false;
    return true;
  }

  std::vector<int> free_lanes(int first, int last) const {
    std::vector<int> out;
    for (int l = 0; l < static_cast<int>(busy.size()); ++l)
      if (free(l, first, last)) out.push_back(l);
    return out;
  }

  void reserve(int lane, int first, int last) { busy[static_cast<std::size_t>(lane)].emplace_back(first, last); }
};

bool inside(const Box& b, int width, int height) {
  return b.x >= 0 && b.y >= 0 && b.right() <= width && b.bottom() <= height;
}

// Velocity stored on a state is the displacement that carried the object
// from the previous frame into this one.
std::vector<ObjectState> mover_trajectory(const SceneConfig& cfg, std::mt19937_64& rng, Box start, int dir,
                                          int first_frame) {
  auto draw_velocity = [&] {
    return std::pair<double, double>(dir * uniform_int(rng, cfg.min_speed, cfg.max_speed),
                                     uniform_int(rng, -cfg.max_vertical_speed, cfg.max_vertical_speed));
  };
  auto [vx, vy] = draw_velocity();
  std::vector<ObjectState> states;
  Box pos = start;
  std::bernoulli_distribution change(cfg.velocity_change_rate);
  for (int t = first_frame; t < cfg.num_frames; ++t) {
    states.push_back(ObjectState{pos, vx, vy});
    if (change(rng)) std::tie(vx, vy) = draw_velocity();
    Box next{pos.x + vx, pos.y + vy, pos.w, pos.h};
    if (next.x < 0 || next.right() > cfg.width_px) break;
    pos = next;
  }
  return states;
}

json config_to_json(const SceneConfig& c) {
  json j;
  j["width_px"] = c.width_px;
  j["height_px"] = c.height_px;
  j["num_frames"] = c.num_frames;
  j["gop_length"] = c.gop_length;
  j["object_spawn_rate"] = c.object_spawn_rate;
  j["label_set"] = c.label_set;
  j["static_object_count"] = c.static_object_count;
  j["mv_noise_sigma"] = c.mv_noise_sigma;
  j["texture_noise_rate"] = c.texture_noise_rate;
  j["seed"] = c.seed;
  j["b_frames"] = c.b_frames;
  j["min_object_size"] = c.min_object_size;
  j["max_object_size"] = c.max_object_size;
  j["min_speed"] = c.min_speed;
  j["max_speed"] = c.max_speed;
  j["max_vertical_speed"] = c.max_vertical_speed;
  j["velocity_change_rate"] = c.velocity_change_rate;
  j["lane_height"] = c.lane_height;
  j["max_concurrent_movers"] = c.max_concurrent_movers;
  j["ellipse_fraction"] = c.ellipse_fraction;
  return j;
}

SceneConfig config_from_json(const json& j) {
  SceneConfig c;
  c.width_px = j.at("width_px").get<int>();
  c.height_px = j.at("height_px").get<int>();
  c.num_frames = j.at("num_frames").get<int>();
  c.gop_length = j.at("gop_length").get<int>();
  c.object_spawn_rate = j.at("object_spawn_rate").get<double>();
  c.label_set = j.at("label_set").get<std::vector<std::string>>();
  c.static_object_count = j.at("static_object_count").get<int>();
  c.mv_noise_sigma = j.at("mv_noise_sigma").get<double>();
  c.texture_noise_rate = j.at("texture_noise_rate").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.b_frames = j.at("b_frames").get<bool>();
  c.min_object_size = j.at("min_object_size").get<int>();
  c.max_object_size = j.at("max_object_size").get<int>();
  c.min_speed = j.at("min_speed").get<int>();
  c.max_speed = j.at("max_speed").get<int>();
  c.max_vertical_speed = j.at("max_vertical_speed").get<int>();
  c.velocity_change_rate = j.at("velocity_change_rate").get<double>();
  c.lane_height = j.at("lane_height").get<int>();
  c.max_concurrent_movers = j.at("max_concurrent_movers").get<int>();
  c.ellipse_fraction = j.at("ellipse_fraction").get<double>();
  return c;
}

}  // namespace

void SceneConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("scene config: " + m); };
  if (width_px <= 0 || height_px <= 0 || width_px % kMacroblockSize != 0 || height_px % kMacroblockSize != 0)
    fail("width_px and height_px must be positive multiples of 16");
  if (num_frames < 0) fail("num_frames must be >= 0");
  if (gop_length < 2) fail("gop_length must be >= 2");
  if (object_spawn_rate < 0.0) fail("object_spawn_rate must be >= 0");
  if (mv_noise_sigma < 0.0) fail("mv_noise_sigma must be >= 0");
  if (texture_noise_rate < 0.0 || texture_noise_rate >= 1.0) fail("texture_noise_rate must be in [0,1)");
  if (static_object_count < 0) fail("static_object_count must be >= 0");
  if ((object_spawn_rate > 0.0 || static_object_count > 0) && label_set.empty()) fail("label_set is empty");
  if (min_object_size < 1 || max_object_size < min_object_size) fail("object size range invalid");
  if (min_speed < 1 || max_speed < min_speed) fail("speed range invalid");
  if (max_vertical_speed < 0) fail("max_vertical_speed must be >= 0");
  if (velocity_change_rate < 0.0 || velocity_change_rate > 1.0) fail("velocity_change_rate must be in [0,1]");
  if (lane_height < max_object_size || lane_height > height_px) fail("lane_height must fit the largest object");
  if (max_object_size > width_px) fail("objects wider than the frame");
  if (max_concurrent_movers < 0) fail("max_concurrent_movers must be >= 0");
  if (ellipse_fraction < 0.0 || ellipse_fraction > 1.0) fail("ellipse_fraction must be in [0,1]");
}

SceneConfig scene_preset(std::string_view name) {
  SceneConfig c;
  if (name == "sparse") {
    c.num_frames = 5000;
    c.gop_length = 50;
    c.object_spawn_rate = 0.006;
    c.label_set = {"car", "bus", "truck"};
    c.static_object_count = 2;
    c.mv_noise_sigma = 1.0;
    c.texture_noise_rate = 0.01;
    c.max_concurrent_movers = 2;
    c.seed = 2024;
  } else if (name == "dense") {
    c.num_frames = 2000;
    c.gop_length = 50;
    c.object_spawn_rate = 0.03;
    c.static_object_count = 3;
    c.mv_noise_sigma = 1.5;
    c.texture_noise_rate = 0.02;
    c.ellipse_fraction = 0.3;
    c.seed = 11;
  } else if (name == "static") {
    c.num_frames = 1000;
    c.gop_length = 50;
    c.object_spawn_rate = 0.0;
    c.static_object_count = 3;
    c.seed = 5;
  } else if (name == "empty") {
    c.num_frames = 500;
    c.gop_length = 50;
    c.object_spawn_rate = 0.0;
    c.static_object_count = 0;
    c.seed = 1;
  } else {
    throw ConfigError("unknown scene preset '" + std::string(name) + "'");
  }
  return c;
}

GrayFrame render_background(const SceneConfig& cfg) {
  auto rng = make_rng(cfg.seed, kBackgroundSalt);
  std::uniform_real_distribution<double> period(60.0, 240.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const double px = period(rng), py = period(rng), pz = period(rng);
  const double p1 = phase(rng), p2 = phase(rng), p3 = phase(rng);
  GrayFrame bg(cfg.width_px, cfg.height_px);
  constexpr double k2pi = 2.0 * std::numbers::pi;
  for (int y = 0; y < cfg.height_px; ++y) {
    for (int x = 0; x < cfg.width_px; ++x) {
      const double v = 120.0 + 18.0 * std::sin(k2pi * x / px + p1) * std::cos(k2pi * y / py + p2) +
                       10.0 * std::sin(k2pi * (x + y) / pz + p3);
      bg.at(x, y) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 90.0, 150.0)));
    }
  }
  return bg;
}

Scene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  Scene scene;
  scene.config = cfg;
  scene.background = render_background(cfg);

  auto rng = make_rng(cfg.seed, 0);
  LaneBook lanes(cfg.lane_count());
  const int n = cfg.num_frames;
  const int g = cfg.gop_length;
  std::uniform_int_distribution<std::size_t> pick_label(0, cfg.label_set.empty() ? 0 : cfg.label_set.size() - 1);
  std::bernoulli_distribution ellipse(cfg.ellipse_fraction);

  auto lane_top = [&](int lane, int h) { return lane * cfg.lane_height + (cfg.lane_height - h) / 2; };

  for (int i = 0; i < cfg.static_object_count && n > 0; ++i) {
    const int dur = n < 2 * g ? n : uniform_int(rng, 2 * g, std::min(6 * g, n));
    const int first = uniform_int(rng, 0, n - dur);
    const int last = first + dur - 1;
    const int w = uniform_int(rng, cfg.min_object_size, cfg.max_object_size);
    const int h = uniform_int(rng, cfg.min_object_size, cfg.max_object_size);
    const auto open = lanes.free_lanes(first, last);
    if (open.empty()) continue;
    const int lane = open[std::uniform_int_distribution<std::size_t>(0, open.size() - 1)(rng)];
    lanes.reserve(lane, first, last);
    GroundTruthObject obj;
    obj.object_id = static_cast<int>(scene.objects.size());
    obj.label = cfg.label_set[pick_label(rng)];
    obj.is_static = true;
    obj.first_frame = first;
    obj.last_frame = last;
    obj.intensity = draw_intensity(rng);
    obj.shape = ellipse(rng) ? ObjectShape::Ellipse : ObjectShape::Rectangle;
    const Box box{static_cast<double>(uniform_int(rng, 0, cfg.width_px - w)), static_cast<double>(lane_top(lane, h)),
                  static_cast<double>(w), static_cast<double>(h)};
    obj.states.assign(static_cast<std::size_t>(dur), ObjectState{box, 0.0, 0.0});
    scene.objects.push_back(std::move(obj));
  }

  std::poisson_distribution<int> arrivals(cfg.object_spawn_rate);
  std::vector<std::pair<int, int>> mover_spans;
  for (int t = 0; t < n && cfg.object_spawn_rate > 0.0; ++t) {
    const int k = arrivals(rng);
    for (int a = 0; a < k; ++a) {
      const int w = uniform_int(rng, cfg.min_object_size, cfg.max_object_size);
      const int h = uniform_int(rng, cfg.min_object_size, cfg.max_object_size);
      const int dir = std::bernoulli_distribution(0.5)(rng) ? 1 : -1;
      const std::uint8_t intensity = draw_intensity(rng);
      const std::string& label = cfg.label_set[pick_label(rng)];
      const ObjectShape shape = ellipse(rng) ? ObjectShape::Ellipse : ObjectShape::Rectangle;
      const double lane_choice = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      // Trajectory is drawn from a per-object stream so skipped spawns do not
      // perturb later objects.
      auto traj_rng = make_rng(cfg.seed, 0x7A1Eu, static_cast<std::uint64_t>(t) * 64 + static_cast<std::uint64_t>(a));

      if (cfg.max_concurrent_movers > 0) {
        const auto alive = std::count_if(mover_spans.begin(), mover_spans.end(),
                                         [t](const auto& s) { return s.first <= t && t <= s.second; });
        if (alive >= cfg.max_concurrent_movers) continue;
      }
      const Box probe{dir > 0 ? 0.0 : static_cast<double>(cfg.width_px - w), 0.0, static_cast<double>(w),
                      static_cast<double>(h)};
      auto states = mover_trajectory(cfg, traj_rng, probe, dir, t);
      const int last = t + static_cast<int>(states.size()) - 1;
      const auto open = lanes.free_lanes(t, last);
      if (open.empty()) continue;
      const int lane = open[std::min(open.size() - 1, static_cast<std::size_t>(lane_choice * open.size()))];
      lanes.reserve(lane, t, last);
      mover_spans.emplace_back(t, last);
      const double top = lane_top(lane, h);
      // Vertical drift is relative to the lane; trim the tail once it leaves the frame.
      std::size_t keep = 0;
      for (auto& s : states) {
        s.bbox.y += top;
        if (!inside(s.bbox, cfg.width_px, cfg.height_px)) break;
        ++keep;
      }
      states.resize(keep);
      if (states.empty()) continue;

      GroundTruthObject obj;
      obj.object_id = static_cast<int>(scene.objects.size());
      obj.label = label;
      obj.is_static = false;
      obj.first_frame = t;
      obj.last_frame = t + static_cast<int>(states.size()) - 1;
      obj.states = std::move(states);
      obj.intensity = intensity;
      obj.shape = shape;
      scene.objects.push_back(std::move(obj));
    }
  }
  return scene;
}

GrayFrame render_frame(const Scene& scene, int t) {
  if (t < 0 || t >= scene.config.num_frames)
    throw BoundsError("frame " + std::to_string(t) + " outside scene of " + std::to_string(scene.config.num_frames) +
                      " frames");
  GrayFrame frame = scene.background;
  for (const auto& obj : scene.objects) {
    if (!obj.present(t)) continue;
    const Box& b = obj.at(t).bbox;
    const int x0 = std::max(0, static_cast<int>(std::floor(b.x)));
    const int y0 = std::max(0, static_cast<int>(std::floor(b.y)));
    const int x1 = std::min(frame.width, static_cast<int>(std::ceil(b.right())));
    const int y1 = std::min(frame.height, static_cast<int>(std::ceil(b.bottom())));
    const double cx = b.center_x(), cy = b.center_y();
    const double rx = 0.5 * b.w, ry = 0.5 * b.h;
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        if (obj.shape == ObjectShape::Ellipse) {
          const double ex = (x + 0.5 - cx) / rx;
          const double ey = (y + 0.5 - cy) / ry;
          if (ex * ex + ey * ey > 1.0) continue;
        }
        frame.at(x, y) = obj.intensity;
      }
    }
  }
  return frame;
}

MetadataStream encode_metadata(const Scene& scene) {
  const SceneConfig& cfg = scene.config;
  MetadataStream stream;
  stream.header.width_px = cfg.width_px;
  stream.header.height_px = cfg.height_px;
  stream.header.gop_length = cfg.gop_length;
  const int rows = cfg.mb_rows();
  const int cols = cfg.mb_cols();
  stream.frames.reserve(static_cast<std::size_t>(cfg.num_frames));

  for (int t = 0; t < cfg.num_frames; ++t) {
    FrameMeta f;
    f.frame_index = t;
    f.gop_index = t / cfg.gop_length;
    const int pos = t % cfg.gop_length;
    if (pos == 0) {
      f.type = FrameType::I;
    } else if (cfg.b_frames && pos % 2 == 1 && pos + 1 < cfg.gop_length && t + 1 < cfg.num_frames) {
      f.type = FrameType::B;
    } else {
      f.type = FrameType::P;
    }
    if (f.type == FrameType::I) {
      f.grid = Grid<MacroblockMeta>(rows, cols, MacroblockMeta{MbType::I, 0, {}});
      stream.frames.push_back(std::move(f));
      continue;
    }

    const MbType inter = f.type == FrameType::B ? MbType::B : MbType::P;
    const int max_mode = inter == MbType::B ? ComboTable::kMaxBMode : ComboTable::kMaxPMode;
    f.grid = Grid<MacroblockMeta>(rows, cols, MacroblockMeta{inter, 0, {}});
    auto rng = make_rng(cfg.seed, kEncoderSalt, static_cast<std::uint64_t>(t));

    if (cfg.texture_noise_rate > 0.0) {
      std::bernoulli_distribution noisy(cfg.texture_noise_rate);
      std::uniform_int_distribution<int> comp(-4, 4);
      std::uniform_int_distribution<int> mode(1, 2);
      for (auto& mb : f.grid.data) {
        if (!noisy(rng)) continue;
        MotionVector mv;
        do {
          mv = {comp(rng), comp(rng)};
        } while (mv.is_zero() || mv.dx * mv.dx + mv.dy * mv.dy > 16);
        mb.mv = mv;
        mb.partition_mode = static_cast<std::uint8_t>(mode(rng));
      }
    }

    std::normal_distribution<double> noise(0.0, cfg.mv_noise_sigma);
    std::bernoulli_distribution finer(0.5);
    std::uniform_int_distribution<int> fine_mode(3, max_mode);
    std::uniform_int_distribution<int> coarse_mode(0, 2);
    for (const auto& obj : scene.objects) {
      if (obj.is_static || !obj.present(t)) continue;
      const ObjectState& s = obj.at(t);
      if (s.vx == 0.0 && s.vy == 0.0) continue;
      const Box& b = s.bbox;
      const int c0 = std::max(0, static_cast<int>(std::floor(b.x / kMacroblockSize)));
      const int r0 = std::max(0, static_cast<int>(std::floor(b.y / kMacroblockSize)));
      const int c1 = std::min(cols - 1, static_cast<int>(std::ceil(b.right() / kMacroblockSize)) - 1);
      const int r1 = std::min(rows - 1, static_cast<int>(std::ceil(b.bottom() / kMacroblockSize)) - 1);
      const int base_dx = static_cast<int>(std::lround(-4.0 * s.vx));
      const int base_dy = static_cast<int>(std::lround(-4.0 * s.vy));
      for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
          auto& mb = f.grid.at(r, c);
          int dx = base_dx, dy = base_dy;
          if (cfg.mv_noise_sigma > 0.0) {
            dx += static_cast<int>(std::lround(noise(rng)));
            dy += static_cast<int>(std::lround(noise(rng)));
          }
          mb.mv = {std::clamp(dx, -kMaxMvComponent, kMaxMvComponent), std::clamp(dy, -kMaxMvComponent, kMaxMvComponent)};
          mb.partition_mode = static_cast<std::uint8_t>(finer(rng) ? fine_mode(rng) : coarse_mode(rng));
        }
      }
    }
    stream.frames.push_back(std::move(f));
  }
  return stream;
}

void write_pgm(const GrayFrame& frame, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "P5\n" << frame.width << ' ' << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.pixels.data()), static_cast<std::streamsize>(frame.pixels.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

GrayFrame read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255) throw ParseError("unsupported PGM header in " + path.string());
  in.get();
  GrayFrame frame(w, h);
  in.read(reinterpret_cast<char*>(frame.pixels.data()), static_cast<std::streamsize>(frame.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(frame.pixels.size())) throw ParseError("truncated PGM " + path.string());
  return frame;
}

std::string scene_to_json(const Scene& scene) {
  json j;
  j["format"] = "cova-scene";
  j["version"] = 1;
  j["config"] = config_to_json(scene.config);
  json objs = json::array();
  for (const auto& o : scene.objects) {
    json jo;
    jo["id"] = o.object_id;
    jo["label"] = o.label;
    jo["static"] = o.is_static;
    jo["first_frame"] = o.first_frame;
    jo["last_frame"] = o.last_frame;
    jo["intensity"] = o.intensity;
    jo["shape"] = o.shape == ObjectShape::Ellipse ? "ellipse" : "rectangle";
    json states = json::array();
    for (const auto& s : o.states) states.push_back({s.bbox.x, s.bbox.y, s.bbox.w, s.bbox.h, s.vx, s.vy});
    jo["states"] = std::move(states);
    objs.push_back(std::move(jo));
  }
  j["objects"] = std::move(objs);
  return j.dump();
}

Scene scene_from_json(const std::string& text) {
  Scene scene;
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "cova-scene") throw ParseError("not a cova scene file");
    scene.config = config_from_json(j.at("config"));
    scene.config.validate();
    for (const auto& jo : j.at("objects")) {
      GroundTruthObject o;
      o.object_id = jo.at("id").get<int>();
      o.label = jo.at("label").get<std::string>();
      o.is_static = jo.at("static").get<bool>();
      o.first_frame = jo.at("first_frame").get<int>();
      o.last_frame = jo.at("last_frame").get<int>();
      o.intensity = jo.at("intensity").get<std::uint8_t>();
      o.shape = jo.at("shape").get<std::string>() == "ellipse" ? ObjectShape::Ellipse : ObjectShape::Rectangle;
      for (const auto& s : jo.at("states")) {
        o.states.push_back(ObjectState{Box{s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>(),
                                           s.at(3).get<double>()},
                                       s.at(4).get<double>(), s.at(5).get<double>()});
      }
      if (static_cast<int>(o.states.size()) != o.last_frame - o.first_frame + 1)
        throw ParseError("object " + std::to_string(o.object_id) + " state count does not match its frame span");
      scene.objects.push_back(std::move(o));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed scene: ") + e.what());
  }
  scene.background = render_background(scene.config);
  return scene;
}

void write_scene(const Scene& scene, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << scene_to_json(scene) << '\n';
}

Scene read_scene(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open scene " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return scene_from_json(ss.str());
}

}  // namespace cova
