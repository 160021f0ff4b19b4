#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "cova/blobnet.hpp"
#include "cova/errors.hpp"
#include "cova/features.hpp"
#include "cova/mog.hpp"
#include "cova/scene.hpp"
#include "cova/training.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cova;

namespace {

FrameMeta frame_of(MbType type, int rows, int cols) {
  FrameMeta f;
  f.type = type == MbType::I ? FrameType::I : FrameType::P;
  f.grid = Grid<MacroblockMeta>(rows, cols, MacroblockMeta{type, 0, {}});
  return f;
}

FeatureTensor random_features(std::mt19937_64& rng, int depth, int rows, int cols) {
  FeatureTensor x(depth, rows, cols);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> combo(0, ComboTable::kSize - 1);
  for (auto& v : x.values) v = u(rng);
  for (auto& c : x.combos) c = static_cast<std::uint8_t>(combo(rng));
  return x;
}

BinaryGrid random_target(std::mt19937_64& rng, int rows, int cols) { return oracle::random_bitmap(rng, rows, cols, 0.3); }

BlobNetModel random_model_with_embedding(std::uint64_t seed) {
  BlobNetModel m = BlobNetModel::random({}, seed);
  std::mt19937_64 rng(seed ^ 0x5151);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int i = 0; i < ComboTable::kSize; ++i) m.parameters()[static_cast<std::size_t>(i)] = u(rng);
  return m;
}

}  // namespace

TEST_CASE("build_features") {
  SUBCASE("all-I frames with a zero embedding are all zeros") {
    std::vector<FrameMeta> w{frame_of(MbType::I, 4, 5), frame_of(MbType::I, 4, 5)};
    const auto x = build_features(w, Embedding{});
    for (double v : x.values) CHECK(v == 0.0);
  }
  SUBCASE("motion vector normalization") {
    std::vector<FrameMeta> w{frame_of(MbType::P, 2, 2)};
    w[0].grid.at(1, 0).mv = {4, -4};
    Embedding e{};
    e[1] = 0.25;
    const auto x = build_features(w, e);
    CHECK(x.at(0, 1, 0, 0) == 0.25);
    CHECK(x.at(0, 1, 0, 1) == doctest::Approx(0.0625).epsilon(1e-12));
    CHECK(x.at(0, 1, 0, 2) == doctest::Approx(-0.0625).epsilon(1e-12));
    CHECK(normalize_mv(1000) == 1.0);
    CHECK(normalize_mv(-1000) == -1.0);
  }
  SUBCASE("720p shape") {
    std::vector<FrameMeta> w{frame_of(MbType::P, 720 / 16, 1280 / 16), frame_of(MbType::P, 720 / 16, 1280 / 16)};
    const auto x = build_features(w, Embedding{});
    CHECK(x.depth == 2);
    CHECK(x.rows == 45);
    CHECK(x.cols == 80);
    CHECK(x.values.size() == 2u * 45 * 80 * 3);
  }
  SUBCASE("heterogeneous grids") {
    std::vector<FrameMeta> w{frame_of(MbType::P, 4, 5), frame_of(MbType::P, 4, 6)};
    CHECK_THROWS_AS(build_features(w, Embedding{}), ShapeError);
  }
  SUBCASE("window padding repeats the first frame") {
    std::vector<FrameMeta> frames{frame_of(MbType::I, 1, 1), frame_of(MbType::P, 1, 1)};
    frames[1].frame_index = 1;
    const auto w = window_ending_at(frames, 0, 3);
    REQUIRE(w.size() == 3);
    for (auto* f : w) CHECK(f == &frames[0]);
    const auto w1 = window_ending_at(frames, 1, 2);
    CHECK(w1[0] == &frames[0]);
    CHECK(w1[1] == &frames[1]);
  }
}

TEST_CASE("blobnet forward") {
  std::mt19937_64 rng(3);
  SUBCASE("zero model outputs one half everywhere") {
    const BlobNetModel m;
    const auto p = blobnet_forward(m, random_features(rng, 2, 6, 7));
    for (double v : p.data) CHECK(v == 0.5);
  }
  SUBCASE("output shape equals input shape") {
    const BlobNetModel m = BlobNetModel::random({}, 5);
    for (int r = 4; r <= 11; ++r)
      for (int c = 4; c <= 11; ++c) {
        const auto p = blobnet_forward(m, random_features(rng, 2, r, c));
        CHECK(p.rows == r);
        CHECK(p.cols == c);
        for (double v : p.data) CHECK((v > 0.0 && v < 1.0));
      }
  }
  SUBCASE("lightweight") { CHECK(BlobNetModel().parameter_count() < 50000); }
  SUBCASE("depth mismatch") {
    const BlobNetModel m;
    CHECK_THROWS_AS(blobnet_forward(m, random_features(rng, 3, 4, 4)), ShapeError);
  }
  SUBCASE("deterministic") {
    const BlobNetModel m = BlobNetModel::random({}, 8);
    const auto x = random_features(rng, 2, 9, 5);
    CHECK(blobnet_forward(m, x) == blobnet_forward(m, x));
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 3; ++trial) {
    const BlobNetModel m = random_model_with_embedding(100 + static_cast<std::uint64_t>(trial));
    const auto x = random_features(rng, 2, 8, 8);
    const auto y = random_target(rng, 8, 8);
    CHECK(oracle::gradient_check(m, x, y) <= 1e-5);
    CHECK(oracle::gradient_check(m, x, y, 3.0) <= 1e-5);
  }
  // Odd sizes exercise partial pooling windows and upsampling crops.
  const BlobNetModel m = random_model_with_embedding(7);
  CHECK(oracle::gradient_check(m, random_features(rng, 2, 5, 7), random_target(rng, 5, 7)) <= 1e-5);
}

TEST_CASE("training") {
  std::mt19937_64 rng(8);
  TrainConfig cfg;
  cfg.seed = 4;

  SUBCASE("overfitting one sample") {
    TrainingSample s{0, random_features(rng, 2, 8, 8), random_target(rng, 8, 8)};
    cfg.epochs = 200;
    cfg.batch_size = 1;
    const auto r = blobnet_train(BlobNetModel::random({}, 4), std::span<const TrainingSample>(&s, 1), cfg);
    const auto mask = threshold_mask(blobnet_forward(r.model, s.input), 0.5);
    int same = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) same += mask.data[i] == s.target.data[i];
    CHECK(static_cast<double>(same) / static_cast<double>(mask.size()) >= 0.99);
    CHECK(r.final_loss < r.initial_loss);
  }
  SUBCASE("all-zero targets drive outputs towards zero") {
    std::vector<TrainingSample> data;
    for (int i = 0; i < 6; ++i) data.push_back({i, random_features(rng, 2, 6, 6), BinaryGrid(6, 6)});
    cfg.epochs = 40;
    const auto r = blobnet_train(BlobNetModel::random({}, 4), data, cfg);
    CHECK(r.final_loss < r.initial_loss);
    for (const auto& s : data)
      for (double p : blobnet_forward(r.model, s.input).data) CHECK(p < 0.1);
  }
  SUBCASE("fixed seed gives identical parameters") {
    std::vector<TrainingSample> data;
    for (int i = 0; i < 5; ++i) data.push_back({i, random_features(rng, 2, 6, 6), random_target(rng, 6, 6)});
    cfg.epochs = 5;
    const auto a = blobnet_train(BlobNetModel::random({}, 4), data, cfg);
    const auto b = blobnet_train(BlobNetModel::random({}, 4), data, cfg);
    CHECK(a.model == b.model);
  }
  SUBCASE("empty dataset") {
    CHECK_THROWS_AS(blobnet_train(BlobNetModel(), std::span<const TrainingSample>(), cfg), InputError);
  }
  SUBCASE("divergence reports the epoch") {
    std::vector<TrainingSample> data{{0, random_features(rng, 2, 4, 4), random_target(rng, 4, 4)}};
    data[0].input.values[1] = std::numeric_limits<double>::quiet_NaN();
    try {
      blobnet_train(BlobNetModel::random({}, 1), data, cfg);
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
  }
}

TEST_CASE("threshold_mask") {
  ProbabilityMap half(3, 3, 0.5), high(3, 3, 0.9);
  for (auto v : threshold_mask(half, 0.5).data) CHECK(v == 0);
  for (auto v : threshold_mask(high, 0.5).data) CHECK(v == 1);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ProbabilityMap mixed(7, 9);
  for (auto& v : mixed.data) v = u(rng);
  mixed.data[3] = 0.3;
  const auto m = threshold_mask(mixed, 0.3);
  for (std::size_t i = 0; i < mixed.size(); ++i) CHECK(m.data[i] == (mixed.data[i] > 0.3 ? 1 : 0));
  CHECK_THROWS_AS(threshold_mask(mixed, 0.0), ConfigError);
  CHECK_THROWS_AS(threshold_mask(mixed, 1.0), ConfigError);
}

TEST_CASE("model checkpoint round trip") {
  const BlobNetModel m = random_model_with_embedding(12);
  const auto path = std::filesystem::temp_directory_path() / "cova_test_model.bnl";
  save_model(m, path);
  CHECK(load_model(path) == m);
  {
    std::ofstream(path, std::ios::binary) << "garbage";
  }
  CHECK_THROWS_AS(load_model(path), ParseError);
  std::filesystem::remove(path);
}

TEST_CASE("make_targets") {
  BinaryGrid mask(32, 32);
  CHECK(make_targets(mask, 2, 2) == BinaryGrid(2, 2));
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) mask.at(y, x) = 1;
  for (int i = 0; i < 63; ++i) mask.at(16 + i / 16, 16 + i % 16) = 1;
  for (int i = 0; i < 64; ++i) mask.at(i / 16, 16 + i % 16) = 1;
  const auto t = make_targets(mask, 2, 2);
  CHECK(t.at(0, 0) == 1);
  CHECK(t.at(0, 1) == 1);
  CHECK(t.at(1, 1) == 0);
  CHECK(t.at(1, 0) == 0);
  CHECK_THROWS_AS(make_targets(mask, 3, 2), ShapeError);
}

TEST_CASE("mixture of gaussians") {
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

  SUBCASE("constant background yields an empty mask after burn-in") {
    MogState st(c.width_px, c.height_px);
    BinaryGrid mask;
    for (int t = 0; t < 51; ++t) mask = st.step(s.background);
    for (auto v : mask.data) CHECK(v == 0);
  }
  SUBCASE("weights stay normalized") {
    GroundTruthObject o;
    o.label = "car";
    o.first_frame = 10;
    o.last_frame = 60;
    o.intensity = 20;
    for (int t = 10; t <= 60; ++t) o.states.push_back({Box{2.0 * (t - 10), 30, 40, 32}, 2.0, 0.0});
    s.objects.push_back(o);
    MogState st(c.width_px, c.height_px);
    for (int t = 0; t < 70; ++t) {
      st.step(render_frame(s, t));
      for (int y = 0; y < c.height_px; y += 7)
        for (int x = 0; x < c.width_px; x += 5) {
          double sum = 0.0;
          for (int k = 0; k < st.params().components; ++k) {
            sum += st.weight(x, y, k);
            CHECK(st.variance(x, y, k) >= st.params().variance_floor);
          }
          CHECK(std::abs(sum - 1.0) <= 1e-6);
        }
    }
  }
  SUBCASE("moving object is segmented") {
    GroundTruthObject o;
    o.label = "car";
    o.first_frame = 50;
    o.last_frame = 100;
    o.intensity = 230;
    for (int t = 50; t <= 100; ++t) o.states.push_back({Box{3.0 * (t - 50), 40, 40, 32}, 3.0, 0.0});
    s.objects.push_back(o);
    MogState st(c.width_px, c.height_px);
    for (int t = 0; t < 70; ++t) {
      const auto mask = st.step(render_frame(s, t));
      if (t >= 55) CHECK(oracle::mask_iou(mask, oracle::rendered_foreground(s, t)) >= 0.5);
    }
  }
  SUBCASE("parked object is absorbed into the background") {
    GroundTruthObject o;
    o.label = "car";
    o.is_static = true;
    o.first_frame = 0;
    o.last_frame = 119;
    o.intensity = 30;
    for (int t = 0; t <= 119; ++t) o.states.push_back({Box{50, 30, 40, 32}, 0.0, 0.0});
    s.objects.push_back(o);
    MogState st(c.width_px, c.height_px);
    BinaryGrid mask;
    for (int t = 0; t < 51; ++t) mask = st.step(render_frame(s, t));
    for (auto v : mask.data) CHECK(v == 0);
  }
  SUBCASE("dimension mismatch") {
    MogState st(c.width_px, c.height_px);
    CHECK_THROWS_AS(mog_step(st, GrayFrame(10, 10)), ShapeError);
  }
}

TEST_CASE("trained model generalizes to held-out noiseless streams") {
  SceneConfig c = scene_preset("sparse");
  c.num_frames = 1200;
  c.mv_noise_sigma = 0.0;
  c.texture_noise_rate = 0.0;
  c.static_object_count = 0;
  c.object_spawn_rate = 0.01;
  TrainConfig cfg;
  cfg.seed = 3;
  cfg.train_fraction = 0.2;
  cfg.epochs = 20;

  const Scene train_scene = generate_scene(c);
  const auto train_stream = encode_metadata(train_scene);
  const auto samples = collect_training_samples(train_scene, train_stream, cfg);
  const auto result = blobnet_train(BlobNetModel::random({}, cfg.seed), samples, cfg);

  // Cells are pooled over three unseen scenes; a single short scene holds
  // only a handful of objects and its score swings by several points.
  TrainConfig held_cfg = cfg;
  held_cfg.train_fraction = 0.1;
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::uint64_t offset : {1000, 1001, 1002}) {
    SceneConfig hc = c;
    hc.seed = c.seed + offset;
    const Scene test_scene = generate_scene(hc);
    for (const auto& s : collect_training_samples(test_scene, encode_metadata(test_scene), held_cfg)) {
      const auto pred = threshold_mask(blobnet_forward(result.model, s.input), cfg.threshold);
      for (std::size_t i = 0; i < pred.size(); ++i) {
        tp += pred.data[i] && s.target.data[i];
        fp += pred.data[i] && !s.target.data[i];
        fn += !pred.data[i] && s.target.data[i];
      }
    }
  }
  REQUIRE(tp + fn > 0);
  const double f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  MESSAGE("held-out F1 " << f1 << " tp " << tp << " fp " << fp << " fn " << fn);
  CHECK(f1 >= 0.8);
}
