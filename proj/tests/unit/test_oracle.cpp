#include <cmath>
#include <vector>

#include "cova/errors.hpp"
#include "cova/oracle.hpp"
#include "cova/scene.hpp"
#include "doctest.h"

using namespace cova;

namespace {

Scene busy_scene(int frames = 400) {
  SceneConfig c = scene_preset("dense");
  c.num_frames = frames;
  c.seed = 31;
  return generate_scene(c);
}

std::size_t object_frames(const Scene& s) {
  std::size_t n = 0;
  for (int t = 0; t < s.config.num_frames; ++t)
    for (const auto& o : s.objects) n += o.present(t);
  return n;
}

}  // namespace

TEST_CASE("noiseless detections equal ground truth") {
  const Scene s = busy_scene();
  for (int t = 0; t < s.config.num_frames; ++t) {
    const auto dets = detect(s, t);
    std::size_t present = 0;
    for (const auto& o : s.objects) present += o.present(t);
    REQUIRE(dets.size() == present);
    for (const auto& d : dets) {
      const auto& obj = s.objects.at(static_cast<std::size_t>(d.object_id));
      REQUIRE(obj.object_id == d.object_id);
      CHECK(d.frame_index == t);
      CHECK(d.bbox == obj.at(t).bbox);
      CHECK(d.label == obj.label);
      CHECK(d.confidence == 1.0);
      CHECK(d.bbox.x >= 0.0);
      CHECK(d.bbox.y >= 0.0);
      CHECK(d.bbox.right() <= s.config.width_px);
      CHECK(d.bbox.bottom() <= s.config.height_px);
    }
  }
  CHECK(detect(s, -1).empty());
  CHECK(detect(s, s.config.num_frames).empty());
}

TEST_CASE("static objects are detected") {
  SceneConfig c = scene_preset("static");
  c.num_frames = 20;
  const Scene s = generate_scene(c);
  CHECK(detect(s, 10).size() == static_cast<std::size_t>(c.static_object_count));
}

TEST_CASE("miss probability") {
  const Scene s = busy_scene(4000);
  OracleNoise all;
  all.miss_prob = 1.0;
  for (int t = 0; t < 200; ++t) CHECK(detect(s, t, all).empty());

  OracleNoise tenth;
  tenth.miss_prob = 0.1;
  tenth.seed = 9;
  const std::size_t total = object_frames(s);
  REQUIRE(total >= 10000);
  std::size_t kept = 0;
  for (int t = 0; t < s.config.num_frames; ++t) kept += detect(s, t, tenth).size();
  const double miss_rate = 1.0 - static_cast<double>(kept) / static_cast<double>(total);
  CHECK(std::abs(miss_rate - 0.1) <= 0.01);

  SUBCASE("small objects are missed twice as often") {
    OracleNoise small = tenth;
    small.small_object_miss_area = 1e9;
    std::size_t kept_small = 0;
    for (int t = 0; t < s.config.num_frames; ++t) kept_small += detect(s, t, small).size();
    const double rate = 1.0 - static_cast<double>(kept_small) / static_cast<double>(total);
    CHECK(std::abs(rate - 0.2) <= 0.015);
  }
}

TEST_CASE("misclassification and jitter") {
  const Scene s = busy_scene(2000);
  OracleNoise n;
  n.misclassify_prob = 0.25;
  n.jitter_sigma = 2.0;
  n.seed = 4;
  std::size_t total = 0, wrong = 0;
  for (int t = 0; t < s.config.num_frames; ++t) {
    for (const auto& d : detect(s, t, n)) {
      const auto& obj = s.objects.at(static_cast<std::size_t>(d.object_id));
      ++total;
      wrong += d.label != obj.label;
      CHECK(d.confidence > 0.0);
      CHECK(d.confidence <= 1.0);
      CHECK(d.confidence == doctest::Approx(std::max(iou(d.bbox, obj.at(t).bbox), 1e-6)));
      CHECK(d.bbox.x >= 0.0);
      CHECK(d.bbox.right() <= s.config.width_px);
      CHECK(d.bbox.bottom() <= s.config.height_px);
    }
  }
  REQUIRE(total > 5000);
  CHECK(std::abs(static_cast<double>(wrong) / static_cast<double>(total) - 0.25) <= 0.02);
}

TEST_CASE("determinism and per-frame independence") {
  const Scene s = busy_scene();
  OracleNoise n;
  n.miss_prob = 0.3;
  n.misclassify_prob = 0.2;
  n.jitter_sigma = 3.0;
  n.seed = 77;

  std::vector<std::int64_t> forward, backward;
  for (std::int64_t t = 0; t < s.config.num_frames; t += 7) forward.push_back(t);
  backward.assign(forward.rbegin(), forward.rend());
  const auto a = detect_batch(s, forward, n);
  const auto b = detect_batch(s, backward, n);
  for (std::size_t i = 0; i < forward.size(); ++i) {
    CHECK(a[i] == b[forward.size() - 1 - i]);
    CHECK(a[i] == detect(s, forward[i], n));
  }

  OracleNoise other = n;
  other.seed = 78;
  bool differs = false;
  for (std::int64_t t : forward) differs = differs || detect(s, t, other) != detect(s, t, n);
  CHECK(differs);
}

TEST_CASE("noise settings are validated") {
  const Scene s = busy_scene(10);
  OracleNoise bad;
  bad.miss_prob = 1.5;
  CHECK_THROWS_AS(detect(s, 0, bad), ConfigError);
  bad = {};
  bad.misclassify_prob = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.jitter_sigma = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.miss_prob = std::nan("");
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
