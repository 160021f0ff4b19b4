#include "cova/oracle.hpp"

#include <algorithm>
#include <random>

#include "cova/errors.hpp"

namespace cova {

namespace {

constexpr std::uint32_t kOracleSalt = 0x0DE7;

std::mt19937_64 object_rng(std::uint64_t seed, std::int64_t frame, int object_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),  static_cast<std::uint32_t>(seed >> 32), kOracleSalt,
                    static_cast<std::uint32_t>(frame), static_cast<std::uint32_t>(frame >> 32),
                    static_cast<std::uint32_t>(object_id)};
  return std::mt19937_64(seq);
}

}  // namespace

void OracleNoise::validate() const {
  if (!(miss_prob >= 0.0 && miss_prob <= 1.0)) throw ConfigError("miss_prob must be in [0,1]");
  if (!(misclassify_prob >= 0.0 && misclassify_prob < 1.0)) throw ConfigError("misclassify_prob must be in [0,1)");
  if (!(jitter_sigma >= 0.0)) throw ConfigError("jitter_sigma must be >= 0");
  if (!(small_object_miss_area >= 0.0)) throw ConfigError("small_object_miss_area must be >= 0");
}

std::vector<Detection> detect(const Scene& scene, std::int64_t frame_index, const OracleNoise& noise) {
  noise.validate();
  std::vector<Detection> out;
  if (frame_index < 0 || frame_index >= scene.config.num_frames) return out;
  const int t = static_cast<int>(frame_index);
  const auto& labels = scene.config.label_set;
  const bool noisy = noise.miss_prob > 0.0 || noise.misclassify_prob > 0.0 || noise.jitter_sigma > 0.0;
  for (const auto& obj : scene.objects) {
    if (!obj.present(t)) continue;
    const Box truth = obj.at(t).bbox;
    Detection d{frame_index, obj.object_id, truth, obj.label, 1.0};
    if (noisy) {
      auto rng = object_rng(noise.seed, frame_index, obj.object_id);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      double miss = noise.miss_prob;
      if (truth.area() < noise.small_object_miss_area) miss = std::min(1.0, 2.0 * miss);
      if (u(rng) < miss) continue;
      if (noise.jitter_sigma > 0.0) {
        std::normal_distribution<double> g(0.0, noise.jitter_sigma);
        Box j{truth.x + g(rng), truth.y + g(rng), std::max(1.0, truth.w + g(rng)), std::max(1.0, truth.h + g(rng))};
        d.bbox = clamp_to(j, scene.config.width_px, scene.config.height_px);
        d.confidence = std::max(iou(d.bbox, truth), 1e-6);
      }
      if (labels.size() > 1 && u(rng) < noise.misclassify_prob) {
        std::vector<const std::string*> others;
        for (const auto& l : labels)
          if (l != obj.label) others.push_back(&l);
        std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
        d.label = *others[pick(rng)];
      }
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<std::vector<Detection>> detect_batch(const Scene& scene, std::span<const std::int64_t> frames,
                                                 const OracleNoise& noise) {
  std::vector<std::vector<Detection>> out;
  out.reserve(frames.size());
  for (auto f : frames) out.push_back(detect(scene, f, noise));
  return out;
}

}  // namespace cova
