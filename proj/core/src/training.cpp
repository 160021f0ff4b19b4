#include "cova/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cova/errors.hpp"

namespace cova {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (temporal_depth < 1) throw ConfigError("temporal depth must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0,1)");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ConfigError("training fraction must lie in (0,1]");
  if (segment_length < 1 || burn_in < 0) throw ConfigError("invalid training segment layout");
  if (!(positive_weight > 0.0)) throw ConfigError("positive weight must be positive");
}

std::vector<TrainingSample> collect_training_samples(const Scene& scene, const MetadataStream& stream,
                                                     const TrainConfig& cfg, const MogParams& mog) {
  cfg.validate();
  const int n = static_cast<int>(stream.frames.size());
  if (n == 0) return {};
  if (scene.config.num_frames != n || scene.config.width_px != stream.header.width_px ||
      scene.config.height_px != stream.header.height_px)
    throw ShapeError("scene and metadata stream disagree on geometry or length");

  const int wanted = std::clamp(static_cast<int>(std::ceil(cfg.train_fraction * n)), 1, n);
  const int segments = std::max(1, (wanted + cfg.segment_length - 1) / cfg.segment_length);
  const Embedding zero{};
  std::vector<TrainingSample> samples;
  samples.reserve(static_cast<std::size_t>(wanted));
  int remaining = wanted;

  for (int s = 0; s < segments && remaining > 0; ++s) {
    const int len = std::min(cfg.segment_length, remaining);
    // Segment s starts at an evenly spaced offset, leaving room for its burn-in.
    const long long span = std::max(0, n - len);
    int start = static_cast<int>(segments == 1 ? 0 : span * s / (segments - 1));
    start = std::clamp(start, 0, n - len);
    const int warm = std::max(0, start - cfg.burn_in);

    MogState model(scene.config.width_px, scene.config.height_px, mog);
    for (int t = warm; t < start + len; ++t) {
      const BinaryGrid mask = model.step(render_frame(scene, t));
      if (t < start) continue;
      TrainingSample sample;
      sample.frame_index = t;
      const auto window =
          window_ending_at(std::span<const FrameMeta>(stream.frames), static_cast<std::size_t>(t), cfg.temporal_depth);
      sample.input = build_features(std::span<const FrameMeta* const>(window), zero);
      sample.target = make_targets(mask, stream.header.mb_rows(), stream.header.mb_cols());
      samples.push_back(std::move(sample));
    }
    remaining -= len;
  }
  return samples;
}

double dataset_loss(const BlobNetModel& model, std::span<const TrainingSample> samples, double positive_weight) {
  if (samples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : samples) total += blobnet_loss(model, s.input, s.target, {}, 1.0, positive_weight);
  return total / static_cast<double>(samples.size());
}

TrainResult blobnet_train(BlobNetModel model, std::span<const TrainingSample> samples, const TrainConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw InputError("training dataset is empty");
  if (cfg.temporal_depth != model.arch().temporal_depth)
    throw ConfigError("training temporal depth does not match the model");

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  const std::size_t p = model.parameter_count();
  std::vector<double> grad(p), m1(p, 0.0), m2(p, 0.0);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed);

  TrainResult result{model, 0.0, 0.0, {}};
  result.initial_loss = dataset_loss(model, samples, cfg.positive_weight);
  if (!std::isfinite(result.initial_loss)) throw DivergenceError("non-finite initial loss", 0);

  long long step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      const double scale = 1.0 / static_cast<double>(e - b);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = b; i < e; ++i) {
        const auto& s = samples[order[i]];
        epoch_total += blobnet_loss(model, s.input, s.target, grad, scale, cfg.positive_weight);
      }
      ++step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      auto params = model.parameters();
      for (std::size_t k = 0; k < p; ++k) {
        m1[k] = kBeta1 * m1[k] + (1.0 - kBeta1) * grad[k];
        m2[k] = kBeta2 * m2[k] + (1.0 - kBeta2) * grad[k] * grad[k];
        params[k] -= cfg.learning_rate * (m1[k] / c1) / (std::sqrt(m2[k] / c2) + kEps);
      }
    }
    const double mean = epoch_total / static_cast<double>(samples.size());
    if (!std::isfinite(mean)) throw DivergenceError("non-finite training loss", epoch);
    result.epoch_loss.push_back(mean);
  }
  result.final_loss = dataset_loss(model, samples, cfg.positive_weight);
  if (!std::isfinite(result.final_loss)) throw DivergenceError("non-finite final loss", cfg.epochs);
  result.model = std::move(model);
  return result;
}

}  // namespace cova
