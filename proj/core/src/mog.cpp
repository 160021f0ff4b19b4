#include "cova/mog.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "cova/errors.hpp"
#include "cova/metadata.hpp"

namespace cova {

namespace {
constexpr int kMaxComponents = 8;
constexpr int kTargetMinPixels = kMacroblockSize * kMacroblockSize / 4;
}  // namespace

MogState::MogState(int width, int height, MogParams params) : width_(width), height_(height), params_(params) {
  if (width <= 0 || height <= 0) throw ShapeError("MoG model needs a positive frame size");
  if (params.components < 1 || params.components > kMaxComponents) throw ConfigError("MoG components must be in [1,8]");
  if (!(params.learning_rate > 0.0 && params.learning_rate < 1.0)) throw ConfigError("MoG learning rate must be in (0,1)");
  if (params.variance_floor <= 0.0 || params.initial_variance < params.variance_floor)
    throw ConfigError("MoG variances invalid");
  const std::size_t n = static_cast<std::size_t>(width) * height * params.components;
  weight_.assign(n, 0.0);
  mean_.assign(n, 0.0);
  var_.assign(n, params.initial_variance);
}

BinaryGrid MogState::step(const GrayFrame& frame) {
  if (frame.width != width_ || frame.height != height_)
    throw ShapeError("frame " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                     " does not match MoG model " + std::to_string(width_) + "x" + std::to_string(height_));
  BinaryGrid mask(height_, width_);
  const int K = params_.components;
  const double alpha = params_.learning_rate;
  const double match2 = params_.match_sigmas * params_.match_sigmas;

  if (!initialized_) {
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        mean_[slot(x, y, 0)] = frame.at(x, y);
        weight_[slot(x, y, 0)] = 1.0;
      }
    }
    initialized_ = true;
    ++frames_;
    return mask;
  }

  std::array<int, kMaxComponents> order{};
  std::array<double, kMaxComponents> key{};
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const std::size_t base = slot(x, y, 0);
      double* w = &weight_[base];
      double* mu = &mean_[base];
      double* var = &var_[base];
      const double px = frame.at(x, y);

      // Stable insertion sort by w / sigma, descending.
      for (int i = 0; i < K; ++i) {
        key[static_cast<std::size_t>(i)] = w[i] / std::sqrt(var[i]);
        int j = i;
        while (j > 0 && key[static_cast<std::size_t>(i)] > key[static_cast<std::size_t>(order[static_cast<std::size_t>(j - 1)])]) {
          order[static_cast<std::size_t>(j)] = order[static_cast<std::size_t>(j - 1)];
          --j;
        }
        order[static_cast<std::size_t>(j)] = i;
      }

      int background_count = K;
      double cum = 0.0;
      for (int i = 0; i < K; ++i) {
        cum += w[order[static_cast<std::size_t>(i)]];
        if (cum > params_.background_ratio) {
          background_count = i + 1;
          break;
        }
      }

      int matched = -1;
      int matched_rank = -1;
      for (int i = 0; i < K; ++i) {
        const int k = order[static_cast<std::size_t>(i)];
        if (w[k] <= 0.0) continue;
        const double d = px - mu[k];
        if (d * d < match2 * var[k]) {
          matched = k;
          matched_rank = i;
          break;
        }
      }
      if (matched < 0 || matched_rank >= background_count) mask.at(y, x) = 1;

      for (int k = 0; k < K; ++k) w[k] *= (1.0 - alpha);
      if (matched >= 0) {
        w[matched] += alpha;
        const double rho = std::min(1.0, alpha / w[matched]);
        const double d = px - mu[matched];
        mu[matched] += rho * d;
        var[matched] = std::max(params_.variance_floor, var[matched] + rho * (d * d - var[matched]));
      } else {
        const int weakest = order[static_cast<std::size_t>(K - 1)];
        mu[weakest] = px;
        var[weakest] = params_.initial_variance;
        w[weakest] = params_.initial_weight;
      }
      double total = 0.0;
      for (int k = 0; k < K; ++k) total += w[k];
      for (int k = 0; k < K; ++k) w[k] /= total;
    }
  }
  ++frames_;
  return mask;
}

BinaryGrid mog_step(MogState& state, const GrayFrame& frame) { return state.step(frame); }

BinaryGrid make_targets(const BinaryGrid& mask, int mb_rows, int mb_cols) {
  if (mask.rows != mb_rows * kMacroblockSize || mask.cols != mb_cols * kMacroblockSize)
    throw ShapeError("pixel mask must be 16x the macroblock grid");
  BinaryGrid target(mb_rows, mb_cols);
  for (int r = 0; r < mb_rows; ++r) {
    for (int c = 0; c < mb_cols; ++c) {
      int count = 0;
      for (int y = 0; y < kMacroblockSize; ++y)
        for (int x = 0; x < kMacroblockSize; ++x)
          count += mask.at(r * kMacroblockSize + y, c * kMacroblockSize + x) ? 1 : 0;
      target.at(r, c) = count >= kTargetMinPixels ? 1 : 0;
    }
  }
  return target;
}

}  // namespace cova
