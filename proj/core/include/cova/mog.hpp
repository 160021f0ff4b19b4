#pragma once

#include <vector>

#include "cova/geometry.hpp"

namespace cova {

struct MogParams {
  int components = 3;
  double learning_rate = 0.02;
  /// A pixel matches a Gaussian when |x - mean| < match_sigmas * sigma.
  double match_sigmas = 2.5;
  /// Leading Gaussians (ranked by weight / sigma) whose cumulative weight first exceeds this form the background.
  double background_ratio = 0.7;
  double initial_variance = 225.0;
  double variance_floor = 4.0;
  double initial_weight = 0.05;
};

/// Per-pixel mixture of Gaussians background model.
class MogState {
 public:
  MogState(int width, int height, MogParams params = {});

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const MogParams& params() const noexcept { return params_; }
  bool initialized() const noexcept { return initialized_; }
  std::size_t frames_seen() const noexcept { return frames_; }

  double weight(int x, int y, int k) const { return weight_[slot(x, y, k)]; }
  double mean(int x, int y, int k) const { return mean_[slot(x, y, k)]; }
  double variance(int x, int y, int k) const { return var_[slot(x, y, k)]; }

  /// Classifies `frame` against the current model, then updates the model.
  /// The returned mask is height x width. The first frame seeds the model
  /// and yields an empty mask.
  BinaryGrid step(const GrayFrame& frame);

 private:
  std::size_t slot(int x, int y, int k) const {
    return (static_cast<std::size_t>(y) * width_ + x) * static_cast<std::size_t>(params_.components) + k;
  }

  int width_;
  int height_;
  MogParams params_;
  bool initialized_ = false;
  std::size_t frames_ = 0;
  std::vector<double> weight_;
  std::vector<double> mean_;
  std::vector<double> var_;
};

/// Throws ShapeError on a dimension mismatch.
BinaryGrid mog_step(MogState& state, const GrayFrame& frame);

/// Downsamples a pixel mask to the macroblock grid: a cell is foreground iff
/// at least a quarter (64) of its 256 pixels are. The mask must be exactly
/// 16x the grid in each dimension.
BinaryGrid make_targets(const BinaryGrid& mask, int mb_rows, int mb_cols);

}  // namespace cova
