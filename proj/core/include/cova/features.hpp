#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "cova/metadata.hpp"

namespace cova {

/// Motion vectors are divided by this many quarter-pixels, then clamped to [-1, 1].
inline constexpr double kMvScale = 64.0;
inline constexpr int kFeatureChannels = 3;

using Embedding = std::array<double, ComboTable::kSize>;

/// T x MB_H x MB_W x 3 stack of per-macroblock features.
///
/// Channel 0 holds the embedding weight of the macroblock's combo index and
/// channels 1 and 2 the normalized motion vector. The combo indices are kept
/// alongside so a model can re-embed with its own (trainable) table.
struct FeatureTensor {
  int depth = 0;
  int rows = 0;
  int cols = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> combos;

  FeatureTensor() = default;
  FeatureTensor(int t, int r, int c)
      : depth(t), rows(r), cols(c),
        values(static_cast<std::size_t>(t) * r * c * kFeatureChannels, 0.0),
        combos(static_cast<std::size_t>(t) * r * c, 0) {}

  std::size_t cell(int t, int r, int c) const { return (static_cast<std::size_t>(t) * rows + r) * cols + c; }
  double& at(int t, int r, int c, int ch) { return values[cell(t, r, c) * kFeatureChannels + ch]; }
  double at(int t, int r, int c, int ch) const { return values[cell(t, r, c) * kFeatureChannels + ch]; }
};

double normalize_mv(int component) noexcept;

/// Builds the feature tensor for a window of consecutive frames (oldest first).
/// Throws ShapeError if the grids are not all the same size.
FeatureTensor build_features(std::span<const FrameMeta* const> window, const Embedding& embedding);
FeatureTensor build_features(std::span<const FrameMeta> window, const Embedding& embedding);

/// The `depth` frames ending at `frames[pos]`, oldest first. Positions before
/// the start of `frames` repeat frames[0].
std::vector<const FrameMeta*> window_ending_at(std::span<const FrameMeta> frames, std::size_t pos, int depth);

}  // namespace cova
