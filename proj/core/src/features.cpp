#include "cova/features.hpp"

#include <algorithm>

#include "cova/errors.hpp"

namespace cova {

double normalize_mv(int component) noexcept { return std::clamp(component / kMvScale, -1.0, 1.0); }

FeatureTensor build_features(std::span<const FrameMeta* const> window, const Embedding& embedding) {
  if (window.empty()) throw ShapeError("empty feature window");
  const int rows = window.front()->grid.rows;
  const int cols = window.front()->grid.cols;
  for (const FrameMeta* f : window)
    if (f->grid.rows != rows || f->grid.cols != cols)
      throw ShapeError("heterogeneous grid shapes in feature window at frame " + std::to_string(f->frame_index));

  FeatureTensor x(static_cast<int>(window.size()), rows, cols);
  for (int t = 0; t < x.depth; ++t) {
    const auto& grid = window[static_cast<std::size_t>(t)]->grid;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const MacroblockMeta& mb = grid.at(r, c);
        const int combo = mb.combo_index();
        x.combos[x.cell(t, r, c)] = static_cast<std::uint8_t>(combo);
        x.at(t, r, c, 0) = embedding[static_cast<std::size_t>(combo)];
        x.at(t, r, c, 1) = normalize_mv(mb.mv.dx);
        x.at(t, r, c, 2) = normalize_mv(mb.mv.dy);
      }
    }
  }
  return x;
}

FeatureTensor build_features(std::span<const FrameMeta> window, const Embedding& embedding) {
  std::vector<const FrameMeta*> ptrs;
  ptrs.reserve(window.size());
  for (const auto& f : window) ptrs.push_back(&f);
  return build_features(std::span<const FrameMeta* const>(ptrs), embedding);
}

std::vector<const FrameMeta*> window_ending_at(std::span<const FrameMeta> frames, std::size_t pos, int depth) {
  if (pos >= frames.size()) throw BoundsError("window end outside frame range");
  std::vector<const FrameMeta*> out;
  out.reserve(static_cast<std::size_t>(depth));
  for (int k = depth - 1; k >= 0; --k) {
    const std::size_t idx = pos >= static_cast<std::size_t>(k) ? pos - static_cast<std::size_t>(k) : 0;
    out.push_back(&frames[idx]);
  }
  return out;
}

}  // namespace cova
