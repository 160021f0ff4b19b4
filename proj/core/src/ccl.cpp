#include <algorithm>
#include <numeric>

#include "cova/metadata.hpp"
#include "cova/tracking.hpp"

namespace cova {
namespace {

struct UnionFind {
  std::vector<int> parent;

  int make() {
    parent.push_back(static_cast<int>(parent.size()));
    return parent.back();
  }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b)
      parent[static_cast<std::size_t>(b)] = a;
    else
      parent[static_cast<std::size_t>(a)] = b;
  }
};

}  // namespace

Grid<int> label_components(const BinaryGrid& bitmap) {
  Grid<int> labels(bitmap.rows, bitmap.cols, 0);
  UnionFind uf;
  uf.make();  // label 0 = background

  // First pass: provisional labels from the already-visited 8-neighbours.
  for (int r = 0; r < bitmap.rows; ++r) {
    for (int c = 0; c < bitmap.cols; ++c) {
      if (!bitmap.at(r, c)) continue;
      int label = 0;
      auto visit = [&](int rr, int cc) {
        if (rr < 0 || cc < 0 || cc >= bitmap.cols) return;
        const int l = labels.at(rr, cc);
        if (l == 0) return;
        if (label == 0)
          label = l;
        else
          uf.unite(label, l);
      };
      visit(r, c - 1);
      visit(r - 1, c - 1);
      visit(r - 1, c);
      visit(r - 1, c + 1);
      labels.at(r, c) = label == 0 ? uf.make() : label;
    }
  }

  // Second pass: resolve equivalences and renumber in raster order.
  std::vector<int> final_label(uf.parent.size(), 0);
  int next = 0;
  for (auto& l : labels.data) {
    if (l == 0) continue;
    const int root = uf.find(l);
    auto& f = final_label[static_cast<std::size_t>(root)];
    if (f == 0) f = ++next;
    l = f;
  }
  return labels;
}

std::vector<Blob> connected_components(const BinaryGrid& bitmap, std::int64_t frame_index, int min_cells) {
  const Grid<int> labels = label_components(bitmap);
  struct Extent {
    int r0, c0, r1, c1, cells;
  };
  std::vector<Extent> ext;
  for (int r = 0; r < labels.rows; ++r) {
    for (int c = 0; c < labels.cols; ++c) {
      const int l = labels.at(r, c);
      if (l == 0) continue;
      if (static_cast<std::size_t>(l) > ext.size()) ext.push_back(Extent{r, c, r, c, 0});
      auto& e = ext[static_cast<std::size_t>(l - 1)];
      e.r0 = std::min(e.r0, r);
      e.c0 = std::min(e.c0, c);
      e.r1 = std::max(e.r1, r);
      e.c1 = std::max(e.c1, c);
      ++e.cells;
    }
  }
  std::vector<Blob> blobs;
  for (const auto& e : ext) {
    if (e.cells < min_cells) continue;
    Blob b;
    b.frame_index = frame_index;
    b.bbox_mb = Box{static_cast<double>(e.c0), static_cast<double>(e.r0), static_cast<double>(e.c1 - e.c0 + 1),
                    static_cast<double>(e.r1 - e.r0 + 1)};
    b.bbox_px = Box{b.bbox_mb.x * kMacroblockSize, b.bbox_mb.y * kMacroblockSize, b.bbox_mb.w * kMacroblockSize,
                    b.bbox_mb.h * kMacroblockSize};
    b.cells = e.cells;
    blobs.push_back(b);
  }
  return blobs;
}

}  // namespace cova
