#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace cova {

/// Axis-aligned box in pixel (or macroblock) units, top-left anchored.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const noexcept { return x + w; }
  double bottom() const noexcept { return y + h; }
  double area() const noexcept { return w * h; }
  double center_x() const noexcept { return x + 0.5 * w; }
  double center_y() const noexcept { return y + 0.5 * h; }

  friend bool operator==(const Box&, const Box&) = default;
};

double intersection_area(const Box& a, const Box& b) noexcept;

/// Intersection over union; 0 when the union is empty.
double iou(const Box& a, const Box& b) noexcept;

/// Fraction of `inner`'s area that lies inside `outer` (0 for empty `inner`).
double containment(const Box& inner, const Box& outer) noexcept;

/// Clamps a box so it lies within [0,width] x [0,height].
Box clamp_to(const Box& b, double width, double height) noexcept;

/// Dense row-major 2-D array.
template <typename T>
struct Grid {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int r, int c, T fill = T{}) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  T& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  const T& at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const noexcept { return data.size(); }

  friend bool operator==(const Grid&, const Grid&) = default;
};

using BinaryGrid = Grid<std::uint8_t>;
using ProbabilityMap = Grid<double>;

/// 8-bit grayscale image.
struct GrayFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayFrame() = default;
  GrayFrame(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const GrayFrame&, const GrayFrame&) = default;
};

}  // namespace cova
