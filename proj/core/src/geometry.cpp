#include "cova/geometry.hpp"

#include <algorithm>

namespace cova {
namespace {

// Same arithmetic as the intersection, so iou(a, a) is exactly 1.
double span_area(const Box& b) noexcept { return (b.right() - b.x) * (b.bottom() - b.y); }

}  // namespace

double intersection_area(const Box& a, const Box& b) noexcept {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

double iou(const Box& a, const Box& b) noexcept {
  const double inter = intersection_area(a, b);
  const double uni = span_area(a) + span_area(b) - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double containment(const Box& inner, const Box& outer) noexcept {
  const double area = inner.area();
  if (area <= 0.0) return 0.0;
  return std::clamp(intersection_area(inner, outer) / area, 0.0, 1.0);
}

Box clamp_to(const Box& b, double width, double height) noexcept {
  const double x0 = std::clamp(b.x, 0.0, width);
  const double y0 = std::clamp(b.y, 0.0, height);
  const double x1 = std::clamp(b.right(), 0.0, width);
  const double y1 = std::clamp(b.bottom(), 0.0, height);
  return Box{x0, y0, std::max(0.0, x1 - x0), std::max(0.0, y1 - y0)};
}

}  // namespace cova
