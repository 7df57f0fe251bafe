#include "metaod/geometry.hpp"

#include <algorithm>

namespace metaod {

ImageBuffer ImageBuffer::filled(int w, int h, std::uint8_t r, std::uint8_t g,
                                std::uint8_t b, std::uint8_t a) {
  ImageBuffer img;
  img.width = w;
  img.height = h;
  img.pixels.resize(static_cast<std::size_t>(w) * h * 4);
  for (std::size_t i = 0; i < img.pixels.size(); i += 4) {
    img.pixels[i + 0] = r;
    img.pixels[i + 1] = g;
    img.pixels[i + 2] = b;
    img.pixels[i + 3] = a;
  }
  return img;
}

std::optional<BBox> intersect(const BBox& a, const BBox& b) {
  const double x0 = std::max(a.x, b.x);
  const double y0 = std::max(a.y, b.y);
  const double x1 = std::min(a.right(), b.right());
  const double y1 = std::min(a.bottom(), b.bottom());
  if (x1 <= x0 || y1 <= y0) return std::nullopt;
  return BBox{x0, y0, x1 - x0, y1 - y0};
}

bool overlaps(const BBox& a, const BBox& b) { return intersect(a, b).has_value(); }

Point center(const BBox& b) { return {b.x + b.w / 2.0, b.y + b.h / 2.0}; }

}  // namespace metaod
