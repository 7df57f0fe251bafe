#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace metaod {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(Point a, double s) { return {a.x * s, a.y * s}; }

/// Axis-aligned box, top-left origin, continuous pixel coordinates.
/// Valid boxes have w > 0 and h > 0.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double area() const { return w * h; }
};

/// One detector prediction: box, category label, confidence in [0,1].
struct Detection {
  BBox box;
  std::string label;
  double confidence = 0.0;
};

/// Full prediction output of a detector on one image.
struct DetectionSet {
  std::string image_id;  // content hash of the queried image
  std::vector<Detection> detections;
};

/// Row-major RGBA, 8 bits per channel.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  static ImageBuffer filled(int w, int h, std::uint8_t r, std::uint8_t g,
                            std::uint8_t b, std::uint8_t a = 255);

  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width + x) * 4;
  }
  const std::uint8_t* at(int x, int y) const { return pixels.data() + offset(x, y); }
  std::uint8_t* at(int x, int y) { return pixels.data() + offset(x, y); }
  bool empty() const { return width <= 0 || height <= 0; }
};

/// Overlap rectangle of two boxes, or nullopt when interiors are disjoint.
/// Edge-touching boxes count as disjoint (open-interior semantics).
std::optional<BBox> intersect(const BBox& a, const BBox& b);

bool overlaps(const BBox& a, const BBox& b);

Point center(const BBox& b);

}  // namespace metaod
