#include "metaod/extraction.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "metaod/errors.hpp"
#include "metaod/hashing.hpp"

namespace metaod {

namespace {

bool point_in_polygon_even_odd(double px, double py,
                               const std::vector<Point>& poly) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = poly[i];
    const Point& b = poly[j];
    if ((a.y > py) != (b.y > py) &&
        px < (b.x - a.x) * (py - a.y) / (b.y - a.y) + a.x)
      inside = !inside;
  }
  return inside;
}

void merge_into(BinaryMask& acc, const BinaryMask& part) {
  for (std::size_t i = 0; i < acc.data.size(); ++i)
    if (part.data[i]) acc.data[i] = 255;
}

long foreground_count(const BinaryMask& mask) {
  long n = 0;
  for (auto v : mask.data)
    if (v) ++n;
  return n;
}

}  // namespace

BinaryMask rasterize_polygon(const std::vector<Point>& polygon, int width,
                             int height) {
  if (polygon.size() < 3)
    throw DegenerateAnnotationError("polygon has fewer than 3 vertices");

  std::vector<Point> clamped;
  clamped.reserve(polygon.size());
  for (const Point& p : polygon)
    clamped.push_back({std::clamp(p.x, 0.0, static_cast<double>(width)),
                       std::clamp(p.y, 0.0, static_cast<double>(height))});

  BinaryMask mask{width, height,
                  std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, 0)};
  // Restrict scanning to the polygon's bounding rows/columns.
  double minx = clamped[0].x, maxx = clamped[0].x;
  double miny = clamped[0].y, maxy = clamped[0].y;
  for (const Point& p : clamped) {
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  const int x0 = std::max(0, static_cast<int>(minx) - 1);
  const int x1 = std::min(width - 1, static_cast<int>(maxx) + 1);
  const int y0 = std::max(0, static_cast<int>(miny) - 1);
  const int y1 = std::min(height - 1, static_cast<int>(maxy) + 1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (point_in_polygon_even_odd(x + 0.5, y + 0.5, clamped))
        mask.data[static_cast<std::size_t>(y) * width + x] = 255;

  if (foreground_count(mask) == 0)
    throw DegenerateAnnotationError("polygon rasterizes to an empty mask");
  return mask;
}

BinaryMask decode_rle(const RleMask& rle) {
  if (rle.width <= 0 || rle.height <= 0)
    throw DegenerateAnnotationError("RLE mask has empty dimensions");
  const std::size_t total = static_cast<std::size_t>(rle.width) * rle.height;
  BinaryMask mask{rle.width, rle.height, std::vector<std::uint8_t>(total, 0)};

  std::size_t pos = 0;
  bool foreground = false;  // counts start with background
  for (long run : rle.counts) {
    if (run < 0 || pos + static_cast<std::size_t>(run) > total)
      throw DegenerateAnnotationError("RLE runs exceed mask size");
    if (foreground) {
      for (long k = 0; k < run; ++k) {
        // Column-major order: index = col * height + row.
        const std::size_t idx = pos + static_cast<std::size_t>(k);
        const int col = static_cast<int>(idx / rle.height);
        const int row = static_cast<int>(idx % rle.height);
        mask.data[static_cast<std::size_t>(row) * rle.width + col] = 255;
      }
    }
    pos += static_cast<std::size_t>(run);
    foreground = !foreground;
  }
  if (pos != total)
    throw DegenerateAnnotationError("RLE runs do not cover the mask");
  if (foreground_count(mask) == 0)
    throw DegenerateAnnotationError("RLE mask is empty");
  return mask;
}

BinaryMask annotation_mask(const InstanceAnnotation& annotation, int width,
                           int height) {
  if (annotation.rle) {
    if (annotation.rle->width != width || annotation.rle->height != height)
      throw DegenerateAnnotationError("RLE size does not match the image");
    return decode_rle(*annotation.rle);
  }
  if (annotation.polygons.empty())
    throw DegenerateAnnotationError("annotation has no mask data");
  BinaryMask mask = rasterize_polygon(annotation.polygons[0], width, height);
  for (std::size_t i = 1; i < annotation.polygons.size(); ++i)
    merge_into(mask, rasterize_polygon(annotation.polygons[i], width, height));
  return mask;
}

ObjectInstance extract_instance(const ImageBuffer& image,
                                const InstanceAnnotation& annotation) {
  const BinaryMask mask = annotation_mask(annotation, image.width, image.height);

  int minx = image.width, miny = image.height, maxx = -1, maxy = -1;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      if (mask.at(x, y)) {
        minx = std::min(minx, x);
        maxx = std::max(maxx, x);
        miny = std::min(miny, y);
        maxy = std::max(maxy, y);
      }
  if (maxx < 0) throw DegenerateAnnotationError("mask is empty");

  const int cw = maxx - minx + 1;
  const int ch = maxy - miny + 1;
  ObjectInstance inst;
  inst.label = annotation.label;
  inst.image.width = cw;
  inst.image.height = ch;
  inst.image.pixels.resize(static_cast<std::size_t>(cw) * ch * 4);
  long count = 0;
  for (int y = 0; y < ch; ++y)
    for (int x = 0; x < cw; ++x) {
      const std::uint8_t* src = image.at(minx + x, miny + y);
      std::uint8_t* dst = inst.image.at(x, y);
      dst[0] = src[0];
      dst[1] = src[1];
      dst[2] = src[2];
      if (mask.at(minx + x, miny + y)) {
        dst[3] = 255;
        ++count;
      } else {
        dst[3] = 0;
      }
    }
  inst.mask_pixel_count = count;
  inst.source_image = content_hash(image);
  inst.source_bbox = BBox{static_cast<double>(minx), static_cast<double>(miny),
                          static_cast<double>(cw), static_cast<double>(ch)};
  inst.id = content_hash(inst.image);
  return inst;
}

AnnotationFile parse_annotation_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad annotation JSON in " + path.string() + ": " + e.what());
  }

  AnnotationFile out;
  for (const auto& img : doc.at("images")) {
    out.images.push_back({img.at("file").get<std::string>(),
                          img.at("width").get<int>(), img.at("height").get<int>()});
  }
  for (const auto& inst : doc.at("instances")) {
    InstanceAnnotation a;
    a.image_file = inst.at("image").get<std::string>();
    a.label = inst.at("label").get<std::string>();
    if (inst.contains("polygon")) {
      const auto& poly = inst.at("polygon");
      // Accept one polygon [[x,y],...] or several [[[x,y],...],...].
      const bool nested = !poly.empty() && poly[0].is_array() &&
                          !poly[0].empty() && poly[0][0].is_array();
      auto parse_one = [](const nlohmann::json& pts) {
        std::vector<Point> v;
        for (const auto& p : pts)
          v.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        return v;
      };
      if (nested)
        for (const auto& p : poly) a.polygons.push_back(parse_one(p));
      else
        a.polygons.push_back(parse_one(poly));
    } else if (inst.contains("rle")) {
      RleMask rle;
      const auto& r = inst.at("rle");
      rle.height = r.at("size").at(0).get<int>();
      rle.width = r.at("size").at(1).get<int>();
      for (const auto& c : r.at("counts")) rle.counts.push_back(c.get<long>());
      a.rle = rle;
    } else {
      throw IoError("instance lacks both polygon and rle: " + a.image_file);
    }
    out.instances.push_back(std::move(a));
  }
  return out;
}

}  // namespace metaod
