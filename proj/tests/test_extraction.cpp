#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "metaod/errors.hpp"
#include "metaod/extraction.hpp"
#include "support/images.hpp"
#include "support/oracles.hpp"

using namespace metaod;
using metaod::testing::noise_image;

namespace {

// Independent point-in-polygon (winding-free even-odd crossing test).
bool oracle_inside(double px, double py, const std::vector<Point>& poly) {
  int crossings = 0;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point& a = poly[i];
    const Point& b = poly[j];
    if ((a.y <= py && b.y > py) || (b.y <= py && a.y > py)) {
      const double t = (py - a.y) / (b.y - a.y);
      if (px < a.x + t * (b.x - a.x)) ++crossings;
    }
  }
  return crossings % 2 == 1;
}

double shoelace_area(const std::vector<Point>& poly) {
  double area = 0.0;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
    area += (poly[j].x + poly[i].x) * (poly[j].y - poly[i].y);
  return std::abs(area) / 2.0;
}

long count_foreground(const BinaryMask& mask) {
  long n = 0;
  for (auto v : mask.data)
    if (v) ++n;
  return n;
}

}  // namespace

TEST_CASE("rasterize axis-aligned square") {
  const std::vector<Point> square{{2, 2}, {6, 2}, {6, 6}, {2, 6}};
  const BinaryMask mask = rasterize_polygon(square, 10, 10);
  CHECK(count_foreground(mask) == 16);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x)
      CHECK(mask.at(x, y) == (x >= 2 && x < 6 && y >= 2 && y < 6));
}

TEST_CASE("rasterize right triangle near shoelace area") {
  const std::vector<Point> tri{{0, 0}, {8, 0}, {0, 8}};
  const BinaryMask mask = rasterize_polygon(tri, 10, 10);
  const double area = shoelace_area(tri);
  CHECK(area == 32.0);
  CHECK(std::abs(count_foreground(mask) - area) <= 8.0);
}

TEST_CASE("degenerate polygons rejected") {
  CHECK_THROWS_AS(rasterize_polygon({{0, 0}, {5, 5}}, 10, 10),
                  DegenerateAnnotationError);
  // Zero-area sliver between pixel centers.
  CHECK_THROWS_AS(rasterize_polygon({{0.9, 0.9}, {1.1, 0.9}, {1.0, 1.05}}, 10, 10),
                  DegenerateAnnotationError);
}

TEST_CASE("rasterization matches per-pixel oracle on random polygons") {
  testing::InstanceGen gen(99);
  for (int t = 0; t < 50; ++t) {
    std::vector<Point> poly;
    const int n = gen.uniform_int(3, 8);
    for (int i = 0; i < n; ++i)
      poly.push_back({gen.uniform(0, 24), gen.uniform(0, 24)});
    BinaryMask mask;
    try {
      mask = rasterize_polygon(poly, 24, 24);
    } catch (const DegenerateAnnotationError&) {
      continue;  // self-intersecting sliver with no covered centers
    }
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 24; ++x)
        CHECK(mask.at(x, y) == oracle_inside(x + 0.5, y + 0.5, poly));
  }
}

TEST_CASE("rle decode column-major") {
  // 3x2 mask (h=3, w=2), column-major: col0 = (0,0,1), col1 = (1,1,0).
  const RleMask rle{3, 2, {2, 3, 1}};
  const BinaryMask mask = decode_rle(rle);
  CHECK(mask.width == 2);
  CHECK(mask.height == 3);
  CHECK_FALSE(mask.at(0, 0));
  CHECK_FALSE(mask.at(0, 1));
  CHECK(mask.at(0, 2));
  CHECK(mask.at(1, 0));
  CHECK(mask.at(1, 1));
  CHECK_FALSE(mask.at(1, 2));
}

TEST_CASE("rle validation") {
  CHECK_THROWS_AS(decode_rle({3, 2, {2, 3, 2}}), DegenerateAnnotationError);
  CHECK_THROWS_AS(decode_rle({3, 2, {2, 3}}), DegenerateAnnotationError);
  CHECK_THROWS_AS(decode_rle({3, 2, {6}}), DegenerateAnnotationError);
}

TEST_CASE("extract full-image rectangle keeps the source") {
  const ImageBuffer img = noise_image(12, 9, 5);
  InstanceAnnotation ann;
  ann.label = "whole";
  ann.polygons = {{{0, 0}, {12, 0}, {12, 9}, {0, 9}}};
  const ObjectInstance inst = extract_instance(img, ann);
  CHECK(inst.image.width == 12);
  CHECK(inst.image.height == 9);
  CHECK(inst.mask_pixel_count == 12 * 9);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 12; ++x) {
      CHECK(inst.image.at(x, y)[0] == img.at(x, y)[0]);
      CHECK(inst.image.at(x, y)[3] == 255);
    }
}

TEST_CASE("extract single-pixel mask") {
  const ImageBuffer img = noise_image(10, 10, 6);
  InstanceAnnotation ann;
  ann.label = "dot";
  ann.polygons = {{{3, 3}, {4, 3}, {4, 4}, {3, 4}}};
  const ObjectInstance inst = extract_instance(img, ann);
  CHECK(inst.image.width == 1);
  CHECK(inst.image.height == 1);
  CHECK(inst.mask_pixel_count == 1);
  CHECK(inst.source_bbox.x == 3);
  CHECK(inst.source_bbox.y == 3);
}

TEST_CASE("extract L-shape leaves the notch transparent") {
  const ImageBuffer img = noise_image(20, 20, 7);
  // L covering [2,10)x[2,14) minus the notch [6,10)x[2,8).
  const std::vector<Point> l_shape{{2, 2}, {6, 2},  {6, 8},  {10, 8},
                                   {10, 14}, {2, 14}};
  InstanceAnnotation ann;
  ann.label = "l";
  ann.polygons = {l_shape};
  const ObjectInstance inst = extract_instance(img, ann);
  CHECK(inst.source_bbox.x == 2);
  CHECK(inst.source_bbox.y == 2);
  CHECK(inst.image.width == 8);
  CHECK(inst.image.height == 12);
  for (int y = 0; y < inst.image.height; ++y)
    for (int x = 0; x < inst.image.width; ++x) {
      const bool expect = oracle_inside(2 + x + 0.5, 2 + y + 0.5, l_shape);
      CHECK((inst.image.at(x, y)[3] == 255) == expect);
    }
}

TEST_CASE("extraction is deterministic and tight") {
  testing::InstanceGen gen(123);
  for (int t = 0; t < 30; ++t) {
    const ImageBuffer img = noise_image(32, 24, 1000 + t);
    std::vector<Point> poly;
    for (int i = 0; i < 6; ++i)
      poly.push_back({gen.uniform(1, 31), gen.uniform(1, 23)});
    InstanceAnnotation ann;
    ann.label = "x";
    ann.polygons = {poly};
    ObjectInstance a, b;
    try {
      a = extract_instance(img, ann);
      b = extract_instance(img, ann);
    } catch (const DegenerateAnnotationError&) {
      continue;
    }
    CHECK(a.id == b.id);
    CHECK(a.image.pixels == b.image.pixels);

    // Tightness: opaque pixels touch every crop border; count matches.
    long count = 0;
    bool first_row = false, last_row = false, first_col = false, last_col = false;
    for (int y = 0; y < a.image.height; ++y)
      for (int x = 0; x < a.image.width; ++x)
        if (a.image.at(x, y)[3] == 255) {
          ++count;
          if (y == 0) first_row = true;
          if (y == a.image.height - 1) last_row = true;
          if (x == 0) first_col = true;
          if (x == a.image.width - 1) last_col = true;
        } else {
          CHECK(a.image.at(x, y)[3] == 0);
        }
    CHECK(count == a.mask_pixel_count);
    CHECK(first_row);
    CHECK(last_row);
    CHECK(first_col);
    CHECK(last_col);
  }
}

TEST_CASE("multi-polygon parts merge into one mask") {
  const ImageBuffer img = noise_image(20, 10, 9);
  InstanceAnnotation ann;
  ann.label = "pair";
  ann.polygons = {{{1, 1}, {4, 1}, {4, 4}, {1, 4}},
                  {{10, 1}, {13, 1}, {13, 4}, {10, 4}}};
  const ObjectInstance inst = extract_instance(img, ann);
  CHECK(inst.mask_pixel_count == 18);
  CHECK(inst.image.width == 12);  // spans both parts
  CHECK(inst.image.at(5, 1)[3] == 0);  // gap stays transparent
}

TEST_CASE("annotation file parsing") {
  testing::TempDir dir("annotations");
  const auto path = dir.path() / "ann.json";
  std::ofstream(path) << R"({
    "images": [{"file": "a.png", "width": 12, "height": 9}],
    "instances": [
      {"image": "a.png", "label": "cat", "polygon": [[0,0],[5,0],[5,5],[0,5]]},
      {"image": "a.png", "label": "dog",
       "polygon": [[[0,0],[2,0],[2,2],[0,2]], [[4,4],[6,4],[6,6],[4,6]]]},
      {"image": "a.png", "label": "rle", "rle": {"size": [3,2], "counts": [2,3,1]}}
    ]})";
  const AnnotationFile doc = parse_annotation_file(path);
  REQUIRE(doc.images.size() == 1);
  CHECK(doc.images[0].file == "a.png");
  REQUIRE(doc.instances.size() == 3);
  CHECK(doc.instances[0].polygons.size() == 1);
  CHECK(doc.instances[1].polygons.size() == 2);
  REQUIRE(doc.instances[2].rle.has_value());
  CHECK(doc.instances[2].rle->counts == std::vector<long>{2, 3, 1});
}
