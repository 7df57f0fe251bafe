#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "metaod/geometry.hpp"

namespace metaod {

/// Binary mask, row-major, 0 or 255 per pixel.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  bool at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x] != 0;
  }
};

/// Uncompressed COCO-style run-length mask: column-major run lengths
/// alternating background/foreground, starting with background.
struct RleMask {
  int height = 0;
  int width = 0;
  std::vector<long> counts;
};

/// One instance to extract: either >= 1 polygons (disconnected parts are
/// merged) or an uncompressed RLE mask.
struct InstanceAnnotation {
  std::string image_file;
  std::string label;
  std::vector<std::vector<Point>> polygons;
  std::optional<RleMask> rle;
};

/// A cropped object with binary alpha mask, ready for pooling/insertion.
struct ObjectInstance {
  std::string id;            // content hash of the crop
  std::string label;
  ImageBuffer image;         // RGBA, alpha is 0 or 255
  long mask_pixel_count = 0; // number of alpha = 255 pixels
  std::string source_image;  // content hash of the source
  BBox source_bbox;          // tight mask bbox in source coordinates
  std::uint64_t ahash = 0;   // filled by the object pool
};

/// Even-odd polygon fill: a pixel is foreground iff its center lies inside.
/// Vertices are clamped to [0, width] x [0, height] first.
/// Throws DegenerateAnnotationError for < 3 vertices or an empty result.
BinaryMask rasterize_polygon(const std::vector<Point>& polygon, int width,
                             int height);

BinaryMask decode_rle(const RleMask& rle);

/// Full mask of an annotation at the given image dimensions, merging
/// multi-polygon parts (or decoding the RLE alternative).
BinaryMask annotation_mask(const InstanceAnnotation& annotation, int width,
                           int height);

/// Crop the tight mask bounding box out of the image: RGB from the source,
/// alpha 255 inside the mask and 0 elsewhere.
ObjectInstance extract_instance(const ImageBuffer& image,
                                const InstanceAnnotation& annotation);

/// Parsed annotation document (see README for the JSON schema).
struct AnnotationFile {
  struct ImageEntry {
    std::string file;
    int width = 0;
    int height = 0;
  };
  std::vector<ImageEntry> images;
  std::vector<InstanceAnnotation> instances;
};

AnnotationFile parse_annotation_file(const std::filesystem::path& path);

}  // namespace metaod
