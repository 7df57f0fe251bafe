#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "metaod/extraction.hpp"
#include "metaod/geometry.hpp"

namespace metaod {

/// 64-bit average hash: one bit per cell of an 8x8 luma thumbnail, bit set
/// iff the cell is >= the thumbnail mean. Bit (row*8+col) is stored MSB
/// first so the hex form reads top-left to bottom-right.
struct PerceptualHash {
  std::uint64_t bits = 0;

  std::string hex() const;
  static PerceptualHash from_hex(const std::string& hex);
};

int hamming(PerceptualHash a, PerceptualHash b);

/// 8x8 luma thumbnail: RGBA composited over black, Rec.601 luma, exact
/// area-weighted box filter.
std::array<double, 64> luma_thumbnail(const ImageBuffer& image);

PerceptualHash threshold_thumbnail(const std::array<double, 64>& cells);

PerceptualHash ahash(const ImageBuffer& image);

/// Extracted instances grouped by category; within a category instances are
/// kept sorted by mask_pixel_count descending (ties by id).
class ObjectPool {
 public:
  void add(ObjectInstance instance);

  const std::map<std::string, std::vector<ObjectInstance>>& categories() const {
    return categories_;
  }
  bool has_category(const std::string& label) const {
    return categories_.count(label) != 0;
  }
  std::size_t total_instances() const;

  /// Keep the ceil(keep_fraction * n) largest-mask instances per category,
  /// at least one.
  ObjectPool prune(double keep_fraction = 0.10) const;

 private:
  std::map<std::string, std::vector<ObjectInstance>> categories_;
};

/// Average the 8x8 thumbnails of the given crops, then threshold the
/// averaged thumbnail by its own mean.
PerceptualHash reference_hash(const std::vector<ObjectInstance>& background_objects);

/// Instance of the category with minimal Hamming distance to the reference;
/// ties prefer larger masks, then smaller id. Throws MissingCategoryError.
const ObjectInstance& select_similar(const ObjectPool& pruned_pool,
                                     const std::string& category,
                                     PerceptualHash reference);

struct ResizedInstance {
  ObjectInstance instance;
  double scale = 1.0;
};

/// Uniform re-scale of an instance: RGB bilinear, alpha bilinear then
/// re-binarized at 0.5, tight re-crop. No rotation or blur.
ResizedInstance resize_by_scale(const ObjectInstance& instance, double scale);

/// Scale the instance so its bbox area matches the mean area of the
/// same-category background boxes, clamped to fit within 90% of each image
/// dimension.
ResizedInstance resize_to_category(const ObjectInstance& instance,
                                   const std::vector<BBox>& background_same_category,
                                   int image_width, int image_height);

// --- disk layout: pool/<label>/<id>.png + pool/<label>/<id>.json ----------

void write_pool_entry(const std::filesystem::path& pool_dir,
                      ObjectInstance instance);

ObjectPool load_pool(const std::filesystem::path& pool_dir);

}  // namespace metaod
