#include "metaod/object_pool.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "metaod/errors.hpp"
#include "metaod/hashing.hpp"
#include "metaod/image_io.hpp"

namespace metaod {

namespace {

double luma_over_black(const std::uint8_t* px) {
  const double a = px[3] / 255.0;
  return (0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]) * a;
}

bool instance_order(const ObjectInstance& a, const ObjectInstance& b) {
  if (a.mask_pixel_count != b.mask_pixel_count)
    return a.mask_pixel_count > b.mask_pixel_count;
  return a.id < b.id;
}

std::string sanitize_for_path(const std::string& label) {
  std::string out;
  for (char c : label)
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
                          c == '_'
                      ? c
                      : '_');
  return out.empty() ? std::string("_") : out;
}

}  // namespace

std::string PerceptualHash::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(bits));
  return buf;
}

PerceptualHash PerceptualHash::from_hex(const std::string& hex) {
  if (hex.size() != 16) throw Error("ahash hex must be 16 chars: " + hex);
  return {std::stoull(hex, nullptr, 16)};
}

int hamming(PerceptualHash a, PerceptualHash b) {
  return std::popcount(a.bits ^ b.bits);
}

std::array<double, 64> luma_thumbnail(const ImageBuffer& image) {
  if (image.empty()) throw Error("cannot hash an empty image");
  std::array<double, 64> cells{};

  // Exact area-weighted box filter onto the 8x8 grid: each cell covers the
  // continuous rectangle [cx*W/8, (cx+1)*W/8) x [cy*H/8, (cy+1)*H/8).
  const double sx = image.width / 8.0;
  const double sy = image.height / 8.0;
  for (int cy = 0; cy < 8; ++cy) {
    const double y0 = cy * sy, y1 = (cy + 1) * sy;
    for (int cx = 0; cx < 8; ++cx) {
      const double x0 = cx * sx, x1 = (cx + 1) * sx;
      double sum = 0.0, area = 0.0;
      for (int py = static_cast<int>(y0); py < image.height && py < y1; ++py) {
        const double wy = std::min<double>(py + 1, y1) - std::max<double>(py, y0);
        if (wy <= 0) continue;
        for (int px = static_cast<int>(x0); px < image.width && px < x1; ++px) {
          const double wx = std::min<double>(px + 1, x1) - std::max<double>(px, x0);
          if (wx <= 0) continue;
          sum += wx * wy * luma_over_black(image.at(px, py));
          area += wx * wy;
        }
      }
      cells[cy * 8 + cx] = area > 0 ? sum / area : 0.0;
    }
  }
  return cells;
}

PerceptualHash threshold_thumbnail(const std::array<double, 64>& cells) {
  double mean = 0.0;
  for (double v : cells) mean += v;
  mean /= 64.0;
  PerceptualHash h;
  for (int i = 0; i < 64; ++i)
    if (cells[i] >= mean) h.bits |= 1ULL << (63 - i);
  return h;
}

PerceptualHash ahash(const ImageBuffer& image) {
  return threshold_thumbnail(luma_thumbnail(image));
}

void ObjectPool::add(ObjectInstance instance) {
  auto& list = categories_[instance.label];
  list.push_back(std::move(instance));
  std::sort(list.begin(), list.end(), instance_order);
}

std::size_t ObjectPool::total_instances() const {
  std::size_t n = 0;
  for (const auto& [_, list] : categories_) n += list.size();
  return n;
}

ObjectPool ObjectPool::prune(double keep_fraction) const {
  if (keep_fraction <= 0.0 || keep_fraction > 1.0)
    throw ContractViolation("keep_fraction must be in (0, 1]");
  ObjectPool out;
  for (const auto& [label, list] : categories_) {
    const std::size_t keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::ceil(keep_fraction * static_cast<double>(list.size()))));
    auto& kept = out.categories_[label];
    kept.assign(list.begin(), list.begin() + std::min(keep, list.size()));
  }
  return out;
}

PerceptualHash reference_hash(const std::vector<ObjectInstance>& background_objects) {
  if (background_objects.empty())
    throw MissingCategoryError("reference_hash needs at least one object");
  std::array<double, 64> mean{};
  for (const auto& obj : background_objects) {
    const auto cells = luma_thumbnail(obj.image);
    for (int i = 0; i < 64; ++i) mean[i] += cells[i];
  }
  for (double& v : mean) v /= static_cast<double>(background_objects.size());
  return threshold_thumbnail(mean);
}

const ObjectInstance& select_similar(const ObjectPool& pruned_pool,
                                     const std::string& category,
                                     PerceptualHash reference) {
  const auto it = pruned_pool.categories().find(category);
  if (it == pruned_pool.categories().end() || it->second.empty())
    throw MissingCategoryError("no pool instances for category: " + category);

  const ObjectInstance* best = nullptr;
  int best_dist = 65;
  for (const ObjectInstance& cand : it->second) {
    const int d = hamming({cand.ahash}, reference);
    if (d < best_dist ||
        (d == best_dist &&
         (cand.mask_pixel_count > best->mask_pixel_count ||
          (cand.mask_pixel_count == best->mask_pixel_count && cand.id < best->id)))) {
      best = &cand;
      best_dist = d;
    }
  }
  return *best;
}

ResizedInstance resize_by_scale(const ObjectInstance& instance, double scale) {
  const int in_w = instance.image.width;
  const int in_h = instance.image.height;
  const int out_w = std::max(1, static_cast<int>(std::lround(in_w * scale)));
  const int out_h = std::max(1, static_cast<int>(std::lround(in_h * scale)));
  if (out_w == in_w && out_h == in_h) return {instance, scale};

  ImageBuffer out;
  out.width = out_w;
  out.height = out_h;
  out.pixels.resize(static_cast<std::size_t>(out_w) * out_h * 4);

  const double rx = static_cast<double>(in_w) / out_w;
  const double ry = static_cast<double>(in_h) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double sy = std::clamp((y + 0.5) * ry - 0.5, 0.0, in_h - 1.0);
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, in_h - 1);
    const double fy = sy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double sx = std::clamp((x + 0.5) * rx - 0.5, 0.0, in_w - 1.0);
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, in_w - 1);
      const double fx = sx - x0;
      const std::uint8_t* p00 = instance.image.at(x0, y0);
      const std::uint8_t* p10 = instance.image.at(x1, y0);
      const std::uint8_t* p01 = instance.image.at(x0, y1);
      const std::uint8_t* p11 = instance.image.at(x1, y1);
      std::uint8_t* dst = out.at(x, y);
      for (int c = 0; c < 4; ++c) {
        const double v = (1 - fy) * ((1 - fx) * p00[c] + fx * p10[c]) +
                         fy * ((1 - fx) * p01[c] + fx * p11[c]);
        dst[c] = c == 3 ? (v >= 127.5 ? 255 : 0)
                        : static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }

  // Tight re-crop: downscaling can clear border pixels of the mask.
  int minx = out_w, miny = out_h, maxx = -1, maxy = -1;
  long count = 0;
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x)
      if (out.at(x, y)[3] == 255) {
        minx = std::min(minx, x);
        maxx = std::max(maxx, x);
        miny = std::min(miny, y);
        maxy = std::max(maxy, y);
        ++count;
      }
  if (maxx < 0)
    throw DegenerateAnnotationError("instance mask vanished while resizing: " +
                                    instance.id);

  ObjectInstance resized = instance;
  resized.mask_pixel_count = count;
  if (minx == 0 && miny == 0 && maxx == out_w - 1 && maxy == out_h - 1) {
    resized.image = std::move(out);
  } else {
    ImageBuffer crop;
    crop.width = maxx - minx + 1;
    crop.height = maxy - miny + 1;
    crop.pixels.resize(static_cast<std::size_t>(crop.width) * crop.height * 4);
    for (int y = 0; y < crop.height; ++y)
      std::copy_n(out.at(minx, miny + y), static_cast<std::size_t>(crop.width) * 4,
                  crop.at(0, y));
    resized.image = std::move(crop);
  }
  resized.ahash = ahash(resized.image).bits;
  return {std::move(resized), scale};
}

ResizedInstance resize_to_category(const ObjectInstance& instance,
                                   const std::vector<BBox>& background_same_category,
                                   int image_width, int image_height) {
  if (background_same_category.empty())
    throw ContractViolation("resize_to_category needs background boxes");
  double target_area = 0.0;
  for (const BBox& b : background_same_category) target_area += b.area();
  target_area /= static_cast<double>(background_same_category.size());

  const double w = instance.image.width;
  const double h = instance.image.height;
  double scale = std::sqrt(target_area / (w * h));
  scale = std::min(scale, 0.9 * image_width / w);
  scale = std::min(scale, 0.9 * image_height / h);
  if (scale == 1.0) return {instance, 1.0};
  return resize_by_scale(instance, scale);
}

void write_pool_entry(const std::filesystem::path& pool_dir,
                      ObjectInstance instance) {
  if (instance.ahash == 0) instance.ahash = ahash(instance.image).bits;
  const auto dir = pool_dir / sanitize_for_path(instance.label);
  std::filesystem::create_directories(dir);
  save_png(instance.image, dir / (instance.id + ".png"));

  nlohmann::json meta{
      {"id", instance.id},
      {"label", instance.label},
      {"source_image", instance.source_image},
      {"source_bbox",
       {instance.source_bbox.x, instance.source_bbox.y, instance.source_bbox.w,
        instance.source_bbox.h}},
      {"mask_pixels", instance.mask_pixel_count},
      {"ahash", PerceptualHash{instance.ahash}.hex()},
  };
  std::ofstream out(dir / (instance.id + ".json"));
  if (!out) throw IoError("cannot write pool metadata for " + instance.id);
  out << meta.dump(2) << "\n";
}

ObjectPool load_pool(const std::filesystem::path& pool_dir) {
  ObjectPool pool;
  if (!std::filesystem::is_directory(pool_dir))
    throw IoError("pool directory not found: " + pool_dir.string());
  for (const auto& label_dir : std::filesystem::directory_iterator(pool_dir)) {
    if (!label_dir.is_directory()) continue;
    for (const auto& entry : std::filesystem::directory_iterator(label_dir)) {
      if (entry.path().extension() != ".json") continue;
      std::ifstream in(entry.path());
      nlohmann::json meta;
      try {
        in >> meta;
      } catch (const nlohmann::json::exception& e) {
        throw IoError("bad pool metadata " + entry.path().string() + ": " + e.what());
      }
      ObjectInstance inst;
      inst.id = meta.at("id").get<std::string>();
      inst.label = meta.at("label").get<std::string>();
      inst.source_image = meta.at("source_image").get<std::string>();
      const auto& bb = meta.at("source_bbox");
      inst.source_bbox = {bb.at(0).get<double>(), bb.at(1).get<double>(),
                          bb.at(2).get<double>(), bb.at(3).get<double>()};
      inst.mask_pixel_count = meta.at("mask_pixels").get<long>();
      inst.ahash = PerceptualHash::from_hex(meta.at("ahash").get<std::string>()).bits;
      inst.image = load_image(entry.path().parent_path() / (inst.id + ".png"));
      pool.add(std::move(inst));
    }
  }
  return pool;
}

}  // namespace metaod
