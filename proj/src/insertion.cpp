#include "metaod/insertion.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "metaod/errors.hpp"

namespace metaod {

namespace {

bool inside_image(const BBox& b, int image_w, int image_h) {
  return b.x >= 0 && b.y >= 0 && b.right() <= image_w && b.bottom() <= image_h;
}

bool overlaps_any(const BBox& b, const DetectionSet& baseline) {
  for (const auto& det : baseline.detections)
    if (overlaps(b, det.box)) return true;
  return false;
}

bool strictly_inside(Point p, const BBox& b) {
  return p.x > b.x && p.x < b.right() && p.y > b.y && p.y < b.bottom();
}

}  // namespace

const char* to_string(PlacementMode mode) {
  switch (mode) {
    case PlacementMode::kGuided: return "guided";
    case PlacementMode::kRandom: return "random";
    case PlacementMode::kRelocated: return "relocated";
  }
  return "unknown";
}

BBox placed_bbox(Point center, int object_w, int object_h) {
  const double x = std::lround(center.x - object_w / 2.0);
  const double y = std::lround(center.y - object_h / 2.0);
  return {x, y, static_cast<double>(object_w), static_cast<double>(object_h)};
}

GuidedRegion guided_region(const BBox& anchor, int object_w, int object_h,
                           double k) {
  const double hw = object_w / 2.0;
  const double hh = object_h / 2.0;
  GuidedRegion region;
  region.inner_exclusion = {anchor.x - hw, anchor.y - hh, anchor.w + 2 * hw,
                            anchor.h + 2 * hh};
  region.outer = {anchor.x - k * object_w, anchor.y - k * object_h,
                  anchor.w + 2 * k * object_w, anchor.h + 2 * k * object_h};
  return region;
}

Point centroid(const DetectionSet& baseline) {
  if (baseline.detections.empty())
    throw ContractViolation("centroid of an empty detection set");
  Point sum{0, 0};
  for (const auto& det : baseline.detections) sum = sum + center(det.box);
  const double n = static_cast<double>(baseline.detections.size());
  return {sum.x / n, sum.y / n};
}

Placement sample_guided(const DetectionSet& baseline, const ObjectInstance& object,
                        int image_w, int image_h, Rng& rng, double k,
                        int max_attempts, std::optional<int> initial_anchor) {
  if (baseline.detections.empty())
    throw ContractViolation("guided sampling needs a non-empty baseline");
  const int ow = object.image.width;
  const int oh = object.image.height;
  const double band_x0 = ow / 2.0, band_x1 = image_w - ow / 2.0;
  const double band_y0 = oh / 2.0, band_y1 = image_h - oh / 2.0;

  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const int anchor_index =
        attempt == 0 && initial_anchor
            ? *initial_anchor
            : static_cast<int>(rng.index(baseline.detections.size()));
    const BBox& anchor = baseline.detections[anchor_index].box;
    const GuidedRegion region = guided_region(anchor, ow, oh, k);

    const double x0 = std::max(region.outer.x, band_x0);
    const double x1 = std::min(region.outer.right(), band_x1);
    const double y0 = std::max(region.outer.y, band_y0);
    const double y1 = std::min(region.outer.bottom(), band_y1);
    if (x0 > x1 || y0 > y1) continue;  // frame entirely outside the band

    const Point c{rng.uniform(x0, x1), rng.uniform(y0, y1)};
    if (strictly_inside(c, region.inner_exclusion)) continue;

    const BBox box = placed_bbox(c, ow, oh);
    if (!inside_image(box, image_w, image_h)) continue;
    if (overlaps_any(box, baseline)) continue;
    return Placement{c, 1.0, object.id, anchor_index, PlacementMode::kGuided};
  }
  throw PlacementExhaustionError("no valid guided placement after " +
                                 std::to_string(max_attempts) + " attempts");
}

Placement sample_random(const DetectionSet& baseline, const ObjectInstance& object,
                        int image_w, int image_h, Rng& rng, int max_attempts) {
  const int ow = object.image.width;
  const int oh = object.image.height;
  const double band_x0 = ow / 2.0, band_x1 = image_w - ow / 2.0;
  const double band_y0 = oh / 2.0, band_y1 = image_h - oh / 2.0;
  if (band_x0 > band_x1 || band_y0 > band_y1)
    throw PlacementExhaustionError("object does not fit in the image");

  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const Point c{rng.uniform(band_x0, band_x1), rng.uniform(band_y0, band_y1)};
    const BBox box = placed_bbox(c, ow, oh);
    if (!inside_image(box, image_w, image_h)) continue;
    if (overlaps_any(box, baseline)) continue;
    return Placement{c, 1.0, object.id, std::nullopt, PlacementMode::kRandom};
  }
  throw PlacementExhaustionError("no valid random placement after " +
                                 std::to_string(max_attempts) + " attempts");
}

ImageBuffer composite(const ImageBuffer& background, const ObjectInstance& object,
                      const Placement& placement) {
  const int ow = object.image.width;
  const int oh = object.image.height;
  const BBox box = placed_bbox(placement.center, ow, oh);
  if (!inside_image(box, background.width, background.height))
    throw ContractViolation("composite placement out of bounds");

  ImageBuffer out = background;
  const int x0 = static_cast<int>(box.x);
  const int y0 = static_cast<int>(box.y);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      const std::uint8_t* src = object.image.at(x, y);
      if (src[3] != 255) continue;
      std::uint8_t* dst = out.at(x0 + x, y0 + y);
      dst[0] = src[0];
      dst[1] = src[1];
      dst[2] = src[2];
      dst[3] = src[3];
    }
  return out;
}

double default_relocation_delta(Point start, Point target) {
  const double len = std::hypot(target.x - start.x, target.y - start.y);
  return std::max(0.01, 2.0 / std::max(len, 1e-12));
}

RelocationOutcome relocate(const Placement& failing_start, Point target,
                           const std::function<ProbeVerdict(const Placement&)>& oracle,
                           double delta) {
  if (delta <= 0) throw ContractViolation("relocation delta must be positive");
  RelocationOutcome out;
  out.start = failing_start.center;
  out.target = target;

  const auto position = [&](double t) {
    return Point{out.start.x + (target.x - out.start.x) * t,
                 out.start.y + (target.y - out.start.y) * t};
  };
  const auto probe = [&](double t) {
    Placement p = failing_start;
    p.center = position(t);
    p.mode = PlacementMode::kRelocated;
    ++out.queries_used;
    const ProbeVerdict v = oracle(p);
    if (v == ProbeVerdict::kFail) out.failing_positions.push_back(p.center);
    return v;
  };

  // Largest known failing t; the start itself fails by precondition.
  double fail_t = 0.0;
  // First probe goes straight to the target.
  if (probe(1.0) == ProbeVerdict::kFail) {
    out.frontier_t = 1.0;
    return out;
  }
  double hi = 1.0;  // smallest known non-failing (or invalid) t
  while (hi - fail_t > delta) {
    const double t = (fail_t + hi) / 2.0;
    if (probe(t) == ProbeVerdict::kFail)
      fail_t = t;
    else
      hi = t;
  }
  out.frontier_t = fail_t;
  return out;
}

long dedup_positions(const std::vector<FailingPosition>& positions) {
  std::set<std::tuple<std::string, std::string, long, long>> unique;
  for (const auto& p : positions)
    unique.insert({p.background, p.object_id, std::lround(p.center.x),
                   std::lround(p.center.y)});
  return static_cast<long>(unique.size());
}

}  // namespace metaod
