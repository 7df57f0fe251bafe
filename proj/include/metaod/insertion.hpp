#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "metaod/extraction.hpp"
#include "metaod/geometry.hpp"
#include "metaod/rng.hpp"

namespace metaod {

enum class PlacementMode { kGuided, kRandom, kRelocated };

const char* to_string(PlacementMode mode);

/// Where an object goes: `center` is the object-centroid coordinate.
struct Placement {
  Point center;
  double scale = 1.0;
  std::string object_id;
  std::optional<int> anchor_index;
  PlacementMode mode = PlacementMode::kRandom;
};

/// Integer-pixel bbox of an object of the given dimensions centered at
/// `center` (the rectangle composite() will overwrite and the detector will
/// see, so overlap checks use this, not the continuous rectangle).
BBox placed_bbox(Point center, int object_w, int object_h);

/// Sampling frame of the guided strategy around one anchor detection.
struct GuidedRegion {
  BBox outer;            // concentric frame extending k object-dims past the anchor
  BBox inner_exclusion;  // anchor grown by half the object dims per side
};

GuidedRegion guided_region(const BBox& anchor, int object_w, int object_h, double k);

/// Arithmetic mean of the baseline detection centers.
Point centroid(const DetectionSet& baseline);

/// Center sampled uniformly from outer \ inner_exclusion of a uniformly
/// drawn anchor, clipped to the in-bounds band; resampled (fresh anchor)
/// until the placed bbox overlaps no baseline box. `initial_anchor` fixes
/// the first attempt's anchor. Throws PlacementExhaustionError.
Placement sample_guided(const DetectionSet& baseline, const ObjectInstance& object,
                        int image_w, int image_h, Rng& rng, double k = 2.0,
                        int max_attempts = 100,
                        std::optional<int> initial_anchor = std::nullopt);

/// Uniform in-bounds center, resampled on any baseline-bbox overlap.
Placement sample_random(const DetectionSet& baseline, const ObjectInstance& object,
                        int image_w, int image_h, Rng& rng, int max_attempts = 100);

/// Mask-stenciled paste: pixels with object alpha 255 are replaced, all
/// others are byte-identical to the background. No blending.
ImageBuffer composite(const ImageBuffer& background, const ObjectInstance& object,
                      const Placement& placement);

enum class ProbeVerdict { kFail, kPass, kInvalid };

struct RelocationOutcome {
  Point start;
  Point target;
  double frontier_t = 0.0;               // largest failing t found
  std::vector<Point> failing_positions;  // positions of failing probes
  int queries_used = 0;
};

/// Bisection along the segment start -> target for the largest t whose
/// placement still fails. Precondition (not re-queried, to keep the query
/// budget at ceil(log2(1/delta)) + 1): the start placement fails.
RelocationOutcome relocate(const Placement& failing_start, Point target,
                           const std::function<ProbeVerdict(const Placement&)>& oracle,
                           double delta);

/// Default termination granularity: 1% of the segment or 2 pixels,
/// whichever is larger.
double default_relocation_delta(Point start, Point target);

/// One failing synthetic position, for uniqueness accounting.
struct FailingPosition {
  std::string background;  // content hash
  std::string object_id;
  Point center;
};

/// Count of distinct (background, object, integer-rounded center) triples.
long dedup_positions(const std::vector<FailingPosition>& positions);

}  // namespace metaod
