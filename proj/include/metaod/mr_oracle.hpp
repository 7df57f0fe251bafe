#pragma once

#include <optional>
#include <string>
#include <vector>

#include "metaod/gateway.hpp"
#include "metaod/geometry.hpp"
#include "metaod/insertion.hpp"
#include "metaod/metrics.hpp"

namespace metaod {

enum class Verdict { kPass, kFail, kSkipped };

const char* to_string(Verdict v);

/// One metamorphic trial: a synthetic image, the detector's verdict on it,
/// and the failure classification when the relation breaks.
struct Trial {
  std::string id;
  std::string background;  // content hash
  std::string category;    // inserted object's category
  Placement placement;
  BBox inserted_bbox;
  Verdict verdict = Verdict::kSkipped;
  std::optional<double> map;  // absent for skipped trials
  std::vector<FailureType> failures;
  std::vector<Detection> excluded;
  double latency_ms = 0.0;
  std::string note;  // skip reason, empty otherwise
};

struct ExclusionResult {
  DetectionSet pruned;
  std::vector<Detection> excluded;
};

/// Move every detection with IoU >= eps_excl against the inserted box (any
/// label) into `excluded`, preserving order in both lists. The conservative
/// oracle checks only what remains.
ExclusionResult exclude_inserted(const DetectionSet& synthetic_result,
                                 const BBox& inserted_bbox, double eps_excl = 0.5);

/// Execute one trial: composite, query, exclude the inserted-object
/// prediction, evaluate the equality criterion, classify failures. A
/// transport error degrades to verdict = skipped.
Trial run_trial(const ImageBuffer& background, const DetectionSet& baseline,
                const ObjectInstance& object, const Placement& placement,
                DetectorClient& detector, const MetricsConfig& metrics_cfg,
                double eps_excl, std::string trial_id);

}  // namespace metaod
