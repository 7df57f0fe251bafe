#include "metaod/mr_oracle.hpp"

#include "metaod/errors.hpp"

namespace metaod {

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::kPass: return "pass";
    case Verdict::kFail: return "fail";
    case Verdict::kSkipped: return "skipped";
  }
  return "unknown";
}

ExclusionResult exclude_inserted(const DetectionSet& synthetic_result,
                                 const BBox& inserted_bbox, double eps_excl) {
  ExclusionResult out;
  out.pruned.image_id = synthetic_result.image_id;
  for (const auto& det : synthetic_result.detections) {
    if (iou(det.box, inserted_bbox) >= eps_excl)
      out.excluded.push_back(det);
    else
      out.pruned.detections.push_back(det);
  }
  return out;
}

Trial run_trial(const ImageBuffer& background, const DetectionSet& baseline,
                const ObjectInstance& object, const Placement& placement,
                DetectorClient& detector, const MetricsConfig& metrics_cfg,
                double eps_excl, std::string trial_id) {
  if (baseline.detections.empty())
    throw ContractViolation("run_trial on a zero-object background");

  Trial trial;
  trial.id = std::move(trial_id);
  trial.background = baseline.image_id;
  trial.category = object.label;
  trial.placement = placement;
  trial.inserted_bbox =
      placed_bbox(placement.center, object.image.width, object.image.height);

  const ImageBuffer synthetic = composite(background, object, placement);
  detector.note_trial({trial.background, placement.center, trial.inserted_bbox});

  DetectionSet response;
  try {
    response = detector.detect(synthetic, &trial.latency_ms);
  } catch (const TransportError& e) {
    trial.verdict = Verdict::kSkipped;
    trial.note = e.what();
    return trial;
  }

  auto exclusion = exclude_inserted(response, trial.inserted_bbox, eps_excl);
  trial.excluded = std::move(exclusion.excluded);

  const EqualityVerdict verdict =
      equality_criterion(baseline, exclusion.pruned, metrics_cfg);
  trial.map = verdict.map;
  if (verdict.holds) {
    trial.verdict = Verdict::kPass;
  } else {
    trial.verdict = Verdict::kFail;
    trial.failures = classify_failures(baseline, exclusion.pruned, metrics_cfg);
  }
  return trial;
}

}  // namespace metaod
