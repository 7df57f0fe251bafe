#pragma once

#include <string>
#include <vector>

#include "metaod/geometry.hpp"

namespace metaod {

enum class Interpolation { kAllPoint, kElevenPoint };

struct MetricsConfig {
  double iou_threshold = 0.5;  // the matching threshold epsilon
  Interpolation interpolation = Interpolation::kAllPoint;
};

struct MatchedPair {
  int prediction = -1;
  int ground_truth = -1;
  double iou = 0.0;
};

struct MatchResult {
  std::vector<MatchedPair> pairs;
  std::vector<int> unmatched_predictions;
  std::vector<int> unmatched_ground_truth;
};

enum class FailureKind {
  kRecognitionMiss,
  kRecognitionSpurious,
  kClassification,
  kLocalization,
};

const char* to_string(FailureKind kind);

/// One prediction failure; detail holds the involved detection indices
/// (baseline indices for misses, prediction index first otherwise).
struct FailureType {
  FailureKind kind;
  std::vector<int> detail;
};

struct EqualityVerdict {
  bool holds = false;
  double map = 0.0;
};

double iou(const BBox& a, const BBox& b);

/// Greedy confidence-descending assignment of predictions to same-label
/// ground-truth boxes at IoU >= threshold. Ties in confidence are broken by
/// (label, x, y, w, h) lexicographic order so results are reproducible.
MatchResult match_greedy(const DetectionSet& predictions,
                         const DetectionSet& ground_truth,
                         const MetricsConfig& cfg);

/// PASCAL-VOC average precision for a single class. All detections must
/// share one label; ground_truth holds that class's boxes.
double voc_ap(const std::vector<Detection>& predictions,
              const std::vector<BBox>& ground_truth, const MetricsConfig& cfg);

/// Mean AP over the class universe: labels present in either set. A class
/// with predictions but no ground truth contributes AP = 0.
double map_score(const DetectionSet& predictions,
                 const DetectionSet& ground_truth, const MetricsConfig& cfg);

/// The MR equality criterion: holds iff mAP(baseline, synthetic_pruned) is
/// 1.0 within 1e-12. The inserted-object prediction must already have been
/// excluded from synthetic_pruned.
EqualityVerdict equality_criterion(const DetectionSet& baseline,
                                   const DetectionSet& synthetic_pruned,
                                   const MetricsConfig& cfg);

/// Failure taxonomy for a failing pair. Throws ContractViolation when the
/// pair actually passes the equality criterion. Never returns empty on a
/// failing pair.
std::vector<FailureType> classify_failures(const DetectionSet& baseline,
                                           const DetectionSet& synthetic_pruned,
                                           const MetricsConfig& cfg);

}  // namespace metaod
