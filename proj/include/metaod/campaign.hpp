#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "metaod/gateway.hpp"
#include "metaod/insertion.hpp"
#include "metaod/mr_oracle.hpp"
#include "metaod/rng.hpp"

namespace metaod {

struct CampaignConfig {
  DetectorEndpoint endpoint;
  std::string backgrounds;  // path glob
  std::filesystem::path pool_dir;
  int budget_multiplier = 10;
  PlacementMode insertion_mode = PlacementMode::kGuided;
  bool enable_relocation = true;
  double k = 2.0;
  int max_attempts = 100;
  double delta = 0.0;  // <= 0 means max(0.01, 2 px / segment length)
  double eps = 0.5;
  double eps_excl = 0.5;
  double keep_fraction = 0.10;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  bool save_images = false;
};

CampaignConfig load_campaign_config(const std::filesystem::path& path);

/// Aggregate accounting over one campaign. Fields that a recount of
/// trials.jsonl cannot reproduce (they need the images or the live
/// endpoint) are optional and null in regenerated summaries.
struct CampaignSummary {
  long planned_trials = 0;
  long synthetic_images = 0;  // composited-and-queried trial images
  std::optional<long> detected_objects;
  long images_causing_failures = 0;
  double failure_percentage = 0.0;  // over non-skipped trials
  long skipped_trials = 0;
  std::optional<double> processing_time_ms;
  std::optional<double> estimated_cost;
  long backgrounds_processed = 0;
  long backgrounds_skipped = 0;

  long failing_with_inserted = 0;
  long failing_with_relocated = 0;
  long unique_relocated = 0;

  std::optional<std::array<long, 10>> relocation_distance_histogram;
  long relocation_zero_cases = 0;
  std::optional<double> relocation_distance_mean_pct;

  std::optional<double> mean_hog_inserted;
  std::optional<double> mean_hog_relocated;
};

/// (category, anchor) plan of exactly budget_multiplier * |baseline|
/// entries, both coordinates drawn uniformly; deterministic given the rng.
struct PlannedTrial {
  std::string category;
  int anchor_index = 0;
};

std::vector<PlannedTrial> plan_trials(const DetectionSet& baseline,
                                      int budget_multiplier, Rng& rng);

std::string trial_to_json_line(const Trial& trial);

struct CampaignResult {
  CampaignSummary summary;
  std::filesystem::path trials_path;
  std::filesystem::path summary_path;
};

/// Full campaign over all backgrounds matching the glob: baseline query,
/// per-category selection, planned insertions, relocation of failures,
/// streaming report. Trials are recorded in execution order; the order,
/// placements, and all output bytes are functions of (seed, config, cached
/// responses).
CampaignResult run_campaign(const CampaignConfig& cfg, DetectorClient& detector,
                            std::ostream* log = nullptr);

/// Write trials.jsonl and summary.json under out_dir.
void emit_report(const std::vector<Trial>& trials, const CampaignSummary& summary,
                 const std::filesystem::path& out_dir);

void write_summary(const CampaignSummary& summary,
                   const std::filesystem::path& path);

/// Rebuild every recountable summary field from a trials.jsonl file.
CampaignSummary recount_trials(const std::filesystem::path& trials_jsonl);

struct NaturalnessReport {
  long compared_inserted = 0;
  long compared_relocated = 0;
  long missing_images = 0;
  std::optional<double> mean_hog_inserted;
  std::optional<double> mean_hog_relocated;
};

/// Recompute Table-style HOG intersection means from saved synthetic PNGs
/// (out/synthetic/<trial-id>.png next to the trials file) against the
/// backgrounds directory, matched by content hash.
NaturalnessReport naturalness_from_trials(const std::filesystem::path& trials_jsonl,
                                          const std::filesystem::path& backgrounds_dir);

/// Expand a path glob ('*' and '?' in any component) to a sorted file list.
std::vector<std::filesystem::path> expand_glob(const std::string& pattern);

}  // namespace metaod
