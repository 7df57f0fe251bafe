#include "metaod/campaign.hpp"

#include <glob.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <json.hpp>

#include "metaod/errors.hpp"
#include "metaod/hashing.hpp"
#include "metaod/image_io.hpp"
#include "metaod/naturalness.hpp"
#include "metaod/object_pool.hpp"

namespace metaod {

namespace {

using nlohmann::json;

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

PlacementMode mode_from_string(const std::string& s) {
  if (s == "guided") return PlacementMode::kGuided;
  if (s == "random") return PlacementMode::kRandom;
  if (s == "relocated") return PlacementMode::kRelocated;
  throw Error("unknown insertion mode: " + s);
}

FailureKind failure_kind_from_string(const std::string& s) {
  if (s == "recognition-miss") return FailureKind::kRecognitionMiss;
  if (s == "recognition-spurious") return FailureKind::kRecognitionSpurious;
  if (s == "classification") return FailureKind::kClassification;
  if (s == "localization") return FailureKind::kLocalization;
  throw Error("unknown failure kind: " + s);
}

Verdict verdict_from_string(const std::string& s) {
  if (s == "pass") return Verdict::kPass;
  if (s == "fail") return Verdict::kFail;
  if (s == "skipped") return Verdict::kSkipped;
  throw Error("unknown verdict: " + s);
}

// Skipped-before-compositing records carry this sentinel placement.
bool record_has_image(const Trial& t) {
  return !(t.verdict == Verdict::kSkipped && t.placement.scale == 0.0 &&
           t.placement.center.x == 0.0 && t.placement.center.y == 0.0);
}

json detection_to_json(const Detection& d) {
  return json{{"label", d.label},
              {"confidence", d.confidence},
              {"box",
               {{"x", d.box.x}, {"y", d.box.y}, {"w", d.box.w}, {"h", d.box.h}}}};
}

Trial trial_from_json(const json& j) {
  Trial t;
  t.id = j.at("id").get<std::string>();
  t.background = j.at("background").get<std::string>();
  t.placement.object_id = j.at("object_id").get<std::string>();
  t.category = j.at("category").get<std::string>();
  t.placement.mode = mode_from_string(j.at("mode").get<std::string>());
  t.placement.center = {j.at("center").at(0).get<double>(),
                        j.at("center").at(1).get<double>()};
  t.placement.scale = j.at("scale").get<double>();
  if (!j.at("anchor_index").is_null())
    t.placement.anchor_index = j.at("anchor_index").get<int>();
  t.verdict = verdict_from_string(j.at("verdict").get<std::string>());
  if (!j.at("map").is_null()) t.map = j.at("map").get<double>();
  for (const auto& f : j.at("failures")) {
    FailureType ft{failure_kind_from_string(f.at("kind").get<std::string>()), {}};
    for (const auto& d : f.at("detail")) ft.detail.push_back(d.get<int>());
    t.failures.push_back(std::move(ft));
  }
  for (const auto& e : j.at("excluded")) {
    Detection d;
    d.label = e.at("label").get<std::string>();
    d.confidence = e.at("confidence").get<double>();
    const auto& box = e.at("box");
    d.box = {box.at("x").get<double>(), box.at("y").get<double>(),
             box.at("w").get<double>(), box.at("h").get<double>()};
    t.excluded.push_back(std::move(d));
  }
  t.latency_ms = j.at("latency_ms").get<double>();
  return t;
}

std::vector<Trial> read_trials(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Trial> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(trial_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw IoError("bad trial record at line " + std::to_string(out.size() + 1) +
                    ": " + e.what());
    }
  }
  return out;
}

// Streaming accumulation so run_campaign, emit_report, and recount_trials
// count identically.
struct SummaryAccumulator {
  CampaignSummary sum;
  long judged_trials = 0;
  std::vector<FailingPosition> relocated_failures;
  std::set<std::string> backgrounds_seen;

  void add(const Trial& t) {
    if (t.placement.mode != PlacementMode::kRelocated) ++sum.planned_trials;
    backgrounds_seen.insert(t.background);
    if (record_has_image(t)) ++sum.synthetic_images;
    if (t.verdict == Verdict::kSkipped) {
      ++sum.skipped_trials;
      return;
    }
    ++judged_trials;
    if (t.verdict == Verdict::kFail) {
      ++sum.images_causing_failures;
      if (t.placement.mode == PlacementMode::kRelocated) {
        ++sum.failing_with_relocated;
        relocated_failures.push_back(
            {t.background, t.placement.object_id, t.placement.center});
      } else {
        ++sum.failing_with_inserted;
      }
    }
  }

  void finalize() {
    sum.backgrounds_processed = static_cast<long>(backgrounds_seen.size());
    sum.unique_relocated = dedup_positions(relocated_failures);
    sum.failure_percentage =
        judged_trials > 0 ? 100.0 * sum.images_causing_failures / judged_trials
                          : 0.0;
  }
};

json summary_to_json(const CampaignSummary& s) {
  json j;
  j["planned_trials"] = s.planned_trials;
  j["synthetic_images"] = s.synthetic_images;
  j["detected_objects"] = s.detected_objects ? json(*s.detected_objects) : json();
  j["images_causing_failures"] = s.images_causing_failures;
  j["failure_percentage"] = s.failure_percentage;
  j["skipped_trials"] = s.skipped_trials;
  j["processing_time_ms"] =
      s.processing_time_ms ? json(*s.processing_time_ms) : json();
  j["estimated_cost"] = s.estimated_cost ? json(*s.estimated_cost) : json();
  j["backgrounds_processed"] = s.backgrounds_processed;
  j["backgrounds_skipped"] = s.backgrounds_skipped;
  j["failing_with_inserted"] = s.failing_with_inserted;
  j["failing_with_relocated"] = s.failing_with_relocated;
  j["unique_relocated"] = s.unique_relocated;
  if (s.relocation_distance_histogram) {
    j["relocation_distance_histogram"] = *s.relocation_distance_histogram;
    j["relocation_zero_cases"] = s.relocation_zero_cases;
    j["relocation_distance_mean_pct"] =
        s.relocation_distance_mean_pct ? json(*s.relocation_distance_mean_pct)
                                       : json();
  } else {
    j["relocation_distance_histogram"] = json();
    j["relocation_zero_cases"] = s.relocation_zero_cases;
    j["relocation_distance_mean_pct"] = json();
  }
  j["mean_hog_inserted"] = s.mean_hog_inserted ? json(*s.mean_hog_inserted) : json();
  j["mean_hog_relocated"] =
      s.mean_hog_relocated ? json(*s.mean_hog_relocated) : json();
  return j;
}

}  // namespace

std::string trial_to_json_line(const Trial& t) {
  json failures = json::array();
  for (const auto& f : t.failures)
    failures.push_back({{"kind", to_string(f.kind)}, {"detail", f.detail}});
  json excluded = json::array();
  for (const auto& d : t.excluded) excluded.push_back(detection_to_json(d));

  json j{
      {"id", t.id},
      {"background", t.background},
      {"object_id", t.placement.object_id},
      {"category", t.category},
      {"mode", to_string(t.placement.mode)},
      {"center", {t.placement.center.x, t.placement.center.y}},
      {"scale", t.placement.scale},
      {"anchor_index",
       t.placement.anchor_index ? json(*t.placement.anchor_index) : json()},
      {"verdict", to_string(t.verdict)},
      {"map", t.map ? json(*t.map) : json()},
      {"failures", failures},
      {"excluded", excluded},
      {"latency_ms", t.latency_ms},
  };
  return j.dump();
}

CampaignConfig load_campaign_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError("bad config JSON: " + std::string(e.what()));
  }

  CampaignConfig cfg;
  try {
    const auto& ep = doc.at("endpoint");
    cfg.endpoint.id = ep.at("id").get<std::string>();
    cfg.endpoint.kind = endpoint_kind_from_string(ep.at("kind").get<std::string>());
    cfg.endpoint.address = ep.at("address").get<std::string>();
    if (ep.contains("auth_header") && !ep.at("auth_header").is_null())
      cfg.endpoint.auth_header = ep.at("auth_header").get<std::string>();
    cfg.endpoint.qps_limit = ep.at("qps_limit").get<double>();
    cfg.endpoint.max_in_flight = ep.at("max_in_flight").get<int>();
    cfg.endpoint.timeout_ms = ep.at("timeout").get<double>();
    if (ep.contains("cost_per_query") && !ep.at("cost_per_query").is_null())
      cfg.endpoint.cost_per_query = ep.at("cost_per_query").get<double>();

    cfg.backgrounds = doc.at("backgrounds").get<std::string>();
    cfg.pool_dir = doc.at("pool_dir").get<std::string>();
    cfg.budget_multiplier = doc.at("budget_multiplier").get<int>();
    cfg.insertion_mode =
        mode_from_string(doc.at("insertion_mode").get<std::string>());
    cfg.enable_relocation = doc.at("enable_relocation").get<bool>();
    cfg.k = doc.at("k").get<double>();
    cfg.max_attempts = doc.at("max_attempts").get<int>();
    cfg.delta = doc.at("delta").get<double>();
    cfg.eps = doc.at("eps").get<double>();
    cfg.eps_excl = doc.at("eps_excl").get<double>();
    cfg.keep_fraction = doc.at("keep_fraction").get<double>();
    cfg.seed = doc.at("seed").get<std::uint64_t>();
    cfg.out_dir = doc.at("out_dir").get<std::string>();
    cfg.save_images = doc.at("save_images").get<bool>();
  } catch (const json::exception& e) {
    throw IoError("config field error: " + std::string(e.what()));
  }

  if (cfg.budget_multiplier < 1) throw Error("budget_multiplier must be >= 1");
  if (cfg.keep_fraction <= 0 || cfg.keep_fraction > 1)
    throw Error("keep_fraction must be in (0, 1]");
  if (cfg.eps <= 0 || cfg.eps >= 1) throw Error("eps must be in (0, 1)");
  if (cfg.insertion_mode == PlacementMode::kRelocated)
    throw Error("insertion_mode must be guided or random");
  return cfg;
}

std::vector<PlannedTrial> plan_trials(const DetectionSet& baseline,
                                      int budget_multiplier, Rng& rng) {
  if (baseline.detections.empty())
    throw ContractViolation("plan_trials on an empty baseline");
  std::set<std::string> label_set;
  for (const auto& d : baseline.detections) label_set.insert(d.label);
  const std::vector<std::string> labels(label_set.begin(), label_set.end());

  std::vector<PlannedTrial> plan;
  const std::size_t total =
      static_cast<std::size_t>(budget_multiplier) * baseline.detections.size();
  plan.reserve(total);
  for (std::size_t i = 0; i < total; ++i)
    plan.push_back({labels[rng.index(labels.size())],
                    static_cast<int>(rng.index(baseline.detections.size()))});
  return plan;
}

std::vector<std::filesystem::path> expand_glob(const std::string& pattern) {
  glob_t result{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &result);
  std::vector<std::filesystem::path> paths;
  if (rc == 0) {
    for (std::size_t i = 0; i < result.gl_pathc; ++i) {
      std::filesystem::path p(result.gl_pathv[i]);
      if (std::filesystem::is_regular_file(p)) paths.push_back(std::move(p));
    }
  }
  ::globfree(&result);
  if (rc != 0 && rc != GLOB_NOMATCH) throw IoError("glob failed for " + pattern);
  std::sort(paths.begin(), paths.end());
  return paths;
}

void write_summary(const CampaignSummary& summary,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << summary_to_json(summary).dump(2) << "\n";
}

void emit_report(const std::vector<Trial>& trials, const CampaignSummary& summary,
                 const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream out(out_dir / "trials.jsonl");
  if (!out) throw IoError("cannot write trials.jsonl under " + out_dir.string());
  for (const auto& t : trials) out << trial_to_json_line(t) << "\n";
  out.close();
  write_summary(summary, out_dir / "summary.json");
}

CampaignSummary recount_trials(const std::filesystem::path& trials_jsonl) {
  SummaryAccumulator acc;
  for (const auto& t : read_trials(trials_jsonl)) acc.add(t);
  acc.finalize();
  return acc.sum;
}

namespace {

// Rectangular crop of a baseline detection, used as the reference object
// when hashing "what this category looks like in this background".
ObjectInstance crop_box(const ImageBuffer& image, const BBox& box,
                        const std::string& label) {
  const int x0 = std::clamp(static_cast<int>(std::lround(box.x)), 0, image.width - 1);
  const int y0 = std::clamp(static_cast<int>(std::lround(box.y)), 0, image.height - 1);
  const int x1 =
      std::clamp(static_cast<int>(std::lround(box.right())), x0 + 1, image.width);
  const int y1 =
      std::clamp(static_cast<int>(std::lround(box.bottom())), y0 + 1, image.height);
  ObjectInstance inst;
  inst.label = label;
  inst.image.width = x1 - x0;
  inst.image.height = y1 - y0;
  inst.image.pixels.resize(static_cast<std::size_t>(inst.image.width) *
                           inst.image.height * 4);
  for (int y = 0; y < inst.image.height; ++y)
    std::copy_n(image.at(x0, y0 + y),
                static_cast<std::size_t>(inst.image.width) * 4, inst.image.at(0, y));
  inst.mask_pixel_count =
      static_cast<long>(inst.image.width) * inst.image.height;
  return inst;
}

struct HogAverager {
  double sum = 0.0;
  long count = 0;
  void add(double v) {
    sum += v;
    ++count;
  }
  std::optional<double> mean() const {
    return count > 0 ? std::optional<double>(sum / count) : std::nullopt;
  }
};

}  // namespace

CampaignResult run_campaign(const CampaignConfig& cfg, DetectorClient& detector,
                            std::ostream* log) {
  std::ostream& out_log = log ? *log : std::cerr;
  const ObjectPool pool = load_pool(cfg.pool_dir).prune(cfg.keep_fraction);
  const auto backgrounds = expand_glob(cfg.backgrounds);
  if (backgrounds.empty())
    throw Error("no backgrounds match glob: " + cfg.backgrounds);

  std::filesystem::create_directories(cfg.out_dir);
  const auto synthetic_dir = cfg.out_dir / "synthetic";
  if (cfg.save_images) std::filesystem::create_directories(synthetic_dir);

  const auto trials_path = cfg.out_dir / "trials.jsonl";
  std::ofstream trials_out(trials_path);
  if (!trials_out) throw IoError("cannot write " + trials_path.string());

  const MetricsConfig metrics_cfg{cfg.eps, Interpolation::kAllPoint};
  SummaryAccumulator acc;
  long detected_objects = 0;
  long backgrounds_skipped = 0;
  std::array<long, 10> distance_histogram{};
  long zero_cases = 0;
  double distance_sum_pct = 0.0;
  long distance_count = 0;
  HogAverager hog_inserted, hog_relocated;

  for (const auto& path : backgrounds) {
    ImageBuffer image;
    DetectionSet baseline;
    try {
      image = load_image(path);
      baseline = detector.detect(image);
    } catch (const Error& e) {
      out_log << "skipping background " << path << ": " << e.what() << "\n";
      ++backgrounds_skipped;
      continue;
    }
    if (baseline.detections.empty()) {
      out_log << "skipping background " << path << ": no detections\n";
      ++backgrounds_skipped;
      continue;
    }
    const std::string bg_hash = baseline.image_id;
    const std::string bg_tag = bg_hash.substr(0, 16);
    detected_objects += static_cast<long>(baseline.detections.size());

    std::optional<HOGDescriptor> bg_hog;
    if (image.width >= 16 && image.height >= 16) bg_hog = hog(image);

    Rng rng(Rng::mix(cfg.seed, fnv1a64(bg_hash)));
    const auto plan = plan_trials(baseline, cfg.budget_multiplier, rng);

    // Per-category object selection, resolved once per background.
    std::map<std::string, std::optional<ResizedInstance>> selections;
    const auto select_for = [&](const std::string& category)
        -> const std::optional<ResizedInstance>& {
      auto it = selections.find(category);
      if (it != selections.end()) return it->second;
      std::optional<ResizedInstance> selected;
      try {
        std::vector<ObjectInstance> crops;
        std::vector<BBox> boxes;
        for (const auto& det : baseline.detections)
          if (det.label == category) {
            crops.push_back(crop_box(image, det.box, category));
            boxes.push_back(det.box);
          }
        const ObjectInstance& candidate =
            select_similar(pool, category, reference_hash(crops));
        selected = resize_to_category(candidate, boxes, image.width, image.height);
      } catch (const MissingCategoryError& e) {
        out_log << "background " << bg_tag << ": " << e.what() << "\n";
      } catch (const DegenerateAnnotationError& e) {
        out_log << "background " << bg_tag << ": " << e.what() << "\n";
      }
      return selections.emplace(category, std::move(selected)).first->second;
    };

    const auto record = [&](const Trial& trial,
                            const ObjectInstance* object) {
      trials_out << trial_to_json_line(trial) << "\n";
      acc.add(trial);
      if (trial.verdict == Verdict::kSkipped || object == nullptr) return;
      const ImageBuffer synthetic = composite(image, *object, trial.placement);
      if (cfg.save_images) save_png(synthetic, synthetic_dir / (trial.id + ".png"));
      if (bg_hog) {
        const double score = hog_intersection(hog(synthetic), *bg_hog);
        if (trial.placement.mode == PlacementMode::kRelocated)
          hog_relocated.add(score);
        else
          hog_inserted.add(score);
      }
    };

    const auto skipped_trial = [&](std::string id, const std::string& category,
                                   const std::string& object_id,
                                   std::optional<int> anchor, const std::string& why) {
      Trial t;
      t.id = std::move(id);
      t.background = bg_hash;
      t.category = category;
      t.placement.object_id = object_id;
      t.placement.mode = cfg.insertion_mode;
      t.placement.anchor_index = anchor;
      t.placement.scale = 0.0;  // sentinel: no image was composited
      t.verdict = Verdict::kSkipped;
      t.note = why;
      return t;
    };

    int seq = 0;
    for (const auto& planned : plan) {
      const std::string trial_id = bg_tag + "-t" + std::to_string(seq);
      ++seq;
      const auto& selection = select_for(planned.category);
      if (!selection) {
        record(skipped_trial(trial_id, planned.category, "", planned.anchor_index,
                             "category missing from pool"),
               nullptr);
        continue;
      }
      const ObjectInstance& object = selection->instance;

      Placement placement;
      try {
        placement = cfg.insertion_mode == PlacementMode::kGuided
                        ? sample_guided(baseline, object, image.width, image.height,
                                        rng, cfg.k, cfg.max_attempts,
                                        planned.anchor_index)
                        : sample_random(baseline, object, image.width, image.height,
                                        rng, cfg.max_attempts);
      } catch (const PlacementExhaustionError& e) {
        record(skipped_trial(trial_id, planned.category, object.id,
                             planned.anchor_index, e.what()),
               nullptr);
        continue;
      }
      placement.scale = selection->scale;

      const Trial trial = run_trial(image, baseline, object, placement, detector,
                                    metrics_cfg, cfg.eps_excl, trial_id);
      record(trial, &object);

      if (trial.verdict != Verdict::kFail || !cfg.enable_relocation) continue;

      const Point target = centroid(baseline);
      const double delta = cfg.delta > 0
                               ? cfg.delta
                               : default_relocation_delta(placement.center, target);
      int probe_seq = 0;
      const auto oracle = [&](const Placement& probe) -> ProbeVerdict {
        const BBox box =
            placed_bbox(probe.center, object.image.width, object.image.height);
        if (box.x < 0 || box.y < 0 || box.right() > image.width ||
            box.bottom() > image.height)
          return ProbeVerdict::kInvalid;
        for (const auto& det : baseline.detections)
          if (overlaps(box, det.box)) return ProbeVerdict::kInvalid;
        const std::string probe_id =
            trial_id + "-r" + std::to_string(probe_seq++);
        const Trial probe_trial = run_trial(image, baseline, object, probe,
                                            detector, metrics_cfg, cfg.eps_excl,
                                            probe_id);
        record(probe_trial, &object);
        if (probe_trial.verdict == Verdict::kSkipped) return ProbeVerdict::kInvalid;
        return probe_trial.verdict == Verdict::kFail ? ProbeVerdict::kFail
                                                     : ProbeVerdict::kPass;
      };
      const RelocationOutcome outcome = relocate(placement, target, oracle, delta);
      if (outcome.frontier_t > 0.0) {
        const double pct = outcome.frontier_t * 100.0;
        ++distance_histogram[std::min(9, static_cast<int>(pct / 10.0))];
        distance_sum_pct += pct;
        ++distance_count;
      } else {
        ++zero_cases;
      }
    }
  }
  trials_out.close();

  acc.finalize();
  CampaignSummary summary = acc.sum;
  summary.detected_objects = detected_objects;
  summary.backgrounds_skipped = backgrounds_skipped;
  const QueryStats stats = detector.stats();
  summary.processing_time_ms = stats.total_latency_ms;
  summary.estimated_cost = stats.estimated_cost;
  summary.relocation_distance_histogram = distance_histogram;
  summary.relocation_zero_cases = zero_cases;
  if (distance_count > 0)
    summary.relocation_distance_mean_pct = distance_sum_pct / distance_count;
  summary.mean_hog_inserted = hog_inserted.mean();
  summary.mean_hog_relocated = hog_relocated.mean();

  const auto summary_path = cfg.out_dir / "summary.json";
  write_summary(summary, summary_path);
  return {std::move(summary), trials_path, summary_path};
}

NaturalnessReport naturalness_from_trials(const std::filesystem::path& trials_jsonl,
                                          const std::filesystem::path& backgrounds_dir) {
  // Index backgrounds by content hash so records can find their source.
  std::map<std::string, HOGDescriptor> background_hogs;
  for (const auto& entry : std::filesystem::directory_iterator(backgrounds_dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext != ".png" && ext != ".jpg" && ext != ".jpeg") continue;
    try {
      const ImageBuffer img = load_image(entry.path());
      if (img.width >= 16 && img.height >= 16)
        background_hogs.emplace(content_hash(img), hog(img));
    } catch (const Error&) {
      continue;
    }
  }

  const auto synthetic_dir = trials_jsonl.parent_path() / "synthetic";
  NaturalnessReport report;
  HogAverager inserted, relocated;
  for (const auto& t : read_trials(trials_jsonl)) {
    if (t.verdict == Verdict::kSkipped) continue;
    const auto bg = background_hogs.find(t.background);
    const auto png = synthetic_dir / (t.id + ".png");
    if (bg == background_hogs.end() || !std::filesystem::exists(png)) {
      ++report.missing_images;
      continue;
    }
    const double score = hog_intersection(hog(load_image(png)), bg->second);
    if (t.placement.mode == PlacementMode::kRelocated)
      relocated.add(score);
    else
      inserted.add(score);
  }
  report.compared_inserted = inserted.count;
  report.compared_relocated = relocated.count;
  report.mean_hog_inserted = inserted.mean();
  report.mean_hog_relocated = relocated.mean();
  return report;
}

}  // namespace metaod
