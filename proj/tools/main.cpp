#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>

#include "metaod/campaign.hpp"
#include "metaod/errors.hpp"
#include "metaod/extraction.hpp"
#include "metaod/gateway.hpp"
#include "metaod/image_io.hpp"
#include "metaod/object_pool.hpp"

#include <json.hpp>
#include <fstream>

namespace {

using namespace metaod;

int cmd_extract(const std::string& images_dir, const std::string& annotations,
                const std::string& pool_dir) {
  const AnnotationFile doc = parse_annotation_file(annotations);
  std::map<std::string, ImageBuffer> cache;
  long written = 0, skipped = 0;
  for (const auto& annotation : doc.instances) {
    try {
      auto it = cache.find(annotation.image_file);
      if (it == cache.end())
        it = cache
                 .emplace(annotation.image_file,
                          load_image(std::filesystem::path(images_dir) /
                                     annotation.image_file))
                 .first;
      ObjectInstance instance = extract_instance(it->second, annotation);
      write_pool_entry(pool_dir, std::move(instance));
      ++written;
    } catch (const Error& e) {
      std::cerr << "skipping instance from " << annotation.image_file << ": "
                << e.what() << "\n";
      ++skipped;
    }
  }
  std::cout << "extracted " << written << " instances into " << pool_dir;
  if (skipped) std::cout << " (" << skipped << " skipped)";
  std::cout << "\n";
  return written > 0 || skipped == 0 ? 0 : 1;
}

int cmd_prune(const std::string& pool_dir, double keep) {
  const ObjectPool pool = load_pool(pool_dir);
  const ObjectPool pruned = pool.prune(keep);

  nlohmann::json index;
  index["keep_fraction"] = keep;
  nlohmann::json categories;
  for (const auto& [label, instances] : pruned.categories()) {
    nlohmann::json ids = nlohmann::json::array();
    for (const auto& inst : instances) ids.push_back(inst.id);
    categories[label] = ids;
    const std::size_t before = pool.categories().at(label).size();
    std::cout << label << ": kept " << instances.size() << " of " << before << "\n";
  }
  index["categories"] = categories;
  const auto index_path = std::filesystem::path(pool_dir) / "pruned_index.json";
  std::ofstream out(index_path);
  out << index.dump(2) << "\n";
  std::cout << "pruned view written to " << index_path.string() << "\n";
  return 0;
}

void print_summary(const CampaignSummary& s) {
  const auto opt_num = [](const auto& v) {
    return v ? std::to_string(*v) : std::string("n/a");
  };
  std::cout << "planned trials:            " << s.planned_trials << "\n"
            << "synthetic images:          " << s.synthetic_images << "\n"
            << "detected objects:          " << opt_num(s.detected_objects) << "\n"
            << "images causing failures:   " << s.images_causing_failures << " ("
            << s.failure_percentage << "%)\n"
            << "skipped trials:            " << s.skipped_trials << "\n"
            << "failing with inserted:     " << s.failing_with_inserted << "\n"
            << "failing with relocated:    " << s.failing_with_relocated << "\n"
            << "unique relocated:          " << s.unique_relocated << "\n"
            << "processing time (ms):      " << opt_num(s.processing_time_ms) << "\n"
            << "estimated cost:            " << opt_num(s.estimated_cost) << "\n";
  if (s.relocation_distance_histogram) {
    std::cout << "relocation distance histogram (10% bins, 0% cases excluded):\n  ";
    for (long v : *s.relocation_distance_histogram) std::cout << v << " ";
    std::cout << "\n  zero-distance searches: " << s.relocation_zero_cases << "\n";
    if (s.relocation_distance_mean_pct)
      std::cout << "  mean distance: " << *s.relocation_distance_mean_pct << "%\n";
  }
  if (s.mean_hog_inserted)
    std::cout << "mean HOG intersection (inserted):  " << *s.mean_hog_inserted << "\n";
  if (s.mean_hog_relocated)
    std::cout << "mean HOG intersection (relocated): " << *s.mean_hog_relocated << "\n";
}

int cmd_test(const std::string& config_path) {
  const CampaignConfig cfg = load_campaign_config(config_path);
  auto clock = system_clock();
  auto client = make_client(cfg.endpoint, "cache", clock);
  if (auto* gateway = dynamic_cast<Gateway*>(client.get());
      gateway && !gateway->reachable()) {
    std::cerr << "endpoint " << cfg.endpoint.id << " unreachable at "
              << cfg.endpoint.address << "\n";
    return 2;
  }
  const CampaignResult result = run_campaign(cfg, *client);
  print_summary(result.summary);
  std::cout << "trials:  " << result.trials_path.string() << "\n"
            << "summary: " << result.summary_path.string() << "\n";
  return 0;
}

int cmd_report(const std::string& trials_path) {
  const CampaignSummary summary = recount_trials(trials_path);
  const auto out_path =
      std::filesystem::path(trials_path).parent_path() / "summary.json";
  write_summary(summary, out_path);
  print_summary(summary);
  std::cout << "summary: " << out_path.string() << "\n";
  return 0;
}

int cmd_naturalness(const std::string& trials_path, const std::string& backgrounds) {
  const NaturalnessReport report =
      naturalness_from_trials(trials_path, backgrounds);
  std::cout << "synthetic images compared: "
            << report.compared_inserted + report.compared_relocated << "\n";
  if (report.mean_hog_inserted)
    std::cout << "mean HOG intersection (inserted, " << report.compared_inserted
              << " images):  " << *report.mean_hog_inserted << "\n";
  if (report.mean_hog_relocated)
    std::cout << "mean HOG intersection (relocated, " << report.compared_relocated
              << " images): " << *report.mean_hog_relocated << "\n";
  if (report.missing_images)
    std::cerr << report.missing_images
              << " trials lacked a saved synthetic PNG or a matching background "
                 "(run the campaign with save_images)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metamorphic testing harness for black-box object detectors"};
  app.require_subcommand(1);

  std::string images_dir, annotations, pool_dir, config_path, trials_path,
      backgrounds_dir;
  double keep = 0.10;

  auto* extract = app.add_subcommand("extract", "Build an object pool from images");
  extract->add_option("--images", images_dir, "Directory with source images")
      ->required();
  extract->add_option("--annotations", annotations, "Annotation JSON file")
      ->required();
  extract->add_option("--pool", pool_dir, "Output pool directory")->required();

  auto* prune = app.add_subcommand("prune", "Write the pruned pool view");
  prune->add_option("--pool", pool_dir, "Pool directory")->required();
  prune->add_option("--keep", keep, "Fraction of largest instances to keep");

  auto* test = app.add_subcommand("test", "Run a testing campaign");
  test->add_option("--config", config_path, "Campaign config JSON")->required();

  auto* report = app.add_subcommand("report", "Regenerate summary from trials");
  report->add_option("--trials", trials_path, "trials.jsonl file")->required();

  auto* naturalness =
      app.add_subcommand("naturalness", "HOG naturalness of saved synthetics");
  naturalness->add_option("--trials", trials_path, "trials.jsonl file")->required();
  naturalness->add_option("--backgrounds", backgrounds_dir, "Backgrounds directory")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (extract->parsed()) return cmd_extract(images_dir, annotations, pool_dir);
    if (prune->parsed()) return cmd_prune(pool_dir, keep);
    if (test->parsed()) return cmd_test(config_path);
    if (report->parsed()) return cmd_report(trials_path);
    if (naturalness->parsed()) return cmd_naturalness(trials_path, backgrounds_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
