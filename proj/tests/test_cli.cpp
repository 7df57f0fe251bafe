#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "metaod/hashing.hpp"
#include "metaod/image_io.hpp"
#include "support/images.hpp"

using namespace metaod;

namespace {

int run_cli(const std::filesystem::path& cwd, const std::string& args) {
  const std::string cmd =
      "cd '" + cwd.string() + "' && '" + METAOD_BIN + "' " + args + " >cli.log 2>&1";
  return std::system(cmd.c_str());
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

long count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  long n = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

}  // namespace

TEST_CASE("cli end to end: extract, prune, test, report, naturalness") {
  testing::TempDir dir("cli");
  const auto root = dir.path();

  // Source images + annotations for the pool.
  std::filesystem::create_directories(root / "images");
  for (int i = 0; i < 3; ++i)
    save_png(testing::noise_image(48, 40, 900 + i),
             root / "images" / ("src" + std::to_string(i) + ".png"));
  nlohmann::json ann;
  ann["images"] = nlohmann::json::array();
  ann["instances"] = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) {
    const std::string file = "src" + std::to_string(i) + ".png";
    ann["images"].push_back({{"file", file}, {"width", 48}, {"height", 40}});
    for (const char* label : {"car", "dog"}) {
      const double x = 4 + 6 * i, y = 3 + 4 * i;
      ann["instances"].push_back(
          {{"image", file},
           {"label", label},
           {"polygon", {{x, y}, {x + 20 + i, y}, {x + 20 + i, y + 16 + i}, {x, y + 16 + i}}}});
    }
  }
  std::ofstream(root / "annotations.json") << ann.dump();

  REQUIRE(run_cli(root, "extract --images images --annotations annotations.json "
                        "--pool pool") == 0);
  CHECK(std::filesystem::is_directory(root / "pool" / "car"));
  CHECK(std::filesystem::is_directory(root / "pool" / "dog"));

  REQUIRE(run_cli(root, "prune --pool pool --keep 0.34") == 0);
  REQUIRE(std::filesystem::exists(root / "pool" / "pruned_index.json"));
  {
    std::ifstream in(root / "pool" / "pruned_index.json");
    const auto index = nlohmann::json::parse(in);
    CHECK(index.at("categories").at("car").size() == 2);  // ceil(0.34 * 3)
  }

  // Backgrounds: the canned detector reports two boxes; paint them in.
  std::filesystem::create_directories(root / "backgrounds");
  for (int b = 0; b < 2; ++b) {
    ImageBuffer bg = testing::textured_background(240, 180, 950 + b);
    testing::paint_box(bg, {30, 30, 34, 28}, 200, 80, 80);
    testing::paint_box(bg, {150, 110, 30, 26}, 80, 200, 80);
    save_png(bg, root / "backgrounds" / ("bg" + std::to_string(b) + ".png"));
  }

  // Local detector: a subprocess speaking the canonical protocol.
  const auto script = root / "detector.sh";
  std::ofstream(script)
      << "#!/bin/sh\n"
         "[ -f \"$1\" ] || exit 2\n"
         "echo q >> '" << (root / "calls.log").string() << "'\n"
         "echo '{\"detections\":["
         "{\"label\":\"car\",\"confidence\":0.9,\"box\":{\"x\":30,\"y\":30,\"w\":34,\"h\":28}},"
         "{\"label\":\"dog\",\"confidence\":0.8,\"box\":{\"x\":150,\"y\":110,\"w\":30,\"h\":26}}"
         "]}'\n";
  std::filesystem::permissions(script, std::filesystem::perms::owner_all);

  nlohmann::json config{
      {"endpoint",
       {{"id", "local"},
        {"kind", "subprocess"},
        {"address", script.string()},
        {"qps_limit", 1000.0},
        {"max_in_flight", 1},
        {"timeout", 5000.0},
        {"cost_per_query", 0.001}}},
      {"backgrounds", (root / "backgrounds" / "*.png").string()},
      {"pool_dir", (root / "pool").string()},
      {"budget_multiplier", 10},
      {"insertion_mode", "guided"},
      {"enable_relocation", true},
      {"k", 2.0},
      {"max_attempts", 100},
      {"delta", 0.0},
      {"eps", 0.5},
      {"eps_excl", 0.5},
      {"keep_fraction", 0.5},
      {"seed", 7},
      {"out_dir", (root / "out").string()},
      {"save_images", true}};
  std::ofstream(root / "config.json") << config.dump(2);

  REQUIRE(run_cli(root, "test --config config.json") == 0);
  const auto trials = root / "out" / "trials.jsonl";
  REQUIRE(std::filesystem::exists(trials));
  CHECK(count_lines(trials) == 2 * 2 * 10);  // 2 backgrounds x M=2 x 10
  REQUIRE(std::filesystem::exists(root / "out" / "summary.json"));
  {
    std::ifstream in(root / "out" / "summary.json");
    const auto summary = nlohmann::json::parse(in);
    CHECK(summary.at("planned_trials") == 40);
    CHECK(summary.at("detected_objects") == 4);
    CHECK(summary.at("images_causing_failures") == 0);
    CHECK(summary.at("estimated_cost").get<double>() ==
          doctest::Approx(0.042));  // 2 baselines + 40 trials at $0.001
  }

  // Two reruns on the warmed cache: zero new subprocess calls, and the two
  // warmed runs are byte-identical.
  const long cold_calls = count_lines(root / "calls.log");
  CHECK(cold_calls == 42);  // 2 baselines + 40 trials
  for (const char* name : {"out2", "out3"}) {
    nlohmann::json rerun = config;
    rerun["out_dir"] = (root / name).string();
    const std::string cfg_name = std::string("config_") + name + ".json";
    std::ofstream(root / cfg_name) << rerun.dump(2);
    REQUIRE(run_cli(root, "test --config " + cfg_name) == 0);
  }
  CHECK(count_lines(root / "calls.log") == cold_calls);
  CHECK(slurp(root / "out2" / "trials.jsonl") == slurp(root / "out3" / "trials.jsonl"));
  CHECK(slurp(root / "out2" / "summary.json") == slurp(root / "out3" / "summary.json"));

  REQUIRE(run_cli(root, "report --trials out/trials.jsonl") == 0);
  {
    std::ifstream in(root / "out" / "summary.json");
    const auto summary = nlohmann::json::parse(in);
    CHECK(summary.at("planned_trials") == 40);
    CHECK(summary.at("detected_objects").is_null());  // not recountable
  }

  REQUIRE(run_cli(root, "naturalness --trials out/trials.jsonl "
                        "--backgrounds backgrounds") == 0);
  CHECK(slurp(root / "cli.log").find("mean HOG intersection") != std::string::npos);
}

TEST_CASE("cli test aborts on an unreachable endpoint") {
  testing::TempDir dir("clibad");
  const auto root = dir.path();
  std::filesystem::create_directories(root / "backgrounds");
  save_png(testing::textured_background(64, 64, 1), root / "backgrounds" / "a.png");
  std::filesystem::create_directories(root / "pool");

  nlohmann::json config{
      {"endpoint",
       {{"id", "dead"},
        {"kind", "http"},
        {"address", "http://127.0.0.1:1/detect"},
        {"qps_limit", 10.0},
        {"max_in_flight", 1},
        {"timeout", 500.0}}},
      {"backgrounds", (root / "backgrounds" / "*.png").string()},
      {"pool_dir", (root / "pool").string()},
      {"budget_multiplier", 10},
      {"insertion_mode", "guided"},
      {"enable_relocation", false},
      {"k", 2.0},
      {"max_attempts", 100},
      {"delta", 0.0},
      {"eps", 0.5},
      {"eps_excl", 0.5},
      {"keep_fraction", 0.1},
      {"seed", 1},
      {"out_dir", (root / "out").string()},
      {"save_images", false}};
  std::ofstream(root / "config.json") << config.dump(2);

  const int rc = run_cli(root, "test --config config.json");
  CHECK(rc != 0);
  CHECK(slurp(root / "cli.log").find("unreachable") != std::string::npos);
}
