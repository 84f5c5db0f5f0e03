#include <gtest/gtest.h>

#include <json.hpp>

#include "cli_support.hpp"
#include "hycount/annotations.hpp"
#include "hycount/replay.hpp"

namespace fs = std::filesystem;
using cli::run;
using cli::slurp;

namespace {

// A small synthetic dataset with replay files, shared across tests.
const fs::path& dataset() {
  static const fs::path dir = [] {
    auto d = cli::fresh_dir("data");
    const auto r = run("synth --images 8 --high-density-images 3 --seed 5 --emit-replay --out-dir " + d.string());
    EXPECT_EQ(r.status, 0) << r.output;
    return d;
  }();
  return dir;
}

std::string replay_flags() {
  const auto& d = dataset();
  return " --annotations " + (d / "annotations.ndjson").string() + " --detector replay:" +
         (d / "detections.ndjson").string() + " --density replay:" + (d / "density.bin").string();
}

}  // namespace

TEST(Cli, HelpListsFlagsAndExitCodes) {
  const auto top = run("--help");
  EXPECT_EQ(top.status, 0);
  for (const char* s : {"count", "eval", "sweep", "synth", "density-gen", "Exit codes", "  6  "})
    EXPECT_NE(top.output.find(s), std::string::npos) << s;
  const auto count = run("count --help");
  for (const char* s : {"--annotations", "--detector", "--density", "--switch-threshold", "--count-score-threshold",
                        "--window", "--overlap", "--nms-iou", "--prune-epsilon", "--nms-mode", "--merge", "--seed",
                        "--jobs", "--output", "--density-scale", "--sigma", "Exit codes"})
    EXPECT_NE(count.output.find(s), std::string::npos) << s;
  const auto sweep = run("sweep --help");
  for (const char* s : {"--param", "--from", "--to", "--step", "--values", "--curve", "--rmse-curve", "--no-cache"})
    EXPECT_NE(sweep.output.find(s), std::string::npos) << s;
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("count --bogus").status, 2);
  EXPECT_EQ(run("").status, 2);
  EXPECT_EQ(run("count --annotations /nonexistent/a.ndjson --detector synthetic --density synthetic --output /tmp/x")
                .status,
            5);
}

TEST(Cli, CountEndToEnd) {
  const auto out = cli::fresh_dir("count") / "counts.ndjson";
  const auto r = run("count" + replay_flags() + " --switch-threshold 165 --window 256 --overlap 0.2 --output " +
                     out.string());
  ASSERT_EQ(r.status, 0) << r.output;
  std::istringstream in(slurp(out));
  std::string line;
  std::getline(in, line);
  const auto header = nlohmann::json::parse(line);
  EXPECT_EQ(header["schema"], "hycount-counts");
  EXPECT_EQ(header["config"]["switch_threshold"], 165.0);
  EXPECT_EQ(header["config"]["window"], 256);
  int rows = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j["branch"] == "detector" || j["branch"] == "density");
    ++rows;
  }
  EXPECT_EQ(rows, 11);
}

TEST(Cli, ReplayMissExitCode) {
  const auto d = cli::fresh_dir("miss");
  {
    std::ofstream f(d / "det.ndjson");
    f << R"({"id":"other","detections":[]})" << '\n';
  }
  const auto r = run("count --annotations " + (dataset() / "annotations.ndjson").string() + " --detector replay:" +
                     (d / "det.ndjson").string() + " --density synthetic --output " + (d / "o").string());
  EXPECT_EQ(r.status, 4) << r.output;
  EXPECT_NE(r.output.find("img_0000"), std::string::npos);
}

TEST(Cli, MalformedInputExitCode) {
  const auto d = cli::fresh_dir("bad");
  {
    std::ofstream f(d / "a.ndjson");
    f << "{not json\n";
  }
  const auto r = run("count --annotations " + (d / "a.ndjson").string() +
                     " --detector synthetic --density synthetic --output " + (d / "o").string());
  EXPECT_EQ(r.status, 3) << r.output;
}

TEST(Cli, SweepThresholdGridHas41Rows) {
  const auto d = cli::fresh_dir("sweep");
  const auto r = run("sweep --param switch-threshold --from 0 --to 200 --step 5 --quiet" + replay_flags() +
                     " --output " + (d / "s.json").string() + " --curve " + (d / "mae.txt").string());
  ASSERT_EQ(r.status, 0) << r.output;
  const auto j = nlohmann::json::parse(slurp(d / "s.json"));
  EXPECT_EQ(j["rows"].size(), 41u);
  EXPECT_EQ(j["schema"], "hycount-sweep");
  std::istringstream curve(slurp(d / "mae.txt"));
  std::string line;
  int lines = 0;
  while (std::getline(curve, line)) ++lines;
  EXPECT_EQ(lines, 42);  // header + 41
}

TEST(Cli, SynthIsByteIdentical) {
  const auto a = cli::fresh_dir("synth_a"), b = cli::fresh_dir("synth_b");
  ASSERT_EQ(run("synth --images 100 --seed 7 --out-dir " + a.string()).status, 0);
  ASSERT_EQ(run("synth --images 100 --seed 7 --out-dir " + b.string()).status, 0);
  EXPECT_EQ(slurp(a / "annotations.ndjson"), slurp(b / "annotations.ndjson"));
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
  const auto ds = hycount::annotations::load_annotations((a / "annotations.ndjson").string());
  EXPECT_EQ(ds.scenes.size(), 100u);
}

TEST(Cli, EvalAndDensityGen) {
  const auto d = cli::fresh_dir("eval");
  const auto r = run("eval --quiet" + replay_flags() + " --output " + (d / "e.json").string() + " --pr-curve " +
                     (d / "pr.txt").string());
  ASSERT_EQ(r.status, 0) << r.output;
  const auto j = nlohmann::json::parse(slurp(d / "e.json"));
  EXPECT_EQ(j["images"].size(), 11u);
  EXPECT_GE(j["summary"]["ap"].get<double>(), 0.0);
  EXPECT_LE(j["summary"]["ap"].get<double>(), 1.0);

  const auto g = run("density-gen --annotations " + (dataset() / "annotations.ndjson").string() + " --output " +
                     (d / "gt.bin").string() + " --output-scale 8");
  ASSERT_EQ(g.status, 0) << g.output;
  const auto idx = hycount::replay::load_densities((d / "gt.bin").string());
  const auto ds = hycount::annotations::load_annotations((dataset() / "annotations.ndjson").string());
  ASSERT_EQ(idx.size(), ds.scenes.size());
  for (const auto& s : ds.scenes) EXPECT_NEAR(hycount::density::integrate(idx.at(s.id)), double(s.count()), 1e-6);
}
