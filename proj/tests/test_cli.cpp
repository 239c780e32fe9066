#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "calibkit/cli.hpp"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "calibkit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = calibkit::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("calibkit_cli_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("synth then metrics on the calibrated preset") {
    TempDir dir;
    const std::string log = dir / "perfect.jsonl";
    const Run s = cli({"synth", "--preset", "perfect", "--n", "20000", "--seed", "7", "--out", log});
    REQUIRE(s.code == 0);
    CHECK(fs::exists(log + ".truth.json"));
    const Run m = cli({"metrics", log, "--out-dir", dir / "m"});
    REQUIRE(m.code == 0);
    const auto j = nlohmann::json::parse(m.out);
    CHECK(j["n"] == 20000);
    CHECK(j["m_bins"] == 12);
    CHECK(j["ece1"].get<double>() < 0.02);
    CHECK(slurp(dir / "m/reliability.csv").rfind("bin_index,count,mean_confidence,mean_accuracy\n", 0) == 0);
  }

  TEST_CASE("exit codes") {
    TempDir dir;
    const std::string empty = dir / "empty.jsonl";
    std::ofstream(empty).close();
    const Run e = cli({"metrics", empty});
    CHECK(e.code == 2);
    CHECK(e.err.find("EmptyInput") != std::string::npos);

    const Run flag = cli({"metrics", empty, "--no-such-flag"});
    CHECK(flag.code == 2);
    CHECK(flag.err.find("--no-such-flag") != std::string::npos);

    CHECK(cli({}).code == 2);
    CHECK(cli({"metrics", dir / "missing.jsonl"}).code == 1);
    CHECK(cli({"synth", "--preset", "nope", "--out", dir / "x.jsonl"}).code == 2);

    const std::string bad = dir / "bad.jsonl";
    std::ofstream(bad) << R"({"schema_version":1,"episode_id":"a","task_id":"t","outcome":1,"variants":[{"variant_id":0,"steps":[{"t":1,"dims":[{"top_prob":1.5}]}]}]})"
                       << '\n';
    const Run p = cli({"metrics", bad});
    CHECK(p.code == 2);
    CHECK(p.err.find("variants[0].steps[0].dims[0].top_prob") != std::string::npos);
    CHECK(cli({"metrics", bad, "--lenient"}).code == 2);
  }

  TEST_CASE("every subcommand runs and is byte-reproducible under a fixed seed") {
    TempDir dir;
    const std::string log = dir / "h.jsonl";
    REQUIRE(cli({"synth", "--preset", "hetero7", "--n", "300", "--seed", "5", "--variants", "6", "--prompt-noise-sd",
                 "0.05", "--out", log})
                .code == 0);
    const std::string log2 = dir / "h2.jsonl";
    REQUIRE(cli({"synth", "--preset", "hetero7", "--n", "300", "--seed", "5", "--variants", "6", "--prompt-noise-sd",
                 "0.05", "--out", log2})
                .code == 0);
    CHECK(slurp(log) == slurp(log2));
    CHECK(slurp(log + ".truth.json") == slurp(log2 + ".truth.json"));

    const std::vector<std::vector<std::string>> commands{
        {"metrics", log, "--ensemble", "--agg", "mean"},
        {"ensemble-ablation", log, "--k-list", "1,3,6", "--trials", "20", "--seed", "2"},
        {"recalibrate", log, "--method", "aw-platt", "--splits", "4", "--seed", "3"},
        {"recalibrate", log, "--method", "aw-temp", "--splits", "3", "--seed", "3"},
        {"temporal", log, "--agg", "window", "--bins", "10"},
        {"monitor", log, "--loo"},
        {"audit", log, "--bins", "10"},
        {"compare", log, log2, "--bins", "10"},
    };
    for (const auto& base : commands) {
      CAPTURE(base[0]);
      std::vector<std::string> a = base, b = base;
      a.insert(a.end(), {"--out-dir", dir / (base[0] + "_a")});
      b.insert(b.end(), {"--out-dir", dir / (base[0] + "_b")});
      const Run ra = cli(a);
      const Run rb = cli(b);
      REQUIRE(ra.code == 0);
      REQUIRE(rb.code == 0);
      CHECK(ra.out == rb.out);
      for (const auto& entry : fs::directory_iterator(dir / (base[0] + "_a"))) {
        CHECK(slurp(entry.path()) == slurp(fs::path(dir / (base[0] + "_b")) / entry.path().filename()));
      }
    }
    CHECK(fs::exists(dir / "temporal_a/curve.csv"));
    CHECK(fs::exists(dir / "temporal_a/reliability_pct99.csv"));
    CHECK(fs::exists(dir / "monitor_a/profile.csv"));
    CHECK(fs::exists(dir / "recalibrate_a/recalibrator.txt"));

    const Run again = cli({"monitor", log, "--profile", dir / "monitor_a/profile.csv", "--out-dir", dir / "m2"});
    CHECK(again.code == 0);
  }
}
