#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "fedhpc/cli.hpp"
#include "fedhpc/default_scenarios.hpp"

using namespace fedhpc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("fedhpc_cli_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  fs::path path;
};

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// A quick variant of the queued scenario for end-to-end CLI runs.
fs::path small_config(const fs::path& dir) {
  std::string text(default_scenario_text("table4_queued.cfg"));
  auto swap = [&](std::string_view from, std::string_view to) { text.replace(text.find(from), from.size(), to); };
  swap("\"n_features\": 249", "\"n_features\": 12");
  swap("\"n_classes\": 20", "\"n_classes\": 8");
  swap("\"train_samples\": 16712", "\"train_samples\": 1200");
  swap("\"test_samples\": 2000", "\"test_samples\": 400");
  const fs::path p = dir / "small.cfg";
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("emit-defaults writes both scenarios and refuses to overwrite") {
  TempDir tmp;
  const fs::path out = tmp.path / "defaults";
  CHECK(run({"emit-defaults", "--out", out.string()}).code == kExitOk);
  CHECK(slurp(out / "table4_queued.cfg") == default_scenario_text("table4_queued.cfg"));
  CHECK(slurp(out / "coscheduled_64node.cfg") == default_scenario_text("coscheduled_64node.cfg"));

  const Result again = run({"emit-defaults", "--out", out.string()});
  CHECK(again.code == kExitUsage);
  CHECK(again.err.find("--force") != std::string::npos);
  CHECK(run({"emit-defaults", "--out", out.string(), "--force"}).code == kExitOk);
}

TEST_CASE("simulate writes metrics and summary, deterministically") {
  TempDir tmp;
  const fs::path cfg = small_config(tmp.path);
  const Result a = run({"simulate", "--config", cfg.string(), "--seed", "42", "--out", (tmp.path / "a").string(),
                        "--algorithm", "fedavg", "--trace"});
  REQUIRE(a.code == kExitOk);
  CHECK(a.out.find("rounds: 10/10/10/10") != std::string::npos);
  CHECK(fs::exists(tmp.path / "a" / "metrics.csv"));
  CHECK(fs::exists(tmp.path / "a" / "summary.txt"));
  CHECK(fs::exists(tmp.path / "a" / "events.csv"));
  CHECK(slurp(tmp.path / "a" / "summary.txt").find("rounds: 10/10/10/10") != std::string::npos);

  CHECK(run({"simulate", "--config", cfg.string(), "--seed", "42", "--out", (tmp.path / "b").string(), "--algorithm",
             "fedavg"})
            .code == kExitOk);
  CHECK(slurp(tmp.path / "a" / "metrics.csv") == slurp(tmp.path / "b" / "metrics.csv"));
  CHECK_FALSE(fs::exists(tmp.path / "b" / "events.csv"));

  const Result clash = run({"simulate", "--config", cfg.string(), "--out", (tmp.path / "a").string()});
  CHECK(clash.code == kExitUsage);

  CHECK(run({"simulate", "--config", cfg.string(), "--out", (tmp.path / "c").string(), "--format", "csv"}).code ==
        kExitOk);
  CHECK(fs::exists(tmp.path / "c" / "summary.csv"));
}

TEST_CASE("config and usage errors exit 2 without writing files") {
  TempDir tmp;
  const fs::path out = tmp.path / "never";
  const Result missing = run({"simulate", "--config", (tmp.path / "missing.cfg").string(), "--out", out.string()});
  CHECK(missing.code == kExitUsage);
  CHECK_FALSE(fs::exists(out));

  std::ofstream(tmp.path / "bad.cfg") << "{ \"name\": 3 }";
  const Result bad = run({"simulate", "--config", (tmp.path / "bad.cfg").string(), "--out", out.string()});
  CHECK(bad.code == kExitUsage);
  CHECK(bad.err.find("name") != std::string::npos);
  CHECK_FALSE(fs::exists(out));

  const fs::path cfg = small_config(tmp.path);
  const Result typo = run({"compare", "--config", cfg.string(), "--algorithm", "fedavg", "--algorithm", "fedcompas",
                           "--out", out.string()});
  CHECK(typo.code == kExitUsage);
  CHECK(typo.err.find("fedavg, fedasync, fedbuff, fedcompass") != std::string::npos);
  CHECK_FALSE(fs::exists(out));

  CHECK(run({"compare", "--config", cfg.string(), "--algorithm", "fedavg", "--out", out.string()}).code == kExitUsage);
  CHECK(run({"simulate"}).code == kExitUsage);
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"simulate", "--config", cfg.string(), "--format", "yaml"}).code == kExitUsage);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("compare writes a comparison table") {
  TempDir tmp;
  const fs::path cfg = small_config(tmp.path);
  const Result r = run({"compare", "--config", cfg.string(), "--out", (tmp.path / "cmp").string(), "--jobs", "2"});
  REQUIRE(r.code == kExitOk);
  const std::string table = slurp(tmp.path / "cmp" / "comparison.csv");
  std::istringstream in(table);
  std::vector<std::string> rows;
  for (std::string line; std::getline(in, line);) rows.push_back(line);
  REQUIRE(rows.size() == 5);
  for (const char* algo : {"fedavg", "fedasync", "fedbuff", "fedcompass"}) {
    CHECK(fs::exists(tmp.path / "cmp" / (std::string("metrics_") + algo + ".csv")));
  }
}

TEST_CASE("compare sweep reports the ordering line") {
  TempDir tmp;
  const fs::path cfg = small_config(tmp.path);
  const Result r = run({"compare", "--config", cfg.string(), "--out", (tmp.path / "sw").string(), "--sweep-seeds", "3",
                        "--algorithm", "fedasync", "--algorithm", "fedcompass"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("fedcompass <= fedasync final loss: ") != std::string::npos);
  CHECK(fs::exists(tmp.path / "sw" / "sweep.csv"));
}

TEST_CASE("calibrate-check on the shipped defaults") {
  const Result r = run({"calibrate-check"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("aurora@64 = 2100.0 samples/s (anchor 2100, +/-1%): PASS") != std::string::npos);
  CHECK(r.out.find("13B -> 26000 MB (expected 26000): PASS") != std::string::npos);
  CHECK(r.out.find("Polaris queue median@64") != std::string::npos);
  CHECK(r.out.find("FAIL") == std::string::npos);
}

TEST_CASE("calibrate-check flags a miscalibrated curve") {
  TempDir tmp;
  std::string text(default_scenario_text("table4_queued.cfg"));
  text.replace(text.find("[64, 2100]"), 10, "[64, 1900]");
  std::ofstream(tmp.path / "off.cfg") << text;
  const Result r = run({"calibrate-check", "--config", (tmp.path / "off.cfg").string()});
  CHECK(r.code == kExitCheckFailed);
  CHECK(r.out.find("aurora@64 = 1900.0 samples/s (anchor 2100, +/-1%): FAIL") != std::string::npos);
}

TEST_CASE("every emitted scenario runs") {
  TempDir tmp;
  REQUIRE(run({"emit-defaults", "--out", tmp.path.string()}).code == kExitOk);
  for (const auto& s : default_scenarios()) {
    const Result r = run({"simulate", "--config", (tmp.path / s.file_name).string(), "--out",
                          (tmp.path / ("run_" + std::string(s.file_name))).string()});
    CHECK(r.code == kExitOk);
  }
}
