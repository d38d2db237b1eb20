#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fedhpc/default_scenarios.hpp"
#include "fedhpc/errors.hpp"
#include "fedhpc/scenario.hpp"

using namespace fedhpc;

namespace {

ScenarioConfig shipped(std::string_view file) { return parse_scenario(default_scenario_text(file)); }

std::string replace_once(std::string text, std::string_view from, std::string_view to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, from.size(), to);
  return text;
}

std::string config_error_path(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<no error>";
}

const FacilityProfile& facility(const ScenarioConfig& cfg, std::string_view name) {
  for (const auto& f : cfg.facilities) {
    if (f.name == name) return f;
  }
  FAIL("no facility " << name);
  return cfg.facilities.front();
}

}  // namespace

TEST_CASE("shipped scenarios parse") {
  const ScenarioConfig co = shipped("coscheduled_64node.cfg");
  CHECK(co.algorithm.kind == AlgorithmKind::fedavg);
  CHECK(co.rounds_budget == 32u);
  CHECK(co.n_clients() == 4);
  for (const auto& f : co.facilities) CHECK(f.reservation);

  const ScenarioConfig q = shipped("table4_queued.cfg");
  CHECK(q.rounds_budget == 40u);
  CHECK(q.wallclock_budget_s == 17000.0);
  CHECK(q.model_param_count == 6738415616u);
  for (const auto& f : q.facilities) {
    CHECK_FALSE(f.reservation);
    CHECK(f.nodes == 2);
  }
}

TEST_CASE("effective batches of the shipped scenarios") {
  const ScenarioConfig co = shipped("coscheduled_64node.cfg");
  CHECK(facility(co, "Polaris").effective_batch() == 1512);
  CHECK(facility(co, "Perlmutter").effective_batch() == 1536);
  CHECK(facility(co, "Aurora").effective_batch() == 6144);
  CHECK(facility(co, "Frontier").effective_batch() == 4096);
  CHECK(facility(co, "Polaris").total_gpus() == 252);
  CHECK(facility(co, "Aurora").total_gpus() == 768);

  const ScenarioConfig q = shipped("table4_queued.cfg");
  CHECK(facility(q, "Polaris").effective_batch() == 48);
  CHECK(facility(q, "Perlmutter").effective_batch() == 48);
  CHECK(facility(q, "Aurora").effective_batch() == 192);
  CHECK(facility(q, "Frontier").effective_batch() == 128);
  CHECK(facility(q, "Aurora").total_gpus() == 24);
}

TEST_CASE("latency literals are written exactly") {
  const std::string text(default_scenario_text("table4_queued.cfg"));
  for (const char* literal : {"\"rtt_ms\": 0.266,", "\"rtt_ms\": 0.210,", "\"rtt_ms\": 17.281,", "\"rtt_ms\": 45.205,"}) {
    CHECK(text.find(literal) != std::string::npos);
  }
  const ScenarioConfig q = shipped("table4_queued.cfg");
  CHECK(facility(q, "Aurora").rtt_ms == 0.266);
  CHECK(facility(q, "Polaris").rtt_ms == 0.210);
  CHECK(facility(q, "Frontier").rtt_ms == 17.281);
  CHECK(facility(q, "Perlmutter").rtt_ms == 45.205);
}

TEST_CASE("derived algorithm defaults") {
  const ScenarioConfig q = shipped("table4_queued.cfg");
  CHECK(q.algorithm.q_max == 100);
  CHECK(q.algorithm.q_min == 10);
  CHECK(q.algorithm.group_window_s == doctest::Approx(0.05 * expected_round_s(q)));
  CHECK(q.algorithm.buffer_size == 2);
}

TEST_CASE("initial steps") {
  const ScenarioConfig q = shipped("table4_queued.cfg");
  const std::uint64_t table_counts[] = {78319, 1217627, 1925903, 120565};
  CHECK(initial_steps(q, table_counts) == std::vector<std::int64_t>{4, 63, 100, 6});

  const ScenarioConfig co = shipped("coscheduled_64node.cfg");
  const auto steps = initial_steps(co, table_counts);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& f = co.facilities[i];
    CHECK(training_duration(f, steps[i]) == doctest::Approx(co.target_round_s).epsilon(0.01));
  }
}

TEST_CASE("config errors name the offending field") {
  const std::string text(default_scenario_text("table4_queued.cfg"));
  CHECK(config_error_path(replace_once(text, "\"rtt_ms\": 0.266", "\"rtt_ms\": -1")) == "facilities[2]");
  CHECK(config_error_path(replace_once(text, "\"nodes\": 2,", "\"nodez\": 2,")) == "facilities[0].nodez");
  CHECK(config_error_path(replace_once(text, "\"kind\": \"fedavg\"", "\"kind\": \"fedavgx\"")) == "algorithm.kind");
  CHECK(config_error_path(replace_once(text, "\"skew\": 0.9", "\"skew\": 1.5")) == "task.skew");
  CHECK(config_error_path(replace_once(text, "\"micro_batch\": 16", "\"micro_batch\": \"x\"")) ==
        "trainer.micro_batch");
  CHECK(config_error_path(replace_once(text, "\"throughput_profile\": \"aurora\"", "\"throughput_profile\": \"nope\"")) ==
        "facilities[2].throughput_profile");
  CHECK(config_error_path("{ not json") == "");
  CHECK_THROWS_AS(load_scenario("/nonexistent/path.cfg"), ConfigError);
}

TEST_CASE("a stopping criterion is required") {
  std::string text(default_scenario_text("table4_queued.cfg"));
  text = replace_once(text, "\"rounds_budget\": 40,", "");
  text = replace_once(text, "\"wallclock_budget_s\": 17000,     // includes the first queue wait", "");
  CHECK(config_error_path(text) == "run");
}

TEST_CASE("seed resolution order") {
  ScenarioConfig cfg = shipped("table4_queued.cfg");
  ::unsetenv("FEDHPC_SIM_SEED");
  CHECK(resolve_seed(cfg, std::nullopt) == 1);
  ::setenv("FEDHPC_SIM_SEED", "77", 1);
  CHECK(resolve_seed(cfg, std::nullopt) == 77);
  cfg.seed = 5;
  CHECK(resolve_seed(cfg, std::nullopt) == 5);
  CHECK(resolve_seed(cfg, 9) == 9);
  ::unsetenv("FEDHPC_SIM_SEED");
}

TEST_CASE("scenario files in the repository match the built-in copies") {
  for (const auto& s : default_scenarios()) {
    std::ifstream in(std::string(FEDHPC_SOURCE_DIR) + "/scenarios/" + std::string(s.file_name), std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    CHECK(buf.str() == s.text);
  }
}
