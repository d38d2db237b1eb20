#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "fedhpc/default_scenarios.hpp"
#include "fedhpc/errors.hpp"
#include "fedhpc/orchestrator.hpp"
#include "fedhpc/report.hpp"

using namespace fedhpc;

namespace {

// The queued scenario with a much smaller task so each run takes milliseconds.
ScenarioConfig small_queued(AlgorithmKind kind) {
  ScenarioConfig cfg = parse_scenario(default_scenario_text("table4_queued.cfg"));
  cfg.algorithm.kind = kind;
  cfg.task.n_features = 12;
  cfg.task.n_classes = 8;
  cfg.task.train_samples = 1200;
  cfg.task.test_samples = 400;
  cfg.trainer.learning_rate = 0.01;
  return cfg;
}

FacilityProfile simple_profile() {
  FacilityProfile p;
  p.name = "x";
  p.nodes = 2;
  p.gpus_per_node = 4;
  p.micro_batch = 6;
  p.throughput_points = {{1, 24}};
  p.init_overhead_s = 10;
  p.rtt_ms = 0.21;
  p.bandwidth_asymptote_mb_s = 300;
  p.bandwidth_halfsize_mb = 3000;
  p.queue.median_s = 100;
  p.queue.sigma = 0;
  return p;
}

std::vector<SimEvent> drain(SimClock& clock) {
  std::vector<SimEvent> out;
  while (!clock.empty()) out.push_back(clock.next_event());
  return out;
}

std::string metrics_csv(const MetricsLog& log) {
  std::ostringstream s;
  write_metrics_csv(s, log);
  return s.str();
}

}  // namespace

TEST_CASE("dispatch_client schedules the job lifecycle") {
  const FacilityProfile p = simple_profile();
  ClientSlot slot;
  slot.profile = &p;
  SimClock clock(1);
  DispatchSettings settings;
  settings.model_param_count = 125'000'000;

  const DispatchPlan plan = dispatch_client(clock, slot, 10, settings);
  CHECK(slot.busy);
  CHECK(plan.queue_wait_s == 100.0);
  CHECK(plan.train_s == training_duration(p, 10));
  CHECK(plan.upload_s == transfer_duration(p, 250.0));
  CHECK(plan.upload_s > 250.0 / p.bandwidth_asymptote_mb_s);

  const auto events = drain(clock);
  REQUIRE(events.size() == 4);
  CHECK(events[0].kind == EventKind::job_submitted);
  CHECK(events[1].kind == EventKind::job_started);
  CHECK(events[1].time - events[0].time == 100.0);
  CHECK(events[2].kind == EventKind::training_done);
  CHECK(events[3].kind == EventKind::upload_done);
  CHECK(events[3].time == doctest::Approx(100.0 + plan.train_s + plan.upload_s));

  CHECK_THROWS_AS(dispatch_client(clock, slot, 10, settings), ClientBusyError);
}

TEST_CASE("reservation starts the job at submission") {
  FacilityProfile p = simple_profile();
  p.reservation = true;
  ClientSlot slot;
  slot.profile = &p;
  SimClock clock(1);
  dispatch_client(clock, slot, 5, {});
  const auto events = drain(clock);
  CHECK(events[1].kind == EventKind::job_started);
  CHECK(events[1].time == events[0].time);
}

TEST_CASE("persistent allocation skips later queue waits") {
  const FacilityProfile p = simple_profile();
  ClientSlot slot;
  slot.profile = &p;
  SimClock clock(1);
  DispatchSettings settings;
  settings.persistent_allocation = true;
  CHECK(dispatch_client(clock, slot, 5, settings).queue_wait_s == 100.0);
  slot.busy = false;
  CHECK(dispatch_client(clock, slot, 5, settings).queue_wait_s == 0.0);
}

TEST_CASE("stop_check") {
  ScenarioConfig cfg;
  cfg.wallclock_budget_s = 17000.0;
  CHECK(stop_check(0, 17000.1, cfg));
  CHECK(stop_check(0, 17000.0, cfg));
  CHECK_FALSE(stop_check(1000, 16999.0, cfg));

  cfg.wallclock_budget_s.reset();
  cfg.rounds_budget = 40;
  CHECK_FALSE(stop_check(39, 1e9, cfg));
  CHECK(stop_check(40, 0.0, cfg));

  cfg.wallclock_budget_s = 17000.0;
  CHECK(stop_check(40, 10.0, cfg));
}

TEST_CASE("summarize") {
  MetricsLog empty;
  CHECK_THROWS_AS(summarize(empty), EmptyInputError);

  MetricsLog one;
  one.client_names = {"a", "b"};
  RoundRecord r;
  r.sim_time_s = 12.5;
  r.event = RecordKind::aggregation;
  r.global_version = 3;
  r.global_loss = 0.7;
  r.global_acc = 0.6;
  one.append(r);
  const Summary s = summarize(one);
  CHECK(s.final_global_loss == 0.7);
  CHECK(s.final_global_acc == 0.6);
  CHECK(s.final_version == 3);
  CHECK(s.last_aggregation_time_s == 12.5);
  CHECK(s.aggregations == 1);
  CHECK(s.total_local_rounds == 0);

  RoundRecord earlier = r;
  earlier.sim_time_s = 1.0;
  CHECK_THROWS_AS(one.append(earlier), std::logic_error);
}

TEST_CASE("relative improvement") {
  CHECK(relative_improvement(0.4345, 0.4550) == doctest::Approx(0.045).epsilon(0.01));
  CHECK(std::abs(relative_improvement(0.4345, 0.4550) - (1.0 - 0.4345 / 0.4550)) < 1e-15);

  std::vector<Summary> runs(3);
  runs[0].final_global_loss = 1.0;
  runs[1].final_global_loss = 2.0;
  runs[2].final_global_loss = 4.0;
  const auto m = improvement_matrix(runs);
  for (std::size_t i = 0; i < 3; ++i) CHECK(m[i][i] == 0.0);
  CHECK(m[0][1] == 0.5);
  CHECK(m[1][0] == -1.0);
  CHECK(m[0][2] == 0.75);
}

TEST_CASE("FedAvg splits a 40-round budget evenly") {
  const MetricsLog log = run_scenario(small_queued(AlgorithmKind::fedavg));
  const Summary s = summarize(log);
  CHECK(s.rounds_per_client == std::vector<std::uint64_t>{10, 10, 10, 10});
  CHECK(s.aggregations == 10);
}

TEST_CASE("FedAvg with 8 global rounds records 8 aggregations and 32 local rounds") {
  ScenarioConfig cfg = parse_scenario(default_scenario_text("coscheduled_64node.cfg"));
  cfg.task.n_features = 10;
  cfg.task.n_classes = 6;
  cfg.task.train_samples = 800;
  cfg.task.test_samples = 200;
  cfg.trainer.learning_rate = 0.01;
  const MetricsLog log = run_scenario(cfg);
  const auto aggregations = std::count_if(log.records.begin(), log.records.end(),
                                          [](const RoundRecord& r) { return r.event == RecordKind::aggregation; });
  CHECK(aggregations == 8);
  CHECK(log.records.size() == 40);
  for (const auto& r : log.records) CHECK(r.queue_wait_s == 0.0);
}

TEST_CASE("FedAvg aggregates only after every client of the round uploaded") {
  const MetricsLog log = run_scenario(small_queued(AlgorithmKind::fedavg));
  std::vector<int> uploads(4, 0);
  for (const auto& r : log.records) {
    if (r.event == RecordKind::local_round_done) {
      ++uploads[index_of(*r.client_id)];
    } else {
      CHECK(std::all_of(uploads.begin(), uploads.end(), [&](int u) { return u == uploads[0]; }));
      CHECK(uploads[0] == static_cast<int>(r.global_version));
    }
  }
}

TEST_CASE("every algorithm: ordering, version bookkeeping, conservation") {
  for (AlgorithmKind kind : kAllAlgorithms) {
    CAPTURE(to_string(kind));
    const MetricsLog log = run_scenario(small_queued(kind), RunOptions{3, false});
    std::uint64_t aggregations = 0;
    std::uint64_t version = 0;
    for (std::size_t i = 0; i < log.records.size(); ++i) {
      const auto& r = log.records[i];
      if (i > 0) CHECK(r.sim_time_s >= log.records[i - 1].sim_time_s);
      if (r.event == RecordKind::aggregation) {
        ++aggregations;
        CHECK(r.global_version == ++version);
      }
      CHECK(r.global_loss.has_value());
    }
    const Summary s = summarize(log);
    CHECK(s.final_version == aggregations);
    std::uint64_t sum = 0;
    for (auto c : s.rounds_per_client) sum += c;
    CHECK(sum == s.total_local_rounds);
    CHECK(s.total_local_rounds == 40);
  }
}

TEST_CASE("identical config and seed give identical metrics") {
  for (AlgorithmKind kind : kAllAlgorithms) {
    const auto a = metrics_csv(run_scenario(small_queued(kind), RunOptions{42, false}));
    const auto b = metrics_csv(run_scenario(small_queued(kind), RunOptions{42, false}));
    CHECK(a == b);
    const auto c = metrics_csv(run_scenario(small_queued(kind), RunOptions{43, false}));
    CHECK(a != c);
  }
}

TEST_CASE("doubling the wall-clock budget never reduces a client's rounds") {
  for (AlgorithmKind kind : kAllAlgorithms) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      ScenarioConfig cfg = small_queued(kind);
      cfg.rounds_budget.reset();
      cfg.wallclock_budget_s = 3000.0;
      const Summary short_run = summarize(run_scenario(cfg, RunOptions{seed, false}));
      cfg.wallclock_budget_s = 6000.0;
      const Summary long_run = summarize(run_scenario(cfg, RunOptions{seed, false}));
      for (std::size_t c = 0; c < 4; ++c) CHECK(long_run.rounds_per_client[c] >= short_run.rounds_per_client[c]);
    }
  }
}

TEST_CASE("final-only evaluation patches the last aggregation") {
  ScenarioConfig cfg = small_queued(AlgorithmKind::fedasync);
  const MetricsLog full = run_scenario(cfg, RunOptions{5, false});
  cfg.eval_every_aggregation = false;
  const MetricsLog lean = run_scenario(cfg, RunOptions{5, false});
  CHECK(summarize(full).final_global_loss == summarize(lean).final_global_loss);
  CHECK(summarize(full).rounds_per_client == summarize(lean).rounds_per_client);
}

TEST_CASE("dropout keeps the run consistent") {
  for (AlgorithmKind kind : kAllAlgorithms) {
    ScenarioConfig cfg = small_queued(kind);
    cfg.dropout_probability = 0.3;
    const MetricsLog log = run_scenario(cfg, RunOptions{9, false});
    const Summary s = summarize(log);
    CHECK(s.total_local_rounds <= 40);
    CHECK(s.total_local_rounds > 0);
  }
}

TEST_CASE("trace captures every event in order") {
  const MetricsLog log = run_scenario(small_queued(AlgorithmKind::fedcompass), RunOptions{2, true});
  REQUIRE_FALSE(log.trace.empty());
  for (std::size_t i = 1; i < log.trace.size(); ++i) {
    CHECK(log.trace[i].time_s >= log.trace[i - 1].time_s);
  }
  const auto uploads = std::count_if(log.trace.begin(), log.trace.end(),
                                     [](const TraceEntry& t) { return t.kind == EventKind::upload_done; });
  CHECK(uploads == 40);
}

TEST_CASE("run_many keeps input order and matches serial runs") {
  std::vector<RunRequest> requests;
  for (AlgorithmKind kind : kAllAlgorithms) requests.push_back({small_queued(kind), RunOptions{7, false}});
  const auto parallel = run_many(requests, 3);
  for (std::size_t i = 0; i < requests.size(); ++i) {
    CHECK(parallel[i].algorithm == requests[i].config.algorithm.kind);
    CHECK(metrics_csv(parallel[i]) == metrics_csv(run_scenario(requests[i].config, requests[i].options)));
  }
}
