#include "fedhpc/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "fedhpc/errors.hpp"
#include "fedhpc/numfmt.hpp"
#include "fedhpc/param_model.hpp"

namespace fedhpc {

std::string_view to_string(RecordKind kind) noexcept {
  return kind == RecordKind::aggregation ? "aggregation" : "local_round_done";
}

void MetricsLog::append(RoundRecord record) {
  if (!records.empty() && record.sim_time_s < records.back().sim_time_s) {
    throw std::logic_error("MetricsLog::append: records must be time ordered");
  }
  records.push_back(std::move(record));
}

DispatchPlan dispatch_client(SimClock& clock, ClientSlot& slot, std::int64_t steps, const DispatchSettings& settings) {
  if (slot.busy) throw ClientBusyError("dispatch_client: client " + to_string(slot.id) + " already has a job");
  if (slot.profile == nullptr) throw InvalidArgumentError("dispatch_client: slot has no facility profile");
  const FacilityProfile& profile = *slot.profile;

  DispatchPlan plan;
  plan.job = slot.jobs++;
  plan.steps = steps;
  plan.submitted_at = clock.now();
  plan.queue_wait_s = (settings.persistent_allocation && slot.holds_allocation) ? 0.0
                                                                                 : sample_queue_wait(profile, slot.queue_rng);
  slot.holds_allocation = true;
  plan.train_s = training_duration(profile, steps);
  plan.upload_s = transfer_duration(profile, model_size_mb(settings.model_param_count));
  plan.dropped = settings.dropout_probability > 0.0 && clock.rng().uniform01() < settings.dropout_probability;
  plan.started_at = plan.submitted_at + plan.queue_wait_s;
  plan.training_done_at = plan.started_at + plan.train_s;
  plan.upload_done_at = plan.training_done_at + plan.upload_s;

  auto event = [&](EventKind kind) {
    SimEvent e;
    e.kind = kind;
    e.client = slot.id;
    e.job = plan.job;
    return e;
  };
  clock.schedule(0.0, event(EventKind::job_submitted));
  clock.schedule(plan.queue_wait_s, event(EventKind::job_started));
  SimEvent done = event(EventKind::training_done);
  if (plan.dropped) done.detail = "failed";
  clock.schedule(plan.queue_wait_s + plan.train_s, std::move(done));
  if (!plan.dropped) clock.schedule(plan.queue_wait_s + plan.train_s + plan.upload_s, event(EventKind::upload_done));
  slot.busy = true;
  return plan;
}

bool stop_check(std::uint64_t completed_local_rounds, double now, const ScenarioConfig& config) {
  if (config.rounds_budget && completed_local_rounds >= *config.rounds_budget) return true;
  if (config.wallclock_budget_s && now >= *config.wallclock_budget_s) return true;
  return false;
}

namespace {

struct Job {
  DispatchPlan plan;
  ParamVector base_params;
  std::uint64_t base_version = 0;
};

struct ClientRuntime {
  ClientSlot slot;
  std::optional<Job> job;
  std::int64_t default_steps = 1;
};

class Simulation {
 public:
  Simulation(const ScenarioConfig& cfg, const RunOptions& options)
      : cfg_(cfg),
        algo_(cfg.algorithm),
        seed_(resolve_seed(cfg, options.seed)),
        trace_(options.trace),
        clock_(derive_seed(seed_, 4)),
        server_(GlobalModel{}, cfg.n_clients()) {
    cfg_.validate();
    const SyntheticTask task = generate_task(cfg.task.n_features, cfg.task.n_classes, cfg.task.noise_sigma,
                                             derive_seed(seed_, 1));
    train_ = partition_noniid(task, cfg.partition_weights, cfg.task.train_samples, cfg.task.skew, derive_seed(seed_, 2));
    test_ = partition_noniid(task, cfg.partition_weights, cfg.task.test_samples, cfg.task.skew, derive_seed(seed_, 3));
    server_.global = GlobalModel{ParamVector(task.shape().param_dim()), 0};

    std::vector<std::uint64_t> counts;
    for (const auto& d : train_) counts.push_back(d.sample_count());
    const auto steps = initial_steps(cfg, counts);

    clients_.resize(cfg.n_clients());
    for (std::size_t i = 0; i < clients_.size(); ++i) {
      ClientRuntime& c = clients_[i];
      c.slot.id = client_at(i);
      c.slot.profile = &cfg_.facilities[i];
      c.slot.queue_rng = Rng(derive_seed(seed_, 100, i));
      c.default_steps = steps[i];
    }
    rounds_.assign(cfg.n_clients(), 0);
    settings_ = {cfg.model_param_count, cfg.persistent_allocation, cfg.dropout_probability};
    model_mb_ = model_size_mb(cfg.model_param_count);

    log_.scenario = cfg.name;
    log_.algorithm = algo_.kind;
    log_.seed = seed_;
    for (const auto& f : cfg.facilities) log_.client_names.push_back(f.name);
  }

  MetricsLog run() {
    for (std::size_t i = 0; i < clients_.size(); ++i) dispatch(client_at(i));
    fedavg_pending_ = clients_.size();

    while (!clock_.empty() && !stopped_) {
      if (cfg_.wallclock_budget_s && clock_.peek().time >= *cfg_.wallclock_budget_s) {
        log_.end_time_s = *cfg_.wallclock_budget_s;
        stopped_ = true;
        break;
      }
      SimEvent event = clock_.next_event();
      log_.end_time_s = event.time;
      if (trace_) {
        log_.trace.push_back({event.time, event.sequence, event.kind, event.client, event.detail});
      }
      handle(event);
      if (stop_check(completed_, clock_.now(), cfg_)) stopped_ = true;
    }

    if (!cfg_.eval_every_aggregation) patch_final_loss();
    return std::move(log_);
  }

 private:
  void handle(const SimEvent& event) {
    switch (event.kind) {
      case EventKind::job_submitted:
      case EventKind::job_started:
        break;
      case EventKind::training_done:
        if (event.detail == "failed") on_job_failed(*event.client);
        break;
      case EventKind::upload_done:
        on_upload(*event.client);
        break;
      case EventKind::download_done:
        on_download(*event.client);
        break;
      case EventKind::aggregation:
        for (auto& outcome : compass_poll(server_, clock_.now(), algo_)) apply_outcome(outcome);
        break;
    }
  }

  void dispatch(ClientId id) {
    ClientRuntime& c = clients_[index_of(id)];
    std::int64_t steps = c.default_steps;
    if (algo_.kind == AlgorithmKind::fedcompass) {
      const CompassAssignment a = compass_assign(server_, id, clock_.now(), algo_);
      steps = a.local_steps;
      if (a.created_group && std::isfinite(a.target_arrival)) {
        SimEvent deadline;
        deadline.kind = EventKind::aggregation;
        deadline.group = a.group_id;
        deadline.detail = "group " + to_string(a.group_id) + " deadline";
        clock_.schedule(std::max(0.0, a.target_arrival + algo_.group_window_s - clock_.now()), std::move(deadline));
      }
    } else if (algo_.kind == AlgorithmKind::fedbuff) {
      record_dispatch(server_, id);
    }
    Job job;
    job.base_params = server_.global.params;
    job.base_version = server_.global.version;
    job.plan = dispatch_client(clock_, c.slot, steps, settings_);
    c.job = std::move(job);
  }

  void on_upload(ClientId id) {
    const std::size_t i = index_of(id);
    ClientRuntime& c = clients_[i];
    const Job& job = *c.job;

    ClientUpdate update;
    update.client_id = id;
    update.params = local_train(job.base_params, train_[i], static_cast<std::size_t>(job.plan.steps), cfg_.trainer,
                                derive_seed(seed_, 1000 + i, job.plan.job));
    update.base_version = job.base_version;
    update.sample_count = train_[i].sample_count();
    update.local_steps = job.plan.steps;
    update.completion_time = clock_.now();

    ++rounds_[i];
    ++completed_;

    RoundRecord rec;
    rec.sim_time_s = clock_.now();
    rec.event = RecordKind::local_round_done;
    rec.client_id = id;
    rec.global_version = server_.global.version;
    if (cfg_.eval_every_aggregation) {
      const Evaluation g = global_eval();
      rec.global_loss = g.loss;
      rec.global_acc = g.accuracy;
      rec.local_loss = evaluate(update.params, test_).loss;
    }
    rec.local_steps = job.plan.steps;
    rec.queue_wait_s = job.plan.queue_wait_s;
    rec.train_s = job.plan.train_s;
    rec.transfer_s = job.plan.upload_s;
    log_.append(std::move(rec));

    switch (algo_.kind) {
      case AlgorithmKind::fedavg:
        fedavg_round_.push_back(std::move(update));
        fedavg_waiting_.push_back(id);
        if (--fedavg_pending_ == 0) close_fedavg_round();
        break;
      case AlgorithmKind::fedasync:
        server_.global = fedasync_apply(server_.global, update, algo_);
        ++server_.aggregations;
        record_aggregation();
        release(id);
        break;
      case AlgorithmKind::fedbuff:
        if (fedbuff_ingest(server_, update, algo_)) record_aggregation();
        release(id);
        break;
      case AlgorithmKind::fedcompass: {
        const FacilityProfile& f = cfg_.facilities[i];
        const double compute_s = job.plan.train_s - f.init_overhead_s;
        const double overhead_s = job.plan.queue_wait_s + f.init_overhead_s + job.plan.upload_s;
        observe_client(server_, id, compute_s / static_cast<double>(job.plan.steps), overhead_s, algo_.speed_smoothing);
        apply_outcome(compass_ingest(server_, update, clock_.now(), algo_));
        break;
      }
    }
  }

  void on_job_failed(ClientId id) {
    switch (algo_.kind) {
      case AlgorithmKind::fedavg:
        fedavg_waiting_.push_back(id);
        if (--fedavg_pending_ == 0) close_fedavg_round();
        break;
      case AlgorithmKind::fedcompass:
        apply_outcome(compass_withdraw(server_, id, algo_));
        redispatch(id);
        break;
      case AlgorithmKind::fedasync:
      case AlgorithmKind::fedbuff:
        if (algo_.kind == AlgorithmKind::fedbuff) server_.dispatch_snapshot[index_of(id)].reset();
        redispatch(id);
        break;
    }
  }

  void redispatch(ClientId id) {
    ClientRuntime& c = clients_[index_of(id)];
    c.slot.busy = false;
    c.job.reset();
    if (!stopped_) dispatch(id);
  }

  void close_fedavg_round() {
    if (!fedavg_round_.empty()) {
      server_.global = GlobalModel{fedavg_aggregate(fedavg_round_, algo_.weight_by_samples), server_.global.version + 1};
      require_finite(server_.global.params, "fedavg");
      ++server_.aggregations;
      record_aggregation();
    }
    fedavg_round_.clear();
    std::vector<ClientId> waiting = std::move(fedavg_waiting_);
    fedavg_waiting_.clear();
    fedavg_pending_ = waiting.size();
    for (ClientId id : waiting) release(id);
  }

  void apply_outcome(const AggregationOutcome& outcome) {
    if (outcome.model) record_aggregation();
    for (ClientId id : outcome.released) release(id);
  }

  // The client downloads the current global model, then starts its next round.
  void release(ClientId id) {
    SimEvent e;
    e.kind = EventKind::download_done;
    e.client = id;
    e.job = clients_[index_of(id)].job ? clients_[index_of(id)].job->plan.job : 0;
    clock_.schedule(transfer_duration(cfg_.facilities[index_of(id)], model_mb_), std::move(e));
  }

  void on_download(ClientId id) { redispatch(id); }

  void record_aggregation() {
    RoundRecord rec;
    rec.sim_time_s = clock_.now();
    rec.event = RecordKind::aggregation;
    rec.global_version = server_.global.version;
    if (cfg_.eval_every_aggregation) {
      const Evaluation g = global_eval();
      rec.global_loss = g.loss;
      rec.global_acc = g.accuracy;
    }
    log_.append(std::move(rec));
  }

  Evaluation global_eval() {
    if (!cached_eval_ || cached_version_ != server_.global.version) {
      cached_eval_ = evaluate(server_.global.params, test_);
      cached_version_ = server_.global.version;
    }
    return *cached_eval_;
  }

  void patch_final_loss() {
    for (auto it = log_.records.rbegin(); it != log_.records.rend(); ++it) {
      if (it->event == RecordKind::aggregation) {
        const Evaluation g = global_eval();
        it->global_loss = g.loss;
        it->global_acc = g.accuracy;
        return;
      }
    }
  }

  ScenarioConfig cfg_;
  AlgorithmConfig algo_;
  std::uint64_t seed_;
  bool trace_;
  SimClock clock_;
  ServerState server_;
  std::vector<ClientDataset> train_;
  std::vector<ClientDataset> test_;
  std::vector<ClientRuntime> clients_;
  std::vector<std::uint64_t> rounds_;
  DispatchSettings settings_;
  double model_mb_ = 0.0;
  std::uint64_t completed_ = 0;
  bool stopped_ = false;

  std::vector<ClientUpdate> fedavg_round_;
  std::vector<ClientId> fedavg_waiting_;
  std::size_t fedavg_pending_ = 0;

  std::optional<Evaluation> cached_eval_;
  std::uint64_t cached_version_ = 0;

  MetricsLog log_;
};

}  // namespace

MetricsLog run_scenario(const ScenarioConfig& config, const RunOptions& options) {
  return Simulation(config, options).run();
}

std::vector<MetricsLog> run_many(std::span<const RunRequest> requests, unsigned jobs) {
  std::vector<MetricsLog> results(requests.size());
  std::vector<std::exception_ptr> errors(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < requests.size(); k = next++) {
      try {
        results[k] = run_scenario(requests[k].config, requests[k].options);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(requests.size())));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

Summary summarize(const MetricsLog& log) {
  if (log.records.empty()) throw EmptyInputError("summarize: empty metrics log");
  Summary s;
  s.scenario = log.scenario;
  s.algorithm = log.algorithm;
  s.seed = log.seed;
  s.client_names = log.client_names;
  s.rounds_per_client.assign(log.client_names.size(), 0);
  for (const auto& r : log.records) {
    if (r.event == RecordKind::local_round_done && r.client_id) {
      const std::size_t i = index_of(*r.client_id);
      if (i >= s.rounds_per_client.size()) s.rounds_per_client.resize(i + 1, 0);
      ++s.rounds_per_client[i];
      ++s.total_local_rounds;
    } else if (r.event == RecordKind::aggregation) {
      ++s.aggregations;
      s.last_aggregation_time_s = r.sim_time_s;
    }
    if (r.global_loss) {
      s.final_global_loss = r.global_loss;
      s.final_global_acc = r.global_acc;
    }
  }
  s.final_version = log.records.back().global_version;
  s.total_sim_time_s = std::max(log.end_time_s, log.records.back().sim_time_s);
  return s;
}

double relative_improvement(double loss, double baseline_loss) { return 1.0 - loss / baseline_loss; }

std::vector<std::vector<double>> improvement_matrix(std::span<const Summary> summaries) {
  const std::size_t n = summaries.size();
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto& a = summaries[i].final_global_loss;
      const auto& b = summaries[j].final_global_loss;
      m[i][j] = (a && b) ? relative_improvement(*a, *b) : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return m;
}

}  // namespace fedhpc
