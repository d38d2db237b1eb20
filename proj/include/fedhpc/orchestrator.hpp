#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedhpc/fl_algorithms.hpp"
#include "fedhpc/hpc_sim.hpp"
#include "fedhpc/scenario.hpp"

namespace fedhpc {

enum class RecordKind { local_round_done, aggregation };

std::string_view to_string(RecordKind kind) noexcept;

struct RoundRecord {
  double sim_time_s = 0.0;
  RecordKind event = RecordKind::local_round_done;
  std::optional<ClientId> client_id;
  std::uint64_t global_version = 0;
  std::optional<double> global_loss;
  std::optional<double> global_acc;
  std::optional<double> local_loss;
  std::int64_t local_steps = 0;
  double queue_wait_s = 0.0;
  double train_s = 0.0;
  double transfer_s = 0.0;
};

struct TraceEntry {
  double time_s = 0.0;
  std::uint64_t sequence = 0;
  EventKind kind = EventKind::job_submitted;
  std::optional<ClientId> client;
  std::string detail;
};

/// Append-only run record.
struct MetricsLog {
  std::string scenario;
  AlgorithmKind algorithm = AlgorithmKind::fedavg;
  std::uint64_t seed = 0;
  std::vector<std::string> client_names;
  std::vector<RoundRecord> records;
  std::vector<TraceEntry> trace;
  double end_time_s = 0.0;

  /// Enforces (time) ordering.
  void append(RoundRecord record);
};

struct Summary {
  std::string scenario;
  AlgorithmKind algorithm = AlgorithmKind::fedavg;
  std::uint64_t seed = 0;
  std::vector<std::string> client_names;
  std::vector<std::uint64_t> rounds_per_client;
  std::uint64_t total_local_rounds = 0;
  std::uint64_t aggregations = 0;
  std::uint64_t final_version = 0;
  std::optional<double> final_global_loss;
  std::optional<double> final_global_acc;
  std::optional<double> last_aggregation_time_s;
  double total_sim_time_s = 0.0;
};

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides the scenario's seed resolution
  bool trace = false;
};

/// Runs one scenario to its stopping criterion. Deterministic per (config, seed).
MetricsLog run_scenario(const ScenarioConfig& config, const RunOptions& options = {});

/// Runs independent scenarios on up to `jobs` threads; results keep input order.
struct RunRequest {
  ScenarioConfig config;
  RunOptions options;
};
std::vector<MetricsLog> run_many(std::span<const RunRequest> requests, unsigned jobs);

// --- dispatch ---------------------------------------------------------------

/// Scheduler-facing state of one client.
struct ClientSlot {
  ClientId id{};
  const FacilityProfile* profile = nullptr;
  Rng queue_rng{0};
  bool busy = false;
  bool holds_allocation = false;
  std::uint64_t jobs = 0;
};

struct DispatchSettings {
  std::uint64_t model_param_count = 0;
  bool persistent_allocation = false;
  double dropout_probability = 0.0;
};

/// Latencies of one local training job, all relative to its submission.
struct DispatchPlan {
  std::uint64_t job = 0;
  std::int64_t steps = 0;
  double submitted_at = 0.0;
  double started_at = 0.0;
  double training_done_at = 0.0;
  double upload_done_at = 0.0;
  double queue_wait_s = 0.0;
  double train_s = 0.0;
  double upload_s = 0.0;
  bool dropped = false;  // node failure: no upload follows training_done
};

/// Submits one local round: schedules job_submitted, job_started (after the
/// queue wait), training_done and upload_done. Marks the slot busy.
DispatchPlan dispatch_client(SimClock& clock, ClientSlot& slot, std::int64_t steps, const DispatchSettings& settings);

/// True once the local-round budget is spent or simulated time reached the
/// wall-clock budget, whichever is configured.
bool stop_check(std::uint64_t completed_local_rounds, double now, const ScenarioConfig& config);

/// Throws EmptyInputError on an empty log.
Summary summarize(const MetricsLog& log);

/// 1 - loss / baseline_loss: relative loss reduction of a run over a baseline.
double relative_improvement(double loss, double baseline_loss);

/// [i][j] = improvement of run i over run j; zero diagonal. Runs without a
/// final loss yield NaN entries.
std::vector<std::vector<double>> improvement_matrix(std::span<const Summary> summaries);

}  // namespace fedhpc
