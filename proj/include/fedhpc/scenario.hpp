#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedhpc/fl_algorithms.hpp"
#include "fedhpc/hpc_sim.hpp"
#include "fedhpc/param_model.hpp"

namespace fedhpc {

enum class StepPolicy {
  proportional,  // base_steps scaled by sample count relative to the largest client
  time_target,   // steps that fill target_round_s at each facility's throughput
  fixed,         // base_steps everywhere
};

std::string_view to_string(StepPolicy policy) noexcept;

struct TaskSpec {
  std::size_t n_features = 249;
  std::size_t n_classes = 20;
  double noise_sigma = 6.0;
  std::size_t train_samples = 16712;
  std::size_t test_samples = 2000;  // held-out union used for every evaluation
  double skew = 0.9;
};

/// Named throughput-vs-nodes curve from the scaling study, referenced by facilities.
struct ThroughputCurve {
  std::string name;
  int micro_batch = 1;
  std::vector<ThroughputPoint> points;
};

struct ScenarioConfig {
  std::string name;
  AlgorithmConfig algorithm;
  std::vector<FacilityProfile> facilities;
  std::vector<std::string> facility_curves;  // throughput curve name per facility
  std::vector<double> partition_weights;     // per facility; Table-1-style sample counts
  std::vector<ThroughputCurve> throughput_curves;
  TaskSpec task;
  TrainerConfig trainer;

  std::optional<std::uint64_t> rounds_budget;  // total local training rounds
  std::optional<double> wallclock_budget_s;
  std::int64_t base_steps = 100;
  StepPolicy step_policy = StepPolicy::proportional;
  double target_round_s = 2400.0;
  std::uint64_t model_param_count = 0;  // simulated model size for transfer costs
  bool eval_every_aggregation = true;
  bool persistent_allocation = false;
  double dropout_probability = 0.0;
  std::optional<std::uint64_t> seed;

  std::size_t n_clients() const noexcept { return facilities.size(); }
  const ThroughputCurve* find_curve(std::string_view curve_name) const;

  /// Throws ConfigError whose path names the offending field.
  void validate() const;
};

/// Parses the brace-and-colon scenario format (JSON with // comments) and
/// validates it. Unknown keys are rejected.
ScenarioConfig parse_scenario(std::string_view text);
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Local steps each client runs when the algorithm does not assign them.
std::vector<std::int64_t> initial_steps(const ScenarioConfig& cfg, std::span<const std::uint64_t> sample_counts);

/// Rough per-round latency of the slowest facility (median queue + training
/// + both transfers); used for the default FedCompass grouping window.
double expected_round_s(const ScenarioConfig& cfg);

/// The seed a run uses: explicit override, then the config, then
/// FEDHPC_SIM_SEED, then 1.
std::uint64_t resolve_seed(const ScenarioConfig& cfg, std::optional<std::uint64_t> override_seed);

}  // namespace fedhpc
