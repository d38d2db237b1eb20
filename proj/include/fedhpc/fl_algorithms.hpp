#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedhpc/ids.hpp"
#include "fedhpc/param_vector.hpp"

namespace fedhpc {

enum class AlgorithmKind { fedavg, fedasync, fedbuff, fedcompass };

inline constexpr std::array<AlgorithmKind, 4> kAllAlgorithms = {
    AlgorithmKind::fedavg, AlgorithmKind::fedasync, AlgorithmKind::fedbuff, AlgorithmKind::fedcompass};

std::string_view to_string(AlgorithmKind kind) noexcept;
std::optional<AlgorithmKind> parse_algorithm(std::string_view name) noexcept;
// "fedavg, fedasync, fedbuff, fedcompass"
std::string algorithm_names();

struct AlgorithmConfig {
  AlgorithmKind kind = AlgorithmKind::fedavg;
  double alpha = 0.6;               // async mixing rate, (0, 1]
  double staleness_exponent = 0.5;  // polynomial staleness decay
  std::size_t buffer_size = 2;      // FedBuff
  std::int64_t q_min = 10;          // FedCompass step bounds
  std::int64_t q_max = 100;
  double group_window_s = 60.0;     // FedCompass grace period after a group's target arrival
  double server_lr = 1.0;           // FedBuff
  double speed_smoothing = 0.5;     // EMA weight of the newest speed observation
  bool weight_by_samples = true;    // weight group means by sample count

  void validate() const;
};

struct ClientUpdate {
  ClientId client_id{};
  ParamVector params;
  std::uint64_t base_version = 0;
  std::uint64_t sample_count = 1;
  std::int64_t local_steps = 1;
  double completion_time = 0.0;
};

struct GlobalModel {
  ParamVector params;
  std::uint64_t version = 0;
};

struct SpeedEstimate {
  ClientId client_id{};
  double seconds_per_step = 0.0;
  std::uint64_t observations = 0;

  bool known() const noexcept { return observations > 0; }
};

struct CompassGroup {
  GroupId group_id{};
  std::set<ClientId> member_ids;
  std::set<ClientId> arrived_ids;
  double target_arrival = 0.0;
  std::vector<ClientUpdate> buffered_updates;
  bool open = true;
};

struct CompassAssignment {
  std::int64_t local_steps = 0;
  GroupId group_id{};
  bool created_group = false;
  double target_arrival = 0.0;
};

/// Result of feeding the semi-asynchronous server: the new global model when
/// an aggregation fired, and the clients that may now download and continue.
struct AggregationOutcome {
  std::optional<GlobalModel> model;
  std::vector<ClientId> released;
  std::optional<GroupId> group;
};

struct ClientTiming {
  SpeedEstimate speed;
  double overhead_s = 0.0;  // EMA of non-compute latency per round (init + transfers)
};

/// Server-side aggregation state. Single owner; not thread-safe.
struct ServerState {
  ServerState(GlobalModel initial, std::size_t n_clients);

  GlobalModel global;
  std::uint64_t aggregations = 0;
  std::vector<ClientTiming> timing;

  // FedBuff: global params each client started from, and pending deltas.
  std::vector<std::optional<ParamVector>> dispatch_snapshot;
  std::vector<ParamVector> buffered_deltas;

  // FedCompass: groups keyed by id (= creation order), current group per
  // client, and late arrivals waiting for the next group to aggregate.
  std::map<GroupId, CompassGroup> groups;
  std::vector<std::optional<GroupId>> client_group;
  std::vector<ClientUpdate> late_updates;
  std::uint64_t next_group_id = 0;

  std::size_t n_clients() const noexcept { return timing.size(); }
  std::vector<GroupId> open_groups() const;
};

/// Sample-count-weighted mean of one synchronous round's updates.
ParamVector fedavg_aggregate(std::span<const ClientUpdate> updates, bool weight_by_samples = true);

/// (staleness + 1)^(-exponent)
double staleness_factor(std::uint64_t staleness, double exponent);

GlobalModel fedasync_apply(const GlobalModel& global, const ClientUpdate& update, const AlgorithmConfig& cfg);

/// Remembers the global params `client` starts from; FedBuff deltas are taken
/// against this snapshot.
void record_dispatch(ServerState& state, ClientId client);

std::optional<GlobalModel> fedbuff_ingest(ServerState& state, const ClientUpdate& update, const AlgorithmConfig& cfg);

SpeedEstimate update_speed(const SpeedEstimate& est, double observed_seconds_per_step, double smoothing);

/// Folds one round's measured compute speed and overhead into the server's estimates.
void observe_client(ServerState& state, ClientId client, double observed_seconds_per_step, double observed_overhead_s,
                    double smoothing);

CompassAssignment compass_assign(ServerState& state, ClientId client, double now, const AlgorithmConfig& cfg);

AggregationOutcome compass_ingest(ServerState& state, const ClientUpdate& update, double now,
                                  const AlgorithmConfig& cfg);

/// Aggregates every open group whose deadline (target + window) has been reached.
std::vector<AggregationOutcome> compass_poll(ServerState& state, double now, const AlgorithmConfig& cfg);

/// Removes a client whose job failed from its open group. May complete the group.
AggregationOutcome compass_withdraw(ServerState& state, ClientId client, const AlgorithmConfig& cfg);

std::vector<std::int64_t> select_steps_proportional(std::span<const std::uint64_t> sample_counts,
                                                    std::int64_t base_steps);

}  // namespace fedhpc
