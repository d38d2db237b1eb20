#include "fedhpc/fl_algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fedhpc/errors.hpp"

namespace fedhpc {

std::string_view to_string(AlgorithmKind kind) noexcept {
  switch (kind) {
    case AlgorithmKind::fedavg: return "fedavg";
    case AlgorithmKind::fedasync: return "fedasync";
    case AlgorithmKind::fedbuff: return "fedbuff";
    case AlgorithmKind::fedcompass: return "fedcompass";
  }
  return "unknown";
}

std::optional<AlgorithmKind> parse_algorithm(std::string_view name) noexcept {
  for (AlgorithmKind kind : kAllAlgorithms) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

std::string algorithm_names() {
  std::string out;
  for (AlgorithmKind kind : kAllAlgorithms) {
    if (!out.empty()) out += ", ";
    out += to_string(kind);
  }
  return out;
}

void AlgorithmConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgumentError("algorithm.alpha must be in (0, 1]");
  if (!(staleness_exponent >= 0.0) || !std::isfinite(staleness_exponent))
    throw InvalidArgumentError("algorithm.staleness_exponent must be nonnegative");
  if (buffer_size < 1) throw InvalidArgumentError("algorithm.buffer_size must be >= 1");
  if (q_min < 1) throw InvalidArgumentError("algorithm.q_min must be >= 1");
  if (q_max < q_min) throw InvalidArgumentError("algorithm.q_max must be >= q_min");
  if (!(group_window_s > 0.0) || !std::isfinite(group_window_s))
    throw InvalidArgumentError("algorithm.group_window_s must be positive");
  if (!(server_lr > 0.0) || !std::isfinite(server_lr)) throw InvalidArgumentError("algorithm.server_lr must be positive");
  if (!(speed_smoothing > 0.0 && speed_smoothing <= 1.0))
    throw InvalidArgumentError("algorithm.speed_smoothing must be in (0, 1]");
}

ServerState::ServerState(GlobalModel initial, std::size_t n_clients)
    : global(std::move(initial)), timing(n_clients), dispatch_snapshot(n_clients), client_group(n_clients) {
  for (std::size_t i = 0; i < n_clients; ++i) timing[i].speed.client_id = client_at(i);
}

std::vector<GroupId> ServerState::open_groups() const {
  std::vector<GroupId> out;
  for (const auto& [id, group] : groups) {
    if (group.open) out.push_back(id);
  }
  return out;
}

namespace {

std::size_t checked_index(const ServerState& state, ClientId client) {
  const std::size_t i = index_of(client);
  if (i >= state.n_clients()) throw InvalidArgumentError("unknown client " + to_string(client));
  return i;
}

std::uint64_t staleness_of(const GlobalModel& global, std::uint64_t base_version) {
  if (base_version > global.version) {
    throw VersionError("update base version " + std::to_string(base_version) + " is newer than global version " +
                       std::to_string(global.version));
  }
  return global.version - base_version;
}

ParamVector weighted_mean(std::span<const ClientUpdate> updates, bool weight_by_samples) {
  double total = 0.0;
  for (const auto& u : updates) total += weight_by_samples ? static_cast<double>(u.sample_count) : 1.0;
  if (!(total > 0.0)) throw InvalidArgumentError("aggregate: total weight must be positive");
  ParamVector out(updates.front().params.dim());
  for (const auto& u : updates) {
    require_same_dim(out, u.params, "aggregate");
    const double w = (weight_by_samples ? static_cast<double>(u.sample_count) : 1.0) / total;
    out.axpy(w, u.params);
  }
  return out;
}

// Weighted group mean mixed into the global model with the staleness of the
// oldest contributor.
GlobalModel apply_group(ServerState& state, std::span<const ClientUpdate> updates, const AlgorithmConfig& cfg) {
  std::uint64_t oldest = updates.front().base_version;
  for (const auto& u : updates) oldest = std::min(oldest, u.base_version);
  const double weight = cfg.alpha * staleness_factor(staleness_of(state.global, oldest), cfg.staleness_exponent);
  const ParamVector mean = weighted_mean(updates, cfg.weight_by_samples);
  require_same_dim(state.global.params, mean, "compass aggregate");
  state.global.params = mix(state.global.params, mean, weight);
  require_finite(state.global.params, "compass aggregate");
  ++state.global.version;
  ++state.aggregations;
  return state.global;
}

AggregationOutcome close_group(ServerState& state, CompassGroup& group, const AlgorithmConfig& cfg) {
  AggregationOutcome outcome;
  outcome.group = group.group_id;
  std::vector<ClientUpdate> updates = std::move(group.buffered_updates);
  group.buffered_updates.clear();
  group.open = false;
  if (!updates.empty() || !state.late_updates.empty()) {
    for (auto& late : state.late_updates) updates.push_back(std::move(late));
    state.late_updates.clear();
    outcome.model = apply_group(state, updates, cfg);
  }
  for (ClientId c : group.arrived_ids) {
    state.client_group[index_of(c)].reset();
    outcome.released.push_back(c);
  }
  return outcome;
}

bool group_complete(const CompassGroup& group) {
  return !group.member_ids.empty() && group.arrived_ids.size() == group.member_ids.size();
}

}  // namespace

ParamVector fedavg_aggregate(std::span<const ClientUpdate> updates, bool weight_by_samples) {
  if (updates.empty()) throw EmptyInputError("fedavg_aggregate: no updates");
  for (const auto& u : updates) {
    if (u.base_version != updates.front().base_version)
      throw VersionError("fedavg_aggregate: updates span several base versions");
    require_same_dim(updates.front().params, u.params, "fedavg_aggregate");
  }
  return weighted_mean(updates, weight_by_samples);
}

double staleness_factor(std::uint64_t staleness, double exponent) {
  if (staleness == 0 || exponent == 0.0) return 1.0;
  return std::pow(static_cast<double>(staleness) + 1.0, -exponent);
}

GlobalModel fedasync_apply(const GlobalModel& global, const ClientUpdate& update, const AlgorithmConfig& cfg) {
  require_same_dim(global.params, update.params, "fedasync_apply");
  const double weight = cfg.alpha * staleness_factor(staleness_of(global, update.base_version), cfg.staleness_exponent);
  GlobalModel out{mix(global.params, update.params, weight), global.version + 1};
  require_finite(out.params, "fedasync_apply");
  return out;
}

void record_dispatch(ServerState& state, ClientId client) {
  state.dispatch_snapshot[checked_index(state, client)] = state.global.params;
}

std::optional<GlobalModel> fedbuff_ingest(ServerState& state, const ClientUpdate& update, const AlgorithmConfig& cfg) {
  const std::size_t i = checked_index(state, update.client_id);
  require_same_dim(state.global.params, update.params, "fedbuff_ingest");
  if (!state.dispatch_snapshot[i]) {
    throw InvalidArgumentError("fedbuff_ingest: no dispatch snapshot for client " + to_string(update.client_id));
  }
  const double weight = cfg.alpha * staleness_factor(staleness_of(state.global, update.base_version), cfg.staleness_exponent);
  ParamVector delta = update.params - *state.dispatch_snapshot[i];
  delta *= weight;
  state.dispatch_snapshot[i].reset();
  state.buffered_deltas.push_back(std::move(delta));
  if (state.buffered_deltas.size() < cfg.buffer_size) return std::nullopt;

  ParamVector mean(state.global.params.dim());
  const double inv = 1.0 / static_cast<double>(state.buffered_deltas.size());
  for (const auto& d : state.buffered_deltas) mean.axpy(inv, d);
  state.buffered_deltas.clear();
  state.global.params.axpy(cfg.server_lr, mean);
  require_finite(state.global.params, "fedbuff_ingest");
  ++state.global.version;
  ++state.aggregations;
  return state.global;
}

SpeedEstimate update_speed(const SpeedEstimate& est, double observed_seconds_per_step, double smoothing) {
  if (!(observed_seconds_per_step > 0.0) || !std::isfinite(observed_seconds_per_step))
    throw InvalidArgumentError("update_speed: observation must be positive");
  if (!(smoothing > 0.0 && smoothing <= 1.0)) throw InvalidArgumentError("update_speed: smoothing must be in (0, 1]");
  SpeedEstimate out = est;
  out.seconds_per_step = est.known() ? (1.0 - smoothing) * est.seconds_per_step + smoothing * observed_seconds_per_step
                                     : observed_seconds_per_step;
  ++out.observations;
  return out;
}

void observe_client(ServerState& state, ClientId client, double observed_seconds_per_step, double observed_overhead_s,
                    double smoothing) {
  ClientTiming& t = state.timing[checked_index(state, client)];
  const bool first = !t.speed.known();
  t.speed = update_speed(t.speed, observed_seconds_per_step, smoothing);
  t.overhead_s = first ? observed_overhead_s : (1.0 - smoothing) * t.overhead_s + smoothing * observed_overhead_s;
}

CompassAssignment compass_assign(ServerState& state, ClientId client, double now, const AlgorithmConfig& cfg) {
  const std::size_t i = checked_index(state, client);
  if (const auto current = state.client_group[i]) {
    const auto it = state.groups.find(*current);
    if (it != state.groups.end() && it->second.open && it->second.member_ids.count(client) != 0) {
      throw std::logic_error("compass_assign: client " + to_string(client) + " is already in open group " +
                             to_string(*current));
    }
  }

  const ClientTiming& timing = state.timing[i];
  CompassAssignment result;
  if (timing.speed.known()) {
    const double sps = timing.speed.seconds_per_step;
    for (auto& [id, group] : state.groups) {
      if (!group.open || !std::isfinite(group.target_arrival)) continue;
      const double fit = (group.target_arrival - now - timing.overhead_s) / sps;
      if (!(fit >= static_cast<double>(cfg.q_min) - 0.5 && fit < static_cast<double>(cfg.q_max) + 0.5)) continue;
      const std::int64_t steps = std::llround(fit);
      if (steps < cfg.q_min || steps > cfg.q_max) continue;
      group.member_ids.insert(client);
      state.client_group[i] = id;
      result.local_steps = steps;
      result.group_id = id;
      result.target_arrival = group.target_arrival;
      return result;
    }
  }

  CompassGroup group;
  group.group_id = GroupId{state.next_group_id++};
  group.member_ids.insert(client);
  // Without a speed estimate the arrival time is unknown; such a group closes
  // only when its member reports.
  group.target_arrival = timing.speed.known()
                             ? now + timing.overhead_s + static_cast<double>(cfg.q_max) * timing.speed.seconds_per_step
                             : std::numeric_limits<double>::infinity();
  result.local_steps = cfg.q_max;
  result.group_id = group.group_id;
  result.created_group = true;
  result.target_arrival = group.target_arrival;
  state.client_group[i] = group.group_id;
  state.groups.emplace(group.group_id, std::move(group));
  return result;
}

AggregationOutcome compass_ingest(ServerState& state, const ClientUpdate& update, double now,
                                  const AlgorithmConfig& cfg) {
  const std::size_t i = checked_index(state, update.client_id);
  const auto assigned = state.client_group[i];
  if (!assigned) throw UnknownGroupError("compass_ingest: client " + to_string(update.client_id) + " has no group");
  const auto it = state.groups.find(*assigned);
  if (it == state.groups.end()) throw UnknownGroupError("compass_ingest: unknown group " + to_string(*assigned));
  require_same_dim(state.global.params, update.params, "compass_ingest");
  staleness_of(state.global, update.base_version);

  CompassGroup& group = it->second;
  if (group.open && group.member_ids.count(update.client_id) != 0 && group.arrived_ids.count(update.client_id) == 0) {
    group.buffered_updates.push_back(update);
    group.arrived_ids.insert(update.client_id);
    if (group_complete(group) || now > group.target_arrival + cfg.group_window_s) return close_group(state, group, cfg);
    return {};
  }

  // Late: the group already aggregated without this client.
  state.client_group[i].reset();
  AggregationOutcome outcome;
  outcome.released.push_back(update.client_id);
  if (!state.open_groups().empty()) {
    state.late_updates.push_back(update);
    return outcome;
  }
  std::vector<ClientUpdate> updates = std::move(state.late_updates);
  state.late_updates.clear();
  updates.push_back(update);
  outcome.model = apply_group(state, updates, cfg);
  return outcome;
}

std::vector<AggregationOutcome> compass_poll(ServerState& state, double now, const AlgorithmConfig& cfg) {
  std::vector<AggregationOutcome> out;
  for (auto& [id, group] : state.groups) {
    if (group.open && now >= group.target_arrival + cfg.group_window_s) out.push_back(close_group(state, group, cfg));
  }
  return out;
}

AggregationOutcome compass_withdraw(ServerState& state, ClientId client, const AlgorithmConfig& cfg) {
  const std::size_t i = checked_index(state, client);
  const auto assigned = state.client_group[i];
  state.client_group[i].reset();
  if (!assigned) return {};
  const auto it = state.groups.find(*assigned);
  if (it == state.groups.end() || !it->second.open) return {};
  CompassGroup& group = it->second;
  group.member_ids.erase(client);
  if (group.member_ids.empty() || group_complete(group)) return close_group(state, group, cfg);
  return {};
}

std::vector<std::int64_t> select_steps_proportional(std::span<const std::uint64_t> sample_counts,
                                                    std::int64_t base_steps) {
  if (base_steps < 1) throw InvalidArgumentError("select_steps_proportional: base_steps must be >= 1");
  std::uint64_t largest = 0;
  for (auto n : sample_counts) {
    if (n == 0) throw InvalidArgumentError("select_steps_proportional: sample counts must be positive");
    largest = std::max(largest, n);
  }
  std::vector<std::int64_t> steps;
  steps.reserve(sample_counts.size());
  for (auto n : sample_counts) {
    const double exact = static_cast<double>(base_steps) * static_cast<double>(n) / static_cast<double>(largest);
    steps.push_back(std::max<std::int64_t>(1, std::llround(exact)));
  }
  return steps;
}

}  // namespace fedhpc
