#pragma once

#include <cstdint>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedhpc/ids.hpp"
#include "fedhpc/random.hpp"

namespace fedhpc {

struct ThroughputPoint {
  double nodes = 1.0;
  double samples_per_second = 1.0;
};

struct QueueScalePoint {
  double nodes = 1.0;
  double median_multiplier = 1.0;
};

/// Lognormal batch-queue wait. The median grows with the node count through
/// `node_scaling` (log-log interpolation, flat outside the table).
struct QueueModel {
  double median_s = 60.0;
  double sigma = 0.5;
  std::vector<QueueScalePoint> node_scaling;

  double multiplier(double nodes) const;
  double median_at(double nodes) const { return median_s * multiplier(nodes); }
  void validate() const;
};

struct FacilityProfile {
  std::string name;
  int nodes = 1;
  int gpus_per_node = 1;
  int micro_batch = 1;
  std::vector<ThroughputPoint> throughput_points;
  double init_overhead_s = 0.0;
  QueueModel queue;
  double rtt_ms = 0.0;
  double bandwidth_asymptote_mb_s = 100.0;
  double bandwidth_halfsize_mb = 100.0;
  bool reservation = false;

  std::int64_t total_gpus() const noexcept { return std::int64_t{nodes} * gpus_per_node; }
  std::int64_t effective_batch() const noexcept { return total_gpus() * micro_batch; }
  void validate() const;
};

/// Samples per second at `nodes`: log-log interpolation between calibration
/// points, linear scaling below the first point, flat beyond the last.
double throughput(std::span<const ThroughputPoint> points, double nodes);
double throughput(const FacilityProfile& profile, double nodes);

/// init_overhead + steps * effective_batch / throughput(profile.nodes)
double training_duration(const FacilityProfile& profile, std::int64_t local_steps);

double sample_queue_wait(const QueueModel& queue, double nodes, Rng& rng);
/// Zero under a reservation, otherwise a draw at the profile's node count.
double sample_queue_wait(const FacilityProfile& profile, Rng& rng);

/// BF16 storage in decimal megabytes.
double model_size_mb(std::uint64_t param_count) noexcept;

double effective_bandwidth_mb_s(const FacilityProfile& profile, double size_mb);
double transfer_duration(const FacilityProfile& profile, double size_mb);

enum class EventKind { job_submitted, job_started, training_done, upload_done, download_done, aggregation };

std::string_view to_string(EventKind kind) noexcept;

struct SimEvent {
  double time = 0.0;
  std::uint64_t sequence = 0;
  EventKind kind = EventKind::job_submitted;
  std::optional<ClientId> client;
  std::optional<GroupId> group;
  std::uint64_t job = 0;
  std::string detail;
};

/// Simulated clock plus a pending-event queue ordered by (time, sequence).
/// Single owner; one per simulation run.
class SimClock {
 public:
  explicit SimClock(std::uint64_t seed = 0) : rng_(seed) {}

  double now() const noexcept { return now_; }
  bool empty() const noexcept { return queue_.empty(); }
  std::size_t pending() const noexcept { return queue_.size(); }
  const SimEvent& peek() const;

  /// Enqueues `event` at now + delay_s and returns its sequence number.
  std::uint64_t schedule(double delay_s, SimEvent event);
  /// Pops the earliest event and advances the clock to its time.
  SimEvent next_event();

  Rng& rng() noexcept { return rng_; }

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const noexcept {
      if (a.time != b.time) return a.time > b.time;
      return a.sequence > b.sequence;
    }
  };

  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> queue_;
  double now_ = 0.0;
  std::uint64_t next_sequence_ = 0;
  Rng rng_;
};

}  // namespace fedhpc
