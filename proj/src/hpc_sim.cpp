#include "fedhpc/hpc_sim.hpp"

#include <cmath>

#include "fedhpc/errors.hpp"

namespace fedhpc {

namespace {

// Piecewise linear in (log x, log y); flat outside [first, last].
double loglog_interpolate(double x0, double y0, double x1, double y1, double x) {
  const double t = (std::log(x) - std::log(x0)) / (std::log(x1) - std::log(x0));
  return std::exp(std::log(y0) + t * (std::log(y1) - std::log(y0)));
}

}  // namespace

double QueueModel::multiplier(double nodes) const {
  if (node_scaling.empty()) return 1.0;
  if (nodes <= node_scaling.front().nodes) return node_scaling.front().median_multiplier;
  for (std::size_t k = 1; k < node_scaling.size(); ++k) {
    const auto& lo = node_scaling[k - 1];
    const auto& hi = node_scaling[k];
    if (nodes == hi.nodes) return hi.median_multiplier;
    if (nodes < hi.nodes) return loglog_interpolate(lo.nodes, lo.median_multiplier, hi.nodes, hi.median_multiplier, nodes);
  }
  return node_scaling.back().median_multiplier;
}

void QueueModel::validate() const {
  if (!(median_s > 0.0) || !std::isfinite(median_s)) throw InvalidArgumentError("queue.median_s must be positive");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidArgumentError("queue.sigma must be nonnegative");
  for (std::size_t k = 0; k < node_scaling.size(); ++k) {
    if (!(node_scaling[k].nodes > 0.0)) throw InvalidArgumentError("queue.node_scaling nodes must be positive");
    if (!(node_scaling[k].median_multiplier > 0.0))
      throw InvalidArgumentError("queue.node_scaling multipliers must be positive");
    if (k > 0 && !(node_scaling[k].nodes > node_scaling[k - 1].nodes))
      throw InvalidArgumentError("queue.node_scaling nodes must be strictly increasing");
    if (k > 0 && node_scaling[k].median_multiplier < node_scaling[k - 1].median_multiplier)
      throw InvalidArgumentError("queue.node_scaling multipliers must be nondecreasing");
  }
}

void FacilityProfile::validate() const {
  if (nodes < 1) throw InvalidArgumentError(name + ": nodes must be >= 1");
  if (gpus_per_node < 1) throw InvalidArgumentError(name + ": gpus_per_node must be >= 1");
  if (micro_batch < 1) throw InvalidArgumentError(name + ": micro_batch must be >= 1");
  if (throughput_points.empty()) throw InvalidArgumentError(name + ": throughput_points must be nonempty");
  for (std::size_t k = 0; k < throughput_points.size(); ++k) {
    if (!(throughput_points[k].nodes > 0.0) || !(throughput_points[k].samples_per_second > 0.0))
      throw InvalidArgumentError(name + ": throughput points must be positive");
    if (k > 0 && !(throughput_points[k].nodes > throughput_points[k - 1].nodes))
      throw InvalidArgumentError(name + ": throughput point nodes must be strictly increasing");
  }
  if (!(init_overhead_s >= 0.0)) throw InvalidArgumentError(name + ": init_overhead_s must be nonnegative");
  if (!(rtt_ms >= 0.0)) throw InvalidArgumentError(name + ": rtt_ms must be nonnegative");
  if (!(bandwidth_asymptote_mb_s > 0.0)) throw InvalidArgumentError(name + ": bandwidth_asymptote_mb_s must be positive");
  if (!(bandwidth_halfsize_mb > 0.0)) throw InvalidArgumentError(name + ": bandwidth_halfsize_mb must be positive");
  queue.validate();
}

double throughput(std::span<const ThroughputPoint> points, double nodes) {
  if (points.empty()) throw InvalidArgumentError("throughput: no calibration points");
  if (!(nodes > 0.0)) throw InvalidArgumentError("throughput: nodes must be positive");
  const auto& first = points.front();
  if (nodes == first.nodes) return first.samples_per_second;
  if (nodes < first.nodes) return first.samples_per_second * nodes / first.nodes;
  for (std::size_t k = 1; k < points.size(); ++k) {
    const auto& lo = points[k - 1];
    const auto& hi = points[k];
    if (nodes == hi.nodes) return hi.samples_per_second;
    if (nodes < hi.nodes) {
      return loglog_interpolate(lo.nodes, lo.samples_per_second, hi.nodes, hi.samples_per_second, nodes);
    }
  }
  return points.back().samples_per_second;
}

double throughput(const FacilityProfile& profile, double nodes) { return throughput(profile.throughput_points, nodes); }

double training_duration(const FacilityProfile& profile, std::int64_t local_steps) {
  if (local_steps < 1) throw InvalidArgumentError("training_duration: local_steps must be >= 1");
  const double rate = throughput(profile, profile.nodes);
  return profile.init_overhead_s +
         static_cast<double>(local_steps) * static_cast<double>(profile.effective_batch()) / rate;
}

double sample_queue_wait(const QueueModel& queue, double nodes, Rng& rng) {
  if (!(nodes >= 1.0)) throw InvalidArgumentError("sample_queue_wait: nodes must be >= 1");
  const double median = queue.median_at(nodes);
  if (queue.sigma == 0.0) return median;
  return median * std::exp(queue.sigma * rng.normal());
}

double sample_queue_wait(const FacilityProfile& profile, Rng& rng) {
  if (profile.reservation) return 0.0;
  return sample_queue_wait(profile.queue, profile.nodes, rng);
}

double model_size_mb(std::uint64_t param_count) noexcept {
  return static_cast<double>(param_count) * 2.0 / 1e6;
}

double effective_bandwidth_mb_s(const FacilityProfile& profile, double size_mb) {
  return profile.bandwidth_asymptote_mb_s * size_mb / (size_mb + profile.bandwidth_halfsize_mb);
}

double transfer_duration(const FacilityProfile& profile, double size_mb) {
  if (!(size_mb >= 0.0)) throw InvalidArgumentError("transfer_duration: size must be nonnegative");
  const double latency_s = profile.rtt_ms / 1000.0;
  if (size_mb == 0.0) return latency_s;
  return latency_s + size_mb / effective_bandwidth_mb_s(profile, size_mb);
}

std::string_view to_string(EventKind kind) noexcept {
  switch (kind) {
    case EventKind::job_submitted: return "job_submitted";
    case EventKind::job_started: return "job_started";
    case EventKind::training_done: return "training_done";
    case EventKind::upload_done: return "upload_done";
    case EventKind::download_done: return "download_done";
    case EventKind::aggregation: return "aggregation";
  }
  return "unknown";
}

const SimEvent& SimClock::peek() const {
  if (queue_.empty()) throw EmptyQueueError("SimClock::peek: no pending events");
  return queue_.top();
}

std::uint64_t SimClock::schedule(double delay_s, SimEvent event) {
  if (!(delay_s >= 0.0) || !std::isfinite(delay_s)) throw InvalidArgumentError("SimClock::schedule: delay must be >= 0");
  event.time = now_ + delay_s;
  event.sequence = next_sequence_++;
  const std::uint64_t seq = event.sequence;
  queue_.push(std::move(event));
  return seq;
}

SimEvent SimClock::next_event() {
  if (queue_.empty()) throw EmptyQueueError("SimClock::next_event: no pending events");
  SimEvent event = queue_.top();
  queue_.pop();
  now_ = event.time;
  return event;
}

}  // namespace fedhpc
