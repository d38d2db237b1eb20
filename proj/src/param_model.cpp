#include "fedhpc/param_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "fedhpc/errors.hpp"
#include "fedhpc/numfmt.hpp"
#include "fedhpc/random.hpp"

namespace fedhpc {

namespace {

void require_shape(const ParamVector& params, const ModelShape& shape, const char* context) {
  if (params.dim() != shape.param_dim()) {
    throw DimensionError(std::string(context) + ": expected " + std::to_string(shape.param_dim()) +
                         " parameters for " + std::to_string(shape.n_classes) + " classes x " +
                         std::to_string(shape.n_features) + " features, got " + std::to_string(params.dim()));
  }
}

// Four running sums keep the FP add latency off the critical path.
double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t f = 0;
  for (; f + 4 <= n; f += 4) {
    s0 += a[f] * b[f];
    s1 += a[f + 1] * b[f + 1];
    s2 += a[f + 2] * b[f + 2];
    s3 += a[f + 3] * b[f + 3];
  }
  for (; f < n; ++f) s0 += a[f] * b[f];
  return (s0 + s1) + (s2 + s3);
}

// Fills `logits` for one sample and returns log-sum-exp of the logits.
double forward(std::span<const double> params, const ModelShape& shape, std::span<const double> x,
               std::span<double> logits) {
  const std::size_t width = shape.row_width();
  double max_logit = -INFINITY;
  for (std::size_t c = 0; c < shape.n_classes; ++c) {
    const double* w = params.data() + c * width;
    const double z = w[shape.n_features] + dot(w, x.data(), shape.n_features);
    logits[c] = z;
    max_logit = std::max(max_logit, z);
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < shape.n_classes; ++c) sum += std::exp(logits[c] - max_logit);
  return max_logit + std::log(sum);
}

// Adds the cross-entropy gradient of one sample into `grad`.
void accumulate_sample(std::span<const double> params, const ModelShape& shape, std::span<const double> x,
                       std::uint32_t label, std::span<double> logits, std::span<double> grad) {
  const double lse = forward(params, shape, x, logits);
  const std::size_t width = shape.row_width();
  for (std::size_t c = 0; c < shape.n_classes; ++c) {
    const double coeff = std::exp(logits[c] - lse) - (c == label ? 1.0 : 0.0);
    double* g = grad.data() + c * width;
    for (std::size_t f = 0; f < shape.n_features; ++f) g[f] += coeff * x[f];
    g[shape.n_features] += coeff;
  }
}

void gradient_into(std::span<const double> params, const ClientDataset& data, std::span<const std::size_t> rows,
                   std::span<double> logits, std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  const ModelShape shape = data.shape();
  for (std::size_t r : rows) accumulate_sample(params, shape, data.row(r), data.labels[r], logits, grad);
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (double& g : grad) g *= inv;
}

void require_nonempty(const ClientDataset& data, const char* context) {
  if (data.sample_count() == 0) throw EmptyInputError(std::string(context) + ": dataset is empty");
}

}  // namespace

void ClientDataset::push(std::span<const double> x, std::uint32_t label) {
  if (x.size() != n_features) throw DimensionError("ClientDataset::push: feature count mismatch");
  if (label >= n_classes) throw InvalidArgumentError("ClientDataset::push: label out of range");
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(label);
}

void TrainerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw InvalidArgumentError("trainer: learning_rate must be positive");
  if (micro_batch < 1) throw InvalidArgumentError("trainer: micro_batch must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgumentError("trainer: momentum must be in [0, 1)");
  if (!(l2 >= 0.0)) throw InvalidArgumentError("trainer: l2 must be nonnegative");
}

SyntheticTask generate_task(std::size_t n_features, std::size_t n_classes, double noise_sigma, std::uint64_t seed) {
  if (n_features < 1) throw InvalidArgumentError("generate_task: n_features must be >= 1");
  if (n_classes < 2) throw InvalidArgumentError("generate_task: n_classes must be >= 2");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw InvalidArgumentError("generate_task: noise_sigma must be finite and nonnegative");

  SyntheticTask task;
  task.n_features = n_features;
  task.n_classes = n_classes;
  task.noise_sigma = noise_sigma;
  task.seed = seed;
  task.class_centers.resize(n_features * n_classes);

  Rng rng(derive_seed(seed, 0xc3a7e5ULL));
  for (std::size_t c = 0; c < n_classes; ++c) {
    // A continuous draw never repeats in practice; redraw rather than assume it.
    bool distinct = false;
    while (!distinct) {
      for (std::size_t f = 0; f < n_features; ++f) task.class_centers[c * n_features + f] = rng.normal();
      distinct = true;
      for (std::size_t prev = 0; prev < c && distinct; ++prev) {
        distinct = !std::equal(task.center(prev).begin(), task.center(prev).end(), task.center(c).begin());
      }
    }
  }
  return task;
}

std::vector<std::size_t> partition_counts(std::span<const double> client_weights, std::size_t samples_total) {
  if (client_weights.empty()) throw InvalidArgumentError("partition: no clients");
  double weight_sum = 0.0;
  for (double w : client_weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw InvalidArgumentError("partition: client weights must be positive");
    weight_sum += w;
  }
  if (samples_total < client_weights.size())
    throw InvalidArgumentError("partition: samples_total must be at least the number of clients");

  const double total = static_cast<double>(samples_total);
  std::vector<long long> counts(client_weights.size());
  long long assigned = 0;
  std::size_t largest = 0;
  for (std::size_t i = 0; i < client_weights.size(); ++i) {
    counts[i] = std::llround(total * client_weights[i] / weight_sum);
    assigned += counts[i];
    if (client_weights[i] > client_weights[largest]) largest = i;
  }
  counts[largest] += static_cast<long long>(samples_total) - assigned;

  std::vector<std::size_t> out(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] <= 0)
      throw InvalidArgumentError("partition: client " + std::to_string(i) + " would receive no samples");
    out[i] = static_cast<std::size_t>(counts[i]);
  }
  return out;
}

std::vector<double> label_distribution(std::size_t client, std::size_t n_clients, std::size_t n_classes,
                                       double skew) {
  if (!(skew >= 0.0 && skew <= 1.0)) throw InvalidArgumentError("partition: skew must be in [0, 1]");
  std::vector<bool> dominant(n_classes, false);
  if (n_classes >= n_clients) {
    for (std::size_t c = client; c < n_classes; c += n_clients) dominant[c] = true;
  } else {
    dominant[client % n_classes] = true;
  }
  const auto n_dominant = static_cast<double>(std::count(dominant.begin(), dominant.end(), true));
  std::vector<double> p(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    p[c] = (1.0 - skew) / static_cast<double>(n_classes) + (dominant[c] ? skew / n_dominant : 0.0);
  }
  return p;
}

namespace {

// Largest-remainder apportionment of `n` over probabilities `p`; ties go to the lower class.
std::vector<std::size_t> apportion(std::size_t n, std::span<const double> p) {
  std::vector<std::size_t> counts(p.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    const double exact = static_cast<double>(n) * p[c];
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[remainders[k % remainders.size()].second];
  return counts;
}

}  // namespace

std::vector<ClientDataset> partition_noniid(const SyntheticTask& task, std::span<const double> client_weights,
                                            std::size_t samples_total, double skew, std::uint64_t seed) {
  const std::vector<std::size_t> counts = partition_counts(client_weights, samples_total);
  const std::size_t n_clients = counts.size();

  std::vector<ClientDataset> out;
  out.reserve(n_clients);
  std::vector<double> x(task.n_features);
  for (std::size_t i = 0; i < n_clients; ++i) {
    const std::vector<double> p = label_distribution(i, n_clients, task.n_classes, skew);
    const std::vector<std::size_t> per_label = apportion(counts[i], p);

    std::vector<std::uint32_t> labels;
    labels.reserve(counts[i]);
    for (std::size_t c = 0; c < per_label.size(); ++c) labels.insert(labels.end(), per_label[c], static_cast<std::uint32_t>(c));

    Rng rng(derive_seed(seed, i));
    rng.shuffle(std::span<std::uint32_t>(labels));

    ClientDataset data;
    data.client_id = client_at(i);
    data.n_features = task.n_features;
    data.n_classes = task.n_classes;
    data.features.reserve(counts[i] * task.n_features);
    data.labels.reserve(counts[i]);
    for (std::uint32_t label : labels) {
      const auto center = task.center(label);
      for (std::size_t f = 0; f < task.n_features; ++f) x[f] = center[f] + task.noise_sigma * rng.normal();
      data.push(x, label);
    }
    out.push_back(std::move(data));
  }
  return out;
}

ParamVector gradient(const ParamVector& params, const ClientDataset& batch) {
  require_shape(params, batch.shape(), "gradient");
  require_nonempty(batch, "gradient");
  std::vector<std::size_t> rows(batch.sample_count());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return gradient(params, batch, rows);
}

ParamVector gradient(const ParamVector& params, const ClientDataset& data, std::span<const std::size_t> rows) {
  require_shape(params, data.shape(), "gradient");
  if (rows.empty()) throw EmptyInputError("gradient: empty batch");
  for (std::size_t r : rows) {
    if (r >= data.sample_count()) throw InvalidArgumentError("gradient: row index out of range");
  }
  ParamVector grad(params.dim());
  std::vector<double> logits(data.n_classes);
  gradient_into(params.values(), data, rows, logits, grad.values());
  return grad;
}

double mean_loss(const ParamVector& params, const ClientDataset& batch) {
  const ClientDataset* one = &batch;
  return evaluate(params, std::span<const ClientDataset>(one, 1)).loss;
}

ParamVector local_train(const ParamVector& params, const ClientDataset& dataset, std::size_t steps,
                        const TrainerConfig& cfg, std::uint64_t rng_seed) {
  require_shape(params, dataset.shape(), "local_train");
  require_nonempty(dataset, "local_train");
  cfg.validate();
  if (steps == 0) return params;

  const ModelShape shape = dataset.shape();
  const std::size_t n = dataset.sample_count();
  Rng rng(rng_seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  std::size_t cursor = 0;

  ParamVector out = params;
  std::span<double> w = out.values();
  std::vector<double> grad(params.dim());
  std::vector<double> velocity(cfg.momentum > 0.0 ? params.dim() : 0, 0.0);
  std::vector<double> logits(shape.n_classes);
  std::vector<std::size_t> batch(cfg.micro_batch);

  for (std::size_t step = 0; step < steps; ++step) {
    for (std::size_t& slot : batch) {
      if (cursor == n) {
        rng.shuffle(std::span<std::size_t>(order));
        cursor = 0;
      }
      slot = order[cursor++];
    }
    gradient_into(w, dataset, batch, logits, grad);
    if (cfg.l2 > 0.0) {
      for (std::size_t c = 0; c < shape.n_classes; ++c) {
        const std::size_t base = c * shape.row_width();
        for (std::size_t f = 0; f < shape.n_features; ++f) grad[base + f] += cfg.l2 * w[base + f];
      }
    }
    if (cfg.momentum > 0.0) {
      for (std::size_t i = 0; i < grad.size(); ++i) {
        velocity[i] = cfg.momentum * velocity[i] + grad[i];
        w[i] -= cfg.learning_rate * velocity[i];
      }
    } else {
      for (std::size_t i = 0; i < grad.size(); ++i) w[i] -= cfg.learning_rate * grad[i];
    }
  }
  require_finite(out, "local_train");
  return out;
}

Evaluation evaluate(const ParamVector& params, std::span<const ClientDataset> datasets) {
  std::size_t total = 0;
  for (const auto& d : datasets) total += d.sample_count();
  if (total == 0) throw EmptyInputError("evaluate: no samples");

  std::vector<double> losses;
  losses.reserve(total);
  std::size_t correct = 0;
  for (const auto& data : datasets) {
    if (data.sample_count() == 0) continue;
    require_shape(params, data.shape(), "evaluate");
    const ModelShape shape = data.shape();
    std::vector<double> logits(shape.n_classes);
    for (std::size_t r = 0; r < data.sample_count(); ++r) {
      const double lse = forward(params.values(), shape, data.row(r), logits);
      const std::uint32_t label = data.labels[r];
      losses.push_back(lse - logits[label]);
      const auto best = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
      if (best == label) ++correct;
    }
  }
  // Summing in sorted order makes the result independent of sample order.
  std::sort(losses.begin(), losses.end());
  double sum = 0.0;
  for (double l : losses) sum += l;
  return {sum / static_cast<double>(total), static_cast<double>(correct) / static_cast<double>(total)};
}

void write_dataset_csv(std::ostream& out, std::span<const ClientDataset> datasets) {
  const std::size_t k = datasets.empty() ? 0 : datasets.front().n_features;
  out << "client_id,row";
  for (std::size_t f = 0; f < k; ++f) out << ",feature_" << f;
  out << ",label\n";
  for (const auto& data : datasets) {
    if (data.n_features != k) throw DimensionError("write_dataset_csv: datasets disagree on feature count");
    for (std::size_t r = 0; r < data.sample_count(); ++r) {
      out << to_string(data.client_id) << ',' << r;
      for (double v : data.row(r)) out << ',' << format_double(v);
      out << ',' << data.labels[r] << '\n';
    }
  }
}

}  // namespace fedhpc
