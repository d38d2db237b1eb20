#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "fedhpc/ids.hpp"
#include "fedhpc/param_vector.hpp"

namespace fedhpc {

/// Shape of the local softmax-regression model. Parameters are stored row
/// per class: `n_features` weights followed by one bias.
struct ModelShape {
  std::size_t n_features = 0;
  std::size_t n_classes = 0;

  std::size_t row_width() const noexcept { return n_features + 1; }
  std::size_t param_dim() const noexcept { return n_classes * row_width(); }
};

/// Gaussian-cluster classification task: one center per class, isotropic noise.
struct SyntheticTask {
  std::size_t n_features = 0;
  std::size_t n_classes = 0;
  std::vector<double> class_centers;  // n_classes x n_features, row-major
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  ModelShape shape() const noexcept { return {n_features, n_classes}; }
  std::span<const double> center(std::size_t cls) const {
    return std::span<const double>(class_centers).subspan(cls * n_features, n_features);
  }

  friend bool operator==(const SyntheticTask&, const SyntheticTask&) = default;
};

struct ClientDataset {
  ClientId client_id{};
  std::size_t n_features = 0;
  std::size_t n_classes = 0;
  std::vector<double> features;  // sample_count() x n_features, row-major
  std::vector<std::uint32_t> labels;

  std::size_t sample_count() const noexcept { return labels.size(); }
  ModelShape shape() const noexcept { return {n_features, n_classes}; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * n_features, n_features);
  }
  // Appends one labelled sample.
  void push(std::span<const double> x, std::uint32_t label);
};

struct TrainerConfig {
  double learning_rate = 0.01;
  std::size_t micro_batch = 16;
  double momentum = 0.0;
  double l2 = 0.0;

  void validate() const;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

SyntheticTask generate_task(std::size_t n_features, std::size_t n_classes, double noise_sigma,
                            std::uint64_t seed);

/// Per-client sample counts: round(total * w_i / sum(w)), with the rounding
/// remainder given to the largest-weight client (lowest index on ties).
std::vector<std::size_t> partition_counts(std::span<const double> client_weights, std::size_t samples_total);

/// Label mixture for `client` out of `n_clients`:
/// (1 - skew) * uniform + skew * uniform-over-dominant-labels, where the
/// dominant labels are assigned round-robin (label c belongs to c mod n_clients).
std::vector<double> label_distribution(std::size_t client, std::size_t n_clients, std::size_t n_classes,
                                       double skew);

std::vector<ClientDataset> partition_noniid(const SyntheticTask& task, std::span<const double> client_weights,
                                            std::size_t samples_total, double skew, std::uint64_t seed);

/// Mean cross-entropy gradient over every sample in `batch`.
ParamVector gradient(const ParamVector& params, const ClientDataset& batch);

/// Mean cross-entropy gradient over the listed rows of `data`.
ParamVector gradient(const ParamVector& params, const ClientDataset& data, std::span<const std::size_t> rows);

/// Mean cross-entropy over all samples (used by finite-difference checks).
double mean_loss(const ParamVector& params, const ClientDataset& batch);

/// `steps` mini-batch SGD steps. Batches come from a seeded shuffle that
/// reshuffles on each wraparound.
ParamVector local_train(const ParamVector& params, const ClientDataset& dataset, std::size_t steps,
                        const TrainerConfig& cfg, std::uint64_t rng_seed);

/// Loss and accuracy over the concatenation of `datasets`. The result does not
/// depend on sample or dataset order.
Evaluation evaluate(const ParamVector& params, std::span<const ClientDataset> datasets);

/// CSV dump: `client_id,row,feature_0..feature_{k-1},label`.
void write_dataset_csv(std::ostream& out, std::span<const ClientDataset> datasets);

}  // namespace fedhpc
