#include "fedhpc/scenario.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fedhpc/errors.hpp"

namespace fedhpc {

namespace {

using json = nlohmann::json;

// Cursor into the parsed document that remembers its field path for diagnostics.
class Node {
 public:
  Node(const json& value, std::string path) : value_(value), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const json& raw() const { return value_; }

  [[noreturn]] void fail(const std::string& message) const { throw ConfigError(path_, message); }

  bool has(std::string_view key) const { return value_.contains(std::string(key)); }

  Node at(std::string_view key) const {
    require_object();
    const auto it = value_.find(std::string(key));
    if (it == value_.end()) throw ConfigError(child_path(key), "required field is missing");
    return Node(*it, child_path(key));
  }

  std::optional<Node> maybe(std::string_view key) const {
    require_object();
    const auto it = value_.find(std::string(key));
    if (it == value_.end() || it->is_null()) return std::nullopt;
    return Node(*it, child_path(key));
  }

  void only(std::initializer_list<std::string_view> allowed) const {
    require_object();
    const std::set<std::string_view> keys(allowed);
    for (const auto& [key, _] : value_.items()) {
      if (keys.count(key) == 0) throw ConfigError(child_path(key), "unknown field");
    }
  }

  double number() const {
    if (!value_.is_number()) fail("expected a number");
    const double x = value_.get<double>();
    if (!std::isfinite(x)) fail("expected a finite number");
    return x;
  }

  std::int64_t integer() const {
    if (!value_.is_number_integer()) fail("expected an integer");
    return value_.get<std::int64_t>();
  }

  std::uint64_t unsigned_integer() const {
    if (!value_.is_number_integer()) fail("expected a nonnegative integer");
    if (value_.is_number_unsigned()) return value_.get<std::uint64_t>();
    const auto x = value_.get<std::int64_t>();
    if (x < 0) fail("expected a nonnegative integer");
    return static_cast<std::uint64_t>(x);
  }

  bool boolean() const {
    if (!value_.is_boolean()) fail("expected true or false");
    return value_.get<bool>();
  }

  std::string string() const {
    if (!value_.is_string()) fail("expected a string");
    return value_.get<std::string>();
  }

  std::vector<Node> elements() const {
    if (!value_.is_array()) fail("expected an array");
    std::vector<Node> out;
    for (std::size_t i = 0; i < value_.size(); ++i) out.emplace_back(value_[i], path_ + "[" + std::to_string(i) + "]");
    return out;
  }

  std::vector<std::pair<std::string, Node>> members() const {
    require_object();
    std::vector<std::pair<std::string, Node>> out;
    for (const auto& [key, v] : value_.items()) out.emplace_back(key, Node(v, child_path(key)));
    return out;
  }

 private:
  void require_object() const {
    if (!value_.is_object()) fail("expected an object");
  }
  std::string child_path(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  const json& value_;
  std::string path_;
};

// Reads [[x, y], ...] pairs.
std::vector<std::pair<double, double>> read_pairs(const Node& node) {
  std::vector<std::pair<double, double>> out;
  for (const Node& item : node.elements()) {
    const auto pair = item.elements();
    if (pair.size() != 2) item.fail("expected a [nodes, value] pair");
    out.emplace_back(pair[0].number(), pair[1].number());
  }
  return out;
}

int read_int(const Node& node, std::int64_t lo = 1) {
  const auto v = node.integer();
  if (v < lo || v > 1'000'000'000) node.fail("expected an integer >= " + std::to_string(lo));
  return static_cast<int>(v);
}

std::size_t read_count(const Node& node, std::uint64_t lo = 1) {
  const auto v = node.unsigned_integer();
  if (v < lo) node.fail("expected an integer >= " + std::to_string(lo));
  return static_cast<std::size_t>(v);
}

void read_algorithm(const Node& node, ScenarioConfig& cfg, bool& has_q_min, bool& has_q_max, bool& has_window) {
  node.only({"kind", "alpha", "staleness_exponent", "buffer_size", "q_min", "q_max", "group_window_s", "server_lr",
             "speed_smoothing", "weight_by_samples"});
  AlgorithmConfig& a = cfg.algorithm;
  if (auto n = node.maybe("kind")) {
    const auto kind = parse_algorithm(n->string());
    if (!kind) n->fail("unknown algorithm '" + n->string() + "' (valid: " + algorithm_names() + ")");
    a.kind = *kind;
  }
  if (auto n = node.maybe("alpha")) a.alpha = n->number();
  if (auto n = node.maybe("staleness_exponent")) a.staleness_exponent = n->number();
  if (auto n = node.maybe("buffer_size")) a.buffer_size = read_count(*n);
  if (auto n = node.maybe("q_min")) {
    a.q_min = read_int(*n);
    has_q_min = true;
  }
  if (auto n = node.maybe("q_max")) {
    a.q_max = read_int(*n);
    has_q_max = true;
  }
  if (auto n = node.maybe("group_window_s")) {
    a.group_window_s = n->number();
    has_window = true;
  }
  if (auto n = node.maybe("server_lr")) a.server_lr = n->number();
  if (auto n = node.maybe("speed_smoothing")) a.speed_smoothing = n->number();
  if (auto n = node.maybe("weight_by_samples")) a.weight_by_samples = n->boolean();
}

void read_task(const Node& node, TaskSpec& task) {
  node.only({"n_features", "n_classes", "noise_sigma", "train_samples", "test_samples", "skew"});
  task.n_features = read_count(node.at("n_features"));
  task.n_classes = read_count(node.at("n_classes"));
  task.noise_sigma = node.at("noise_sigma").number();
  task.train_samples = read_count(node.at("train_samples"));
  task.test_samples = read_count(node.at("test_samples"));
  task.skew = node.at("skew").number();
}

void read_trainer(const Node& node, TrainerConfig& trainer) {
  node.only({"learning_rate", "micro_batch", "momentum", "l2"});
  trainer.learning_rate = node.at("learning_rate").number();
  trainer.micro_batch = read_count(node.at("micro_batch"));
  if (auto n = node.maybe("momentum")) trainer.momentum = n->number();
  if (auto n = node.maybe("l2")) trainer.l2 = n->number();
}

void read_run(const Node& node, ScenarioConfig& cfg) {
  node.only({"base_steps", "step_policy", "target_round_s", "rounds_budget", "wallclock_budget_s", "model_param_count",
             "eval_every_aggregation", "persistent_allocation", "dropout_probability", "seed"});
  cfg.base_steps = read_int(node.at("base_steps"));
  if (auto n = node.maybe("step_policy")) {
    const std::string policy = n->string();
    if (policy == "proportional") cfg.step_policy = StepPolicy::proportional;
    else if (policy == "time_target") cfg.step_policy = StepPolicy::time_target;
    else if (policy == "fixed") cfg.step_policy = StepPolicy::fixed;
    else n->fail("unknown step policy '" + policy + "' (valid: proportional, time_target, fixed)");
  }
  if (auto n = node.maybe("target_round_s")) cfg.target_round_s = n->number();
  if (auto n = node.maybe("rounds_budget")) cfg.rounds_budget = read_count(*n);
  if (auto n = node.maybe("wallclock_budget_s")) cfg.wallclock_budget_s = n->number();
  if (auto n = node.maybe("model_param_count")) cfg.model_param_count = n->unsigned_integer();
  if (auto n = node.maybe("eval_every_aggregation")) cfg.eval_every_aggregation = n->boolean();
  if (auto n = node.maybe("persistent_allocation")) cfg.persistent_allocation = n->boolean();
  if (auto n = node.maybe("dropout_probability")) cfg.dropout_probability = n->number();
  if (auto n = node.maybe("seed")) cfg.seed = n->unsigned_integer();
}

void read_curves(const Node& node, ScenarioConfig& cfg) {
  for (const auto& [name, curve_node] : node.members()) {
    curve_node.only({"micro_batch", "points"});
    ThroughputCurve curve;
    curve.name = name;
    curve.micro_batch = read_int(curve_node.at("micro_batch"));
    for (auto [nodes, rate] : read_pairs(curve_node.at("points"))) curve.points.push_back({nodes, rate});
    cfg.throughput_curves.push_back(std::move(curve));
  }
}

void read_facility(const Node& node, ScenarioConfig& cfg) {
  node.only({"name", "samples", "nodes", "gpus_per_node", "micro_batch", "throughput_profile", "init_overhead_s",
             "rtt_ms", "bandwidth_asymptote_mb_s", "bandwidth_halfsize_mb", "reservation", "queue"});
  FacilityProfile f;
  f.name = node.at("name").string();
  f.nodes = read_int(node.at("nodes"));
  f.gpus_per_node = read_int(node.at("gpus_per_node"));
  f.micro_batch = read_int(node.at("micro_batch"));
  const Node curve_node = node.at("throughput_profile");
  const std::string curve_name = curve_node.string();
  const ThroughputCurve* curve = cfg.find_curve(curve_name);
  if (curve == nullptr) curve_node.fail("no throughput profile named '" + curve_name + "'");
  f.throughput_points = curve->points;
  f.init_overhead_s = node.at("init_overhead_s").number();
  f.rtt_ms = node.at("rtt_ms").number();
  f.bandwidth_asymptote_mb_s = node.at("bandwidth_asymptote_mb_s").number();
  f.bandwidth_halfsize_mb = node.at("bandwidth_halfsize_mb").number();
  if (auto n = node.maybe("reservation")) f.reservation = n->boolean();

  const Node q = node.at("queue");
  q.only({"median_s", "sigma", "node_scaling"});
  f.queue.median_s = q.at("median_s").number();
  f.queue.sigma = q.at("sigma").number();
  if (auto n = q.maybe("node_scaling")) {
    for (auto [nodes, mult] : read_pairs(*n)) f.queue.node_scaling.push_back({nodes, mult});
  }

  cfg.partition_weights.push_back(node.at("samples").number());
  cfg.facility_curves.push_back(curve_name);
  cfg.facilities.push_back(std::move(f));
}

// Re-raises a component's own validation failure under a config path.
template <typename Fn>
void validate_at(const std::string& path, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
}

}  // namespace

std::string_view to_string(StepPolicy policy) noexcept {
  switch (policy) {
    case StepPolicy::proportional: return "proportional";
    case StepPolicy::time_target: return "time_target";
    case StepPolicy::fixed: return "fixed";
  }
  return "unknown";
}

const ThroughputCurve* ScenarioConfig::find_curve(std::string_view curve_name) const {
  for (const auto& c : throughput_curves) {
    if (c.name == curve_name) return &c;
  }
  return nullptr;
}

void ScenarioConfig::validate() const {
  if (facilities.empty()) throw ConfigError("facilities", "at least one facility is required");
  if (partition_weights.size() != facilities.size()) throw ConfigError("facilities", "every facility needs samples");
  if (!rounds_budget && !wallclock_budget_s)
    throw ConfigError("run", "set rounds_budget, wallclock_budget_s, or both");
  if (rounds_budget && *rounds_budget == 0) throw ConfigError("run.rounds_budget", "must be positive");
  if (wallclock_budget_s && !(*wallclock_budget_s > 0.0))
    throw ConfigError("run.wallclock_budget_s", "must be positive");
  if (base_steps < 1) throw ConfigError("run.base_steps", "must be >= 1");
  if (!(target_round_s > 0.0)) throw ConfigError("run.target_round_s", "must be positive");
  if (!(dropout_probability >= 0.0 && dropout_probability < 1.0))
    throw ConfigError("run.dropout_probability", "must be in [0, 1)");

  std::set<std::string> names;
  for (std::size_t i = 0; i < facilities.size(); ++i) {
    const std::string path = "facilities[" + std::to_string(i) + "]";
    if (facilities[i].name.empty()) throw ConfigError(path + ".name", "must be nonempty");
    if (!names.insert(facilities[i].name).second) throw ConfigError(path + ".name", "duplicate facility name");
    if (!(partition_weights[i] > 0.0)) throw ConfigError(path + ".samples", "must be positive");
    validate_at(path, [&] { facilities[i].validate(); });
  }
  for (const auto& curve : throughput_curves) {
    const std::string path = "throughput_profiles." + curve.name;
    if (curve.points.empty()) throw ConfigError(path + ".points", "must be nonempty");
    for (std::size_t k = 0; k < curve.points.size(); ++k) {
      if (!(curve.points[k].nodes > 0.0) || !(curve.points[k].samples_per_second > 0.0))
        throw ConfigError(path + ".points[" + std::to_string(k) + "]", "nodes and throughput must be positive");
      if (k > 0 && !(curve.points[k].nodes > curve.points[k - 1].nodes))
        throw ConfigError(path + ".points[" + std::to_string(k) + "]", "nodes must be strictly increasing");
    }
  }

  if (task.n_features < 1) throw ConfigError("task.n_features", "must be >= 1");
  if (task.n_classes < 2) throw ConfigError("task.n_classes", "must be >= 2");
  if (!(task.noise_sigma >= 0.0)) throw ConfigError("task.noise_sigma", "must be nonnegative");
  if (!(task.skew >= 0.0 && task.skew <= 1.0)) throw ConfigError("task.skew", "must be in [0, 1]");
  if (task.train_samples < facilities.size())
    throw ConfigError("task.train_samples", "must be at least the number of facilities");
  if (task.test_samples < facilities.size())
    throw ConfigError("task.test_samples", "must be at least the number of facilities");
  validate_at("task", [&] {
    partition_counts(partition_weights, task.train_samples);
    partition_counts(partition_weights, task.test_samples);
  });
  validate_at("trainer", [&] { trainer.validate(); });
  validate_at("algorithm", [&] { algorithm.validate(); });
}

ScenarioConfig parse_scenario(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end(), nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("parse error: ") + e.what());
  }

  const Node root(doc, "");
  root.only({"name", "algorithm", "task", "trainer", "run", "throughput_profiles", "facilities"});
  ScenarioConfig cfg;
  if (auto n = root.maybe("name")) cfg.name = n->string();

  bool has_q_min = false;
  bool has_q_max = false;
  bool has_window = false;
  if (auto n = root.maybe("algorithm")) read_algorithm(*n, cfg, has_q_min, has_q_max, has_window);
  read_task(root.at("task"), cfg.task);
  read_trainer(root.at("trainer"), cfg.trainer);
  read_run(root.at("run"), cfg);
  read_curves(root.at("throughput_profiles"), cfg);
  for (const Node& f : root.at("facilities").elements()) read_facility(f, cfg);

  if (!has_q_max) cfg.algorithm.q_max = cfg.base_steps;
  if (!has_q_min) cfg.algorithm.q_min = std::max<std::int64_t>(1, (cfg.base_steps + 9) / 10);
  cfg.validate();
  if (!has_window) cfg.algorithm.group_window_s = 0.05 * expected_round_s(cfg);
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot read config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::vector<std::int64_t> initial_steps(const ScenarioConfig& cfg, std::span<const std::uint64_t> sample_counts) {
  switch (cfg.step_policy) {
    case StepPolicy::proportional:
      return select_steps_proportional(sample_counts, cfg.base_steps);
    case StepPolicy::fixed:
      return std::vector<std::int64_t>(cfg.n_clients(), cfg.base_steps);
    case StepPolicy::time_target: {
      std::vector<std::int64_t> steps;
      for (const auto& f : cfg.facilities) {
        const double compute_s = cfg.target_round_s - f.init_overhead_s;
        const double per_step = static_cast<double>(f.effective_batch()) / throughput(f, f.nodes);
        steps.push_back(std::max<std::int64_t>(1, std::llround(compute_s / per_step)));
      }
      return steps;
    }
  }
  return {};
}

double expected_round_s(const ScenarioConfig& cfg) {
  std::vector<std::uint64_t> counts;
  for (auto n : partition_counts(cfg.partition_weights, cfg.task.train_samples)) counts.push_back(n);
  const auto steps = initial_steps(cfg, counts);
  const double size = model_size_mb(cfg.model_param_count);
  double worst = 0.0;
  for (std::size_t i = 0; i < cfg.facilities.size(); ++i) {
    const auto& f = cfg.facilities[i];
    const double queue = f.reservation ? 0.0 : f.queue.median_at(f.nodes);
    worst = std::max(worst, queue + training_duration(f, steps[i]) + 2.0 * transfer_duration(f, size));
  }
  return worst;
}

std::uint64_t resolve_seed(const ScenarioConfig& cfg, std::optional<std::uint64_t> override_seed) {
  if (override_seed) return *override_seed;
  if (cfg.seed) return *cfg.seed;
  if (const char* env = std::getenv("FEDHPC_SIM_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0') return v;
  }
  return 1;
}

}  // namespace fedhpc
