#include "fedhpc/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "fedhpc/default_scenarios.hpp"
#include "fedhpc/errors.hpp"
#include "fedhpc/numfmt.hpp"
#include "fedhpc/orchestrator.hpp"
#include "fedhpc/report.hpp"

namespace fedhpc {

namespace {

namespace fs = std::filesystem;

struct UsageError : Error {
  using Error::Error;
};

struct Options {
  std::string config;
  std::vector<std::string> algorithms;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  bool trace = false;
  bool force = false;
  std::size_t sweep_seeds = 0;
  unsigned jobs = 1;
  std::string format = "structured-text";
};

// Files are rendered in memory first so a failure leaves the output directory untouched.
class OutputSet {
 public:
  void add(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }

  void commit(const fs::path& dir, bool force) const {
    for (const auto& [name, _] : files_) {
      if (!force && fs::exists(dir / name)) {
        throw UsageError((dir / name).string() + " already exists (use --force to overwrite)");
      }
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
    for (const auto& [name, content] : files_) {
      std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
      f << content;
      if (!f) throw Error("cannot write " + (dir / name).string());
    }
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

AlgorithmKind algorithm_or_throw(const std::string& name) {
  const auto kind = parse_algorithm(name);
  if (!kind) throw UsageError("unknown algorithm '" + name + "' (valid: " + algorithm_names() + ")");
  return *kind;
}

SummaryFormat summary_format(const Options& o) {
  return o.format == "csv" ? SummaryFormat::csv : SummaryFormat::structured_text;
}

std::string summary_file(const Options& o) { return o.format == "csv" ? "summary.csv" : "summary.txt"; }

template <typename Fn>
std::string render(Fn&& fn) {
  std::ostringstream s;
  fn(s);
  return s.str();
}

std::string round_distribution(const Summary& s) {
  std::string out;
  for (std::size_t i = 0; i < s.rounds_per_client.size(); ++i) out += (i ? "/" : "") + std::to_string(s.rounds_per_client[i]);
  return out;
}

bool uneven(const Summary& s) {
  const auto [lo, hi] = std::minmax_element(s.rounds_per_client.begin(), s.rounds_per_client.end());
  return lo != s.rounds_per_client.end() && *hi - *lo >= 2;
}

std::vector<MetricsLog> sweep(const ScenarioConfig& base, const std::vector<AlgorithmKind>& kinds, std::uint64_t first_seed,
                              std::size_t n_seeds, unsigned jobs) {
  std::vector<RunRequest> requests;
  for (std::size_t k = 0; k < n_seeds; ++k) {
    for (AlgorithmKind kind : kinds) {
      RunRequest r{base, {}};
      r.config.algorithm.kind = kind;
      r.config.eval_every_aggregation = false;
      r.options.seed = first_seed + k;
      requests.push_back(std::move(r));
    }
  }
  return run_many(requests, jobs);
}

std::string sweep_csv(const std::vector<Summary>& summaries) {
  std::ostringstream s;
  s << "seed,algorithm,final_global_loss,final_global_acc,rounds,aggregations\n";
  for (const auto& sm : summaries) {
    s << sm.seed << ',' << to_string(sm.algorithm) << ','
      << (sm.final_global_loss ? format_double(*sm.final_global_loss) : "") << ','
      << (sm.final_global_acc ? format_double(*sm.final_global_acc) : "") << ',' << round_distribution(sm) << ','
      << sm.aggregations << '\n';
  }
  return s.str();
}

void report_sweep(std::ostream& out, const std::vector<Summary>& summaries, std::size_t n_seeds) {
  std::map<AlgorithmKind, std::size_t> uneven_count;
  std::map<std::uint64_t, std::map<AlgorithmKind, double>> losses;
  for (const auto& s : summaries) {
    if (uneven(s)) ++uneven_count[s.algorithm];
    if (s.final_global_loss) losses[s.seed][s.algorithm] = *s.final_global_loss;
  }
  for (AlgorithmKind kind : kAllAlgorithms) {
    if (std::none_of(summaries.begin(), summaries.end(), [&](const Summary& s) { return s.algorithm == kind; }))
      continue;
    out << to_string(kind) << " uneven rounds (max - min >= 2): " << uneven_count[kind] << "/" << n_seeds << '\n';
  }
  std::size_t wins = 0;
  std::size_t paired = 0;
  for (const auto& [seed, by_algo] : losses) {
    const auto compass = by_algo.find(AlgorithmKind::fedcompass);
    const auto async = by_algo.find(AlgorithmKind::fedasync);
    if (compass == by_algo.end() || async == by_algo.end()) continue;
    ++paired;
    if (compass->second <= async->second) ++wins;
  }
  if (paired > 0) {
    const bool pass = static_cast<double>(wins) >= 0.7 * static_cast<double>(paired);
    out << "fedcompass <= fedasync final loss: " << wins << "/" << paired << " seeds: " << (pass ? "PASS" : "FAIL")
        << '\n';
  }
}

int cmd_simulate(const Options& o, std::ostream& out) {
  ScenarioConfig cfg = load_scenario(o.config);
  if (!o.algorithms.empty()) {
    if (o.algorithms.size() > 1) throw UsageError("simulate takes a single --algorithm");
    cfg.algorithm.kind = algorithm_or_throw(o.algorithms.front());
  }
  OutputSet files;
  if (o.sweep_seeds > 0) {
    const auto logs = sweep(cfg, {cfg.algorithm.kind}, resolve_seed(cfg, o.seed), o.sweep_seeds, o.jobs);
    std::vector<Summary> summaries;
    for (const auto& log : logs) summaries.push_back(summarize(log));
    files.add("sweep.csv", sweep_csv(summaries));
    files.commit(o.out, o.force);
    report_sweep(out, summaries, o.sweep_seeds);
    return kExitOk;
  }

  const MetricsLog log = run_scenario(cfg, RunOptions{o.seed, o.trace});
  const Summary summary = summarize(log);
  files.add("metrics.csv", render([&](std::ostream& s) { write_metrics_csv(s, log); }));
  files.add(summary_file(o), render([&](std::ostream& s) { write_summary(s, summary, summary_format(o)); }));
  if (o.trace) files.add("events.csv", render([&](std::ostream& s) { write_trace_csv(s, log); }));
  files.commit(o.out, o.force);
  write_summary(out, summary, SummaryFormat::structured_text);
  return kExitOk;
}

int cmd_compare(const Options& o, std::ostream& out) {
  ScenarioConfig cfg = load_scenario(o.config);
  std::vector<AlgorithmKind> kinds;
  if (o.algorithms.empty()) {
    kinds.assign(kAllAlgorithms.begin(), kAllAlgorithms.end());
  } else {
    for (const auto& name : o.algorithms) {
      const AlgorithmKind kind = algorithm_or_throw(name);
      if (std::find(kinds.begin(), kinds.end(), kind) != kinds.end())
        throw UsageError("algorithm '" + name + "' given twice");
      kinds.push_back(kind);
    }
  }
  if (kinds.size() < 2) throw UsageError("compare needs at least two algorithms");

  OutputSet files;
  if (o.sweep_seeds > 0) {
    const auto logs = sweep(cfg, kinds, resolve_seed(cfg, o.seed), o.sweep_seeds, o.jobs);
    std::vector<Summary> summaries;
    for (const auto& log : logs) summaries.push_back(summarize(log));
    files.add("sweep.csv", sweep_csv(summaries));
    files.commit(o.out, o.force);
    report_sweep(out, summaries, o.sweep_seeds);
    return kExitOk;
  }

  std::vector<RunRequest> requests;
  for (AlgorithmKind kind : kinds) {
    RunRequest r{cfg, RunOptions{o.seed, o.trace}};
    r.config.algorithm.kind = kind;
    requests.push_back(std::move(r));
  }
  const auto logs = run_many(requests, o.jobs);
  std::vector<Summary> summaries;
  for (const auto& log : logs) {
    const Summary s = summarize(log);
    const std::string name(to_string(s.algorithm));
    files.add("metrics_" + name + ".csv", render([&](std::ostream& f) { write_metrics_csv(f, log); }));
    files.add((o.format == "csv" ? "summary_" + name + ".csv" : "summary_" + name + ".txt"),
              render([&](std::ostream& f) { write_summary(f, s, summary_format(o)); }));
    if (o.trace) files.add("events_" + name + ".csv", render([&](std::ostream& f) { write_trace_csv(f, log); }));
    summaries.push_back(s);
  }
  const std::string comparison = render([&](std::ostream& f) { write_comparison_csv(f, summaries); });
  files.add("comparison.csv", comparison);
  files.commit(o.out, o.force);
  out << comparison;
  return kExitOk;
}

struct Check {
  std::string label;
  bool pass;
};

int cmd_calibrate(const Options& o, std::ostream& out) {
  const ScenarioConfig cfg =
      o.config.empty() ? parse_scenario(default_scenario_text("table4_queued.cfg")) : load_scenario(o.config);
  std::vector<Check> checks;

  const std::vector<std::pair<std::string, double>> throughput_anchors = {
      {"aurora", 2100}, {"perlmutter_80gb", 1200}, {"frontier", 1000}, {"polaris", 250}, {"perlmutter_40gb", 250}};
  for (const auto& [curve_name, anchor] : throughput_anchors) {
    const ThroughputCurve* curve = cfg.find_curve(curve_name);
    if (curve == nullptr) {
      checks.push_back({curve_name + "@64: no such throughput profile", false});
      continue;
    }
    const double got = throughput(curve->points, 64.0);
    checks.push_back({curve_name + "@64 = " + format_fixed(got, 1) + " samples/s (anchor " + format_fixed(anchor, 0) +
                          ", +/-1%)",
                      std::abs(got - anchor) <= 0.01 * anchor});
  }

  for (const auto& [count, label, expect] : {std::tuple{std::uint64_t{125'000'000}, "125M", 250.0},
                                             std::tuple{std::uint64_t{13'000'000'000}, "13B", 26000.0}}) {
    const double mb = model_size_mb(count);
    checks.push_back({std::string(label) + " -> " + format_double(mb) + " MB (expected " + format_double(expect) + ")",
                      mb == expect});
  }

  const std::map<std::string, double> rtt_anchors = {
      {"Aurora", 0.266}, {"Polaris", 0.210}, {"Frontier", 17.281}, {"Perlmutter", 45.205}};
  for (const auto& [name, rtt] : rtt_anchors) {
    const auto it = std::find_if(cfg.facilities.begin(), cfg.facilities.end(),
                                 [&](const FacilityProfile& f) { return f.name == name; });
    if (it == cfg.facilities.end()) {
      checks.push_back({name + " rtt: facility missing", false});
      continue;
    }
    checks.push_back({name + " rtt = " + format_double(it->rtt_ms) + " ms (expected " + format_double(rtt) + ")",
                      it->rtt_ms == rtt});
  }

  const auto polaris = std::find_if(cfg.facilities.begin(), cfg.facilities.end(),
                                    [](const FacilityProfile& f) { return f.name == "Polaris"; });
  if (polaris == cfg.facilities.end()) {
    checks.push_back({"Polaris queue@64: facility missing", false});
  } else {
    Rng rng(derive_seed(resolve_seed(cfg, o.seed), 9));
    std::vector<double> waits(10'000);
    for (double& w : waits) w = sample_queue_wait(polaris->queue, 64.0, rng);
    std::nth_element(waits.begin(), waits.begin() + waits.size() / 2, waits.end());
    const double upper = waits[waits.size() / 2];
    std::nth_element(waits.begin(), waits.begin() + waits.size() / 2 - 1, waits.begin() + waits.size() / 2);
    const double median = 0.5 * (upper + waits[waits.size() / 2 - 1]);
    checks.push_back({"Polaris queue median@64 = " + format_fixed(median, 0) + " s over 10000 draws (anchor 360000, +/-5%)",
                      std::abs(median - 360000.0) <= 0.05 * 360000.0});
  }

  bool all = true;
  for (const auto& c : checks) {
    out << c.label << ": " << (c.pass ? "PASS" : "FAIL") << '\n';
    all = all && c.pass;
  }
  return all ? kExitOk : kExitCheckFailed;
}

int cmd_emit_defaults(const Options& o, std::ostream& out) {
  OutputSet files;
  for (const auto& s : default_scenarios()) files.add(std::string(s.file_name), std::string(s.text));
  files.commit(o.out, o.force);
  for (const auto& s : default_scenarios()) out << "wrote " << (fs::path(o.out) / s.file_name).string() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-facility federated learning simulator", "fedhpc_sim"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* config = sub->add_option("--config", o.config, "scenario file");
    if (needs_config) config->required();
    sub->add_option("--seed", o.seed, "seed override (else config, then FEDHPC_SIM_SEED, then 1)");
    sub->add_option("--out", o.out, "output directory (created if absent)");
    sub->add_flag("--force", o.force, "overwrite existing output files");
  };
  auto add_run = [&](CLI::App* sub, bool repeatable) {
    auto* algo = sub->add_option("--algorithm", o.algorithms, "fedavg, fedasync, fedbuff or fedcompass");
    if (!repeatable) algo->expected(1);
    sub->add_flag("--trace", o.trace, "also write the event trace");
    sub->add_option("--sweep-seeds", o.sweep_seeds, "run N consecutive seeds and report aggregate statistics");
    sub->add_option("--jobs", o.jobs, "worker threads for sweeps and comparisons")->check(CLI::Range(1u, 1024u));
    sub->add_option("--format", o.format, "summary format")
        ->check(CLI::IsMember({"csv", "structured-text"}));
  };

  auto* simulate = app.add_subcommand("simulate", "run one scenario");
  add_common(simulate, true);
  add_run(simulate, false);
  auto* compare = app.add_subcommand("compare", "run several algorithms under identical conditions");
  add_common(compare, true);
  add_run(compare, true);
  auto* calibrate = app.add_subcommand("calibrate-check", "check calibration anchors");
  add_common(calibrate, false);
  auto* emit = app.add_subcommand("emit-defaults", "write the shipped scenarios");
  emit->add_option("--out", o.out, "output directory");
  emit->add_flag("--force", o.force, "overwrite existing files");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(o, out);
    if (compare->parsed()) return cmd_compare(o, out);
    if (calibrate->parsed()) return cmd_calibrate(o, out);
    return cmd_emit_defaults(o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace fedhpc
