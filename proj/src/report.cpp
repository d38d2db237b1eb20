#include "fedhpc/report.hpp"

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "fedhpc/numfmt.hpp"

namespace fedhpc {

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string client_name(const MetricsLog& log, const std::optional<ClientId>& id) {
  if (!id) return {};
  const std::size_t i = index_of(*id);
  return i < log.client_names.size() ? log.client_names[i] : to_string(*id);
}

std::string join_rounds(const Summary& s) {
  std::string out;
  for (std::size_t i = 0; i < s.rounds_per_client.size(); ++i) {
    if (i) out += '/';
    out += std::to_string(s.rounds_per_client[i]);
  }
  return out;
}

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\n") == std::string_view::npos) return std::string(text);
  std::string quoted = "\"";
  for (char c : text) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + '"';
}

}  // namespace

std::string_view metrics_csv_header() noexcept {
  return "sim_time_s,event,client_id,global_version,global_loss,global_acc,local_loss,local_steps,queue_wait_s,"
         "train_s,transfer_s";
}

void write_metrics_csv(std::ostream& out, const MetricsLog& log) {
  out << metrics_csv_header() << '\n';
  for (const auto& r : log.records) {
    out << format_double(r.sim_time_s) << ',' << to_string(r.event) << ',' << csv_field(client_name(log, r.client_id))
        << ',' << r.global_version << ',' << opt(r.global_loss) << ',' << opt(r.global_acc) << ','
        << opt(r.local_loss) << ',';
    if (r.event == RecordKind::local_round_done) {
      out << r.local_steps << ',' << format_double(r.queue_wait_s) << ',' << format_double(r.train_s) << ','
          << format_double(r.transfer_s);
    } else {
      out << ",,,";
    }
    out << '\n';
  }
}

void write_trace_csv(std::ostream& out, const MetricsLog& log) {
  out << "time_s,sequence,kind,client_id,detail\n";
  for (const auto& t : log.trace) {
    out << format_double(t.time_s) << ',' << t.sequence << ',' << to_string(t.kind) << ','
        << csv_field(client_name(log, t.client)) << ',' << csv_field(t.detail) << '\n';
  }
}

void write_summary(std::ostream& out, const Summary& s, SummaryFormat format) {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("scenario", s.scenario);
  kv.emplace_back("algorithm", std::string(to_string(s.algorithm)));
  kv.emplace_back("seed", std::to_string(s.seed));
  kv.emplace_back("rounds", join_rounds(s));
  for (std::size_t i = 0; i < s.rounds_per_client.size(); ++i) {
    const std::string name = i < s.client_names.size() ? s.client_names[i] : std::to_string(i);
    kv.emplace_back("rounds." + name, std::to_string(s.rounds_per_client[i]));
  }
  kv.emplace_back("total_local_rounds", std::to_string(s.total_local_rounds));
  kv.emplace_back("aggregations", std::to_string(s.aggregations));
  kv.emplace_back("final_version", std::to_string(s.final_version));
  kv.emplace_back("final_global_loss", opt(s.final_global_loss));
  kv.emplace_back("final_global_acc", opt(s.final_global_acc));
  kv.emplace_back("last_aggregation_time_s", opt(s.last_aggregation_time_s));
  kv.emplace_back("total_sim_time_s", format_double(s.total_sim_time_s));

  if (format == SummaryFormat::structured_text) {
    for (const auto& [k, v] : kv) out << k << ": " << v << '\n';
    return;
  }
  for (std::size_t i = 0; i < kv.size(); ++i) out << (i ? "," : "") << csv_field(kv[i].first);
  out << '\n';
  for (std::size_t i = 0; i < kv.size(); ++i) out << (i ? "," : "") << csv_field(kv[i].second);
  out << '\n';
}

void write_comparison_csv(std::ostream& out, std::span<const Summary> summaries) {
  out << "algorithm,final_global_loss,final_global_acc,aggregations,total_local_rounds,rounds";
  const std::vector<std::string> names = summaries.empty() ? std::vector<std::string>{} : summaries[0].client_names;
  for (const auto& n : names) out << ',' << csv_field("rounds." + n);
  for (const auto& s : summaries) out << ",vs_" << to_string(s.algorithm);
  out << '\n';

  const auto matrix = improvement_matrix(summaries);
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    const Summary& s = summaries[i];
    out << to_string(s.algorithm) << ',' << opt(s.final_global_loss) << ',' << opt(s.final_global_acc) << ','
        << s.aggregations << ',' << s.total_local_rounds << ',' << join_rounds(s);
    for (std::size_t c = 0; c < names.size(); ++c) {
      out << ',' << (c < s.rounds_per_client.size() ? s.rounds_per_client[c] : 0);
    }
    for (double v : matrix[i]) out << ',' << (std::isnan(v) ? std::string() : format_double(v));
    out << '\n';
  }
}

}  // namespace fedhpc
