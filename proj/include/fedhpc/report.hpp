#pragma once

#include <iosfwd>
#include <span>
#include <string_view>

#include "fedhpc/orchestrator.hpp"

namespace fedhpc {

enum class SummaryFormat { structured_text, csv };

std::string_view metrics_csv_header() noexcept;

/// One row per RoundRecord; client_id is the facility name, absent values are empty.
void write_metrics_csv(std::ostream& out, const MetricsLog& log);

void write_trace_csv(std::ostream& out, const MetricsLog& log);

/// `key: value` lines in a fixed key order, or a header row plus one data row.
void write_summary(std::ostream& out, const Summary& summary, SummaryFormat format);

/// One row per run: final loss and accuracy, round counts per client, and
/// `vs_<algorithm>` columns holding the improvement matrix.
void write_comparison_csv(std::ostream& out, std::span<const Summary> summaries);

}  // namespace fedhpc
