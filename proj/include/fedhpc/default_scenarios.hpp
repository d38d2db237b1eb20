#pragma once

#include <span>
#include <string_view>

namespace fedhpc {

struct DefaultScenario {
  std::string_view file_name;
  std::string_view text;
};

/// The two shipped scenarios: co-scheduled 64-node FedAvg and the two-node queued comparison.
std::span<const DefaultScenario> default_scenarios() noexcept;

/// Text of a shipped scenario by file name; empty when unknown.
std::string_view default_scenario_text(std::string_view file_name) noexcept;

}  // namespace fedhpc
