#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace fedhpc {

enum class ClientId : std::uint32_t {};
enum class GroupId : std::uint64_t {};

constexpr std::size_t index_of(ClientId id) noexcept { return static_cast<std::size_t>(id); }
constexpr std::uint64_t value_of(GroupId id) noexcept { return static_cast<std::uint64_t>(id); }
constexpr ClientId client_at(std::size_t index) noexcept {
  return static_cast<ClientId>(static_cast<std::uint32_t>(index));
}

inline std::string to_string(ClientId id) { return std::to_string(index_of(id)); }
inline std::string to_string(GroupId id) { return std::to_string(value_of(id)); }

}  // namespace fedhpc
