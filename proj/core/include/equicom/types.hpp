#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace equicom {

// Node identity within one overlay. Zero is reserved as "unset"; a configured
// communicator must use a nonzero id.
using NodeId = std::uint64_t;

// Delivery mechanism carried in DATA frames (wire codes 1..4).
enum class Mechanism : std::uint8_t {
    Private = 1,         // exact-tag inbox, single owner
    Broadcast = 2,       // every known peer
    GroupBroadcast = 3,  // every peer with a prefix-matching subscription
    Balance = 4,         // one prefix-matched peer, round-robin
};

constexpr bool mechanism_code_valid(std::uint8_t code) { return code >= 1 && code <= 4; }

std::string_view mechanism_name(Mechanism mech);
std::optional<Mechanism> mechanism_from_name(std::string_view name);

// Subscription update verb carried in SUB frames (wire codes 1..2).
enum class SubOp : std::uint8_t { Add = 1, Remove = 2 };

}  // namespace equicom
