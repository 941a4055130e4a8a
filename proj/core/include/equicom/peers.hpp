#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "equicom/types.hpp"

namespace equicom {

// One remote node as this node sees it: where to reach it, what it wants to
// hear, and when it last gave a sign of life.
struct PeerRecord {
    NodeId id = 0;
    std::string addr;
    std::set<std::string> subscriptions;
    std::uint64_t last_seen_ms = 0;

    bool operator==(const PeerRecord&) const = default;
};

// The port mapping table: every other node in the overlay, keyed by id.
// Never contains the owning node's own id.
using PortMappingTable = std::map<NodeId, PeerRecord>;

}  // namespace equicom
