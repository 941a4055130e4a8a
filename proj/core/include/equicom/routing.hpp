#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "equicom/peers.hpp"
#include "equicom/types.hpp"

namespace equicom::routing {

// One (mechanism, tag) pair out of a send's routing-information list.
struct RoutingDirective {
    Mechanism mechanism = Mechanism::Broadcast;
    std::string tag;

    bool operator==(const RoutingDirective&) const = default;
};

// PRIVATE and BALANCE need a non-empty tag; BROADCAST must leave it empty.
bool directive_valid(const RoutingDirective& directive);

// Per-node declared interests. Keyed ascending so "lowest NodeId wins" rules
// fall out of plain iteration.
using SubscriptionTable = std::map<NodeId, std::set<std::string>>;

// Sender-side round-robin positions, one counter per balance tag.
struct RoundRobinState {
    std::map<std::string, std::uint64_t> counters;
};

struct RouteEntry {
    NodeId node = 0;
    Mechanism mechanism = Mechanism::Broadcast;
    std::string tag;

    bool operator==(const RouteEntry&) const = default;
};

struct RouteResult {
    std::vector<RouteEntry> recipients;           // unique nodes, ascending id
    std::uint64_t no_recipient_directives = 0;    // directives that matched nobody
    std::uint64_t private_tag_conflicts = 0;      // PRIVATE tags claimed by >1 node
    std::uint64_t dedup_suppressed = 0;           // entries dropped by the one-copy rule
};

// True iff message_tag starts with subscription; the empty subscription
// matches everything.
bool match_tag(std::string_view subscription, std::string_view message_tag);

// members must be non-empty and strictly ascending; picks
// members[counter mod size]. Throws Error{EmptyMembers} on an empty list.
NodeId next_balance_index(const std::vector<NodeId>& members, std::uint64_t counter);

// The decision core. Per directive:
//   PRIVATE          nodes holding `tag` exactly; ties go to the lowest id,
//                    counted in private_tag_conflicts
//   BROADCAST        every node in `table`
//   GROUP_BROADCAST  every node with >=1 subscription matching `tag`
//   BALANCE          one node of the GROUP_BROADCAST set via
//                    next_balance_index; the tag's counter advances only when
//                    the set is non-empty
// Afterwards the sender is removed, duplicates collapse to the earliest
// directive's entry, and recipients come back sorted by id. Pure except for
// the rr counters. Throws Error{InvalidArgument} on an empty or invalid
// directive list.
RouteResult resolve_recipients(const std::vector<RoutingDirective>& directives,
                               const PortMappingTable& table,
                               const SubscriptionTable& subs,
                               RoundRobinState& rr,
                               NodeId sender);

// Idempotent add/remove of one tag for one node.
void apply_subscription_update(SubscriptionTable& subs, NodeId node, SubOp op,
                               const std::string& tag);

// Projects the table's per-peer subscription sets into a SubscriptionTable.
SubscriptionTable subscription_view(const PortMappingTable& table);

}  // namespace equicom::routing
