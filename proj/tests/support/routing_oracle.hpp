#pragma once

// Brute-force reference resolver. Walks every (node, directive) pair and
// applies the routing rules literally, one directive at a time, with its own
// bookkeeping — deliberately naive so it stays an independent check on the
// production resolver.

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "equicom/peers.hpp"
#include "equicom/routing.hpp"
#include "equicom/types.hpp"

namespace testsupport {

struct OracleResult {
    std::vector<equicom::routing::RouteEntry> recipients;
    std::uint64_t no_recipient_directives = 0;
    std::uint64_t private_tag_conflicts = 0;
    std::uint64_t dedup_suppressed = 0;
};

inline bool oracle_match(const std::string& sub, const std::string& msg_tag) {
    if (sub.size() > msg_tag.size()) return false;
    return msg_tag.compare(0, sub.size(), sub) == 0;
}

inline OracleResult oracle_resolve(
    const std::vector<equicom::routing::RoutingDirective>& directives,
    const equicom::PortMappingTable& table,
    const equicom::routing::SubscriptionTable& subs,
    equicom::routing::RoundRobinState& rr,
    equicom::NodeId sender) {
    using equicom::Mechanism;
    using equicom::NodeId;
    OracleResult out;

    // Pass 1: match each directive on its own, in list order.
    std::vector<std::pair<NodeId, std::size_t>> hits;  // (node, directive index)
    for (std::size_t di = 0; di < directives.size(); ++di) {
        const auto& d = directives[di];
        std::vector<NodeId> matched;
        switch (d.mechanism) {
            case Mechanism::Private:
                for (const auto& [id, tags] : subs) {
                    if (tags.count(d.tag) > 0) matched.push_back(id);
                }
                if (matched.size() > 1) {
                    ++out.private_tag_conflicts;
                    matched = {*std::min_element(matched.begin(), matched.end())};
                }
                break;
            case Mechanism::Broadcast:
                for (const auto& [id, rec] : table) matched.push_back(id);
                break;
            case Mechanism::GroupBroadcast:
            case Mechanism::Balance:
                for (const auto& [id, tags] : subs) {
                    for (const auto& s : tags) {
                        if (oracle_match(s, d.tag)) {
                            matched.push_back(id);
                            break;
                        }
                    }
                }
                if (d.mechanism == Mechanism::Balance && !matched.empty()) {
                    std::sort(matched.begin(), matched.end());
                    auto& counter = rr.counters[d.tag];
                    matched = {matched[counter % matched.size()]};
                    ++counter;
                }
                break;
        }
        if (matched.empty()) {
            ++out.no_recipient_directives;
            continue;
        }
        for (NodeId id : matched) hits.emplace_back(id, di);
    }

    // Pass 2: drop the sender, collapse duplicates onto the earliest
    // directive, sort by node id.
    std::set<NodeId> seen;
    std::vector<std::pair<NodeId, std::size_t>> kept;
    for (const auto& [id, di] : hits) {
        if (id == sender) continue;
        if (!seen.insert(id).second) {
            ++out.dedup_suppressed;
            continue;
        }
        kept.emplace_back(id, di);
    }
    std::sort(kept.begin(), kept.end());
    for (const auto& [id, di] : kept) {
        out.recipients.push_back({id, directives[di].mechanism, directives[di].tag});
    }
    return out;
}

}  // namespace testsupport
