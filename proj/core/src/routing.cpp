#include "equicom/routing.hpp"

#include <algorithm>

#include "equicom/errors.hpp"

namespace equicom::routing {

bool directive_valid(const RoutingDirective& directive) {
    switch (directive.mechanism) {
        case Mechanism::Private:
        case Mechanism::Balance:
            return !directive.tag.empty();
        case Mechanism::Broadcast:
            return directive.tag.empty();
        case Mechanism::GroupBroadcast:
            return true;
    }
    return false;
}

bool match_tag(std::string_view subscription, std::string_view message_tag) {
    return message_tag.substr(0, subscription.size()) == subscription;
}

NodeId next_balance_index(const std::vector<NodeId>& members, std::uint64_t counter) {
    if (members.empty()) {
        throw Error(Errc::EmptyMembers, "balance selection over an empty member list");
    }
    return members[counter % members.size()];
}

namespace {

// Ascending by construction: `subs` iterates in key order.
std::vector<NodeId> group_members(const SubscriptionTable& subs, const std::string& tag) {
    std::vector<NodeId> members;
    for (const auto& [node, tags] : subs) {
        for (const auto& s : tags) {
            if (match_tag(s, tag)) {
                members.push_back(node);
                break;
            }
        }
    }
    return members;
}

}  // namespace

RouteResult resolve_recipients(const std::vector<RoutingDirective>& directives,
                               const PortMappingTable& table,
                               const SubscriptionTable& subs,
                               RoundRobinState& rr,
                               NodeId sender) {
    if (directives.empty()) {
        throw Error(Errc::InvalidArgument, "routing directive list is empty");
    }
    RouteResult res;
    std::vector<RouteEntry> raw;
    for (const auto& d : directives) {
        if (!directive_valid(d)) {
            throw Error(Errc::InvalidArgument,
                        std::string("invalid directive: ") + std::string(mechanism_name(d.mechanism)) +
                            " with tag \"" + d.tag + "\"");
        }
        std::vector<NodeId> matched;
        switch (d.mechanism) {
            case Mechanism::Private: {
                for (const auto& [node, tags] : subs) {
                    if (tags.count(d.tag)) matched.push_back(node);
                }
                if (matched.size() > 1) {
                    ++res.private_tag_conflicts;
                    matched.resize(1);  // lowest id wins; subs iterates ascending
                }
                break;
            }
            case Mechanism::Broadcast: {
                for (const auto& [node, rec] : table) matched.push_back(node);
                break;
            }
            case Mechanism::GroupBroadcast: {
                matched = group_members(subs, d.tag);
                break;
            }
            case Mechanism::Balance: {
                auto members = group_members(subs, d.tag);
                if (!members.empty()) {
                    auto& counter = rr.counters[d.tag];
                    matched.push_back(next_balance_index(members, counter));
                    ++counter;
                }
                break;
            }
        }
        if (matched.empty()) {
            ++res.no_recipient_directives;
            continue;
        }
        for (NodeId node : matched) raw.push_back(RouteEntry{node, d.mechanism, d.tag});
    }

    std::set<NodeId> seen;
    for (auto& entry : raw) {
        if (entry.node == sender) continue;
        if (!seen.insert(entry.node).second) {
            ++res.dedup_suppressed;
            continue;
        }
        res.recipients.push_back(std::move(entry));
    }
    std::sort(res.recipients.begin(), res.recipients.end(),
              [](const RouteEntry& a, const RouteEntry& b) { return a.node < b.node; });
    return res;
}

void apply_subscription_update(SubscriptionTable& subs, NodeId node, SubOp op,
                               const std::string& tag) {
    if (op == SubOp::Add) {
        subs[node].insert(tag);
    } else {
        auto it = subs.find(node);
        if (it != subs.end()) it->second.erase(tag);
    }
}

SubscriptionTable subscription_view(const PortMappingTable& table) {
    SubscriptionTable subs;
    for (const auto& [id, rec] : table) subs.emplace(id, rec.subscriptions);
    return subs;
}

}  // namespace equicom::routing
