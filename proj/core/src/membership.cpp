#include "equicom/membership.hpp"

#include "equicom/errors.hpp"

namespace equicom::membership {
namespace {

wire::HelloBody hello_body(const PeerRecord& local) {
    wire::HelloBody body;
    body.node_id = local.id;
    body.listen_addr = local.addr;
    body.subscriptions.assign(local.subscriptions.begin(), local.subscriptions.end());
    return body;
}

}  // namespace

bool membership_config_valid(const MembershipConfig& cfg) {
    return cfg.ping_interval_ms > 0 &&
           cfg.failure_timeout_ms >= 2 * static_cast<std::uint64_t>(cfg.ping_interval_ms) &&
           cfg.gossip_interval_ms > 0;
}

wire::Frame make_hello(const PeerRecord& local) { return wire::Frame::hello(hello_body(local)); }

wire::Frame make_hello_ack(const PeerRecord& local) {
    return wire::Frame::hello_ack(hello_body(local));
}

wire::Frame make_peers(const PortMappingTable& table, const PeerRecord& local) {
    wire::PeersBody body;
    body.entries.reserve(table.size() + 1);
    auto push = [&body](const PeerRecord& rec) {
        wire::PeerEntry entry;
        entry.node_id = rec.id;
        entry.addr = rec.addr;
        entry.subscriptions.assign(rec.subscriptions.begin(), rec.subscriptions.end());
        body.entries.push_back(std::move(entry));
    };
    push(local);
    for (const auto& [id, rec] : table) push(rec);
    return wire::Frame::peers(std::move(body));
}

HandshakeResult handshake(const PeerRecord& local, const PortMappingTable& table,
                          const wire::HelloBody& remote_hello, std::uint64_t now_ms) {
    if (remote_hello.node_id == local.id) {
        throw Error(Errc::DuplicateNodeId,
                    "remote claims the local id " + std::to_string(local.id));
    }
    if (auto it = table.find(remote_hello.node_id);
        it != table.end() && it->second.addr != remote_hello.listen_addr) {
        throw Error(Errc::DuplicateNodeId,
                    "id " + std::to_string(remote_hello.node_id) + " already known at " +
                        it->second.addr + ", now claimed by " + remote_hello.listen_addr);
    }
    HandshakeResult res;
    res.remote.id = remote_hello.node_id;
    res.remote.addr = remote_hello.listen_addr;
    res.remote.subscriptions.insert(remote_hello.subscriptions.begin(),
                                    remote_hello.subscriptions.end());
    res.remote.last_seen_ms = now_ms;
    res.ack = make_hello_ack(local);
    return res;
}

GossipDelta gossip_merge(PortMappingTable& table, const wire::PeersBody& peers, NodeId self,
                         std::uint64_t now_ms) {
    GossipDelta delta;
    for (const auto& entry : peers.entries) {
        if (entry.node_id == self) continue;  // self-filter, not a malformed entry
        if (entry.node_id == 0 || entry.addr.empty()) {
            ++delta.skipped;
            continue;
        }
        auto it = table.find(entry.node_id);
        if (it == table.end()) {
            PeerRecord rec;
            rec.id = entry.node_id;
            rec.addr = entry.addr;
            rec.subscriptions.insert(entry.subscriptions.begin(), entry.subscriptions.end());
            rec.last_seen_ms = now_ms;
            table.emplace(entry.node_id, std::move(rec));
            delta.dial.push_back(entry.addr);
            delta.changed = true;
            continue;
        }
        std::set<std::string> subs(entry.subscriptions.begin(), entry.subscriptions.end());
        if (it->second.addr != entry.addr || it->second.subscriptions != subs) {
            it->second.addr = entry.addr;
            it->second.subscriptions = std::move(subs);
            delta.changed = true;
        }
    }
    return delta;
}

std::vector<NodeId> detect_failures(const PortMappingTable& table, std::uint64_t now_ms,
                                    const MembershipConfig& cfg) {
    std::vector<NodeId> out;
    for (const auto& [id, rec] : table) {
        if (now_ms - rec.last_seen_ms > cfg.failure_timeout_ms && now_ms > rec.last_seen_ms) {
            out.push_back(id);
        }
    }
    return out;
}

}  // namespace equicom::membership
