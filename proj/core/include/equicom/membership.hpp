#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "equicom/peers.hpp"
#include "equicom/types.hpp"
#include "equicom/wire.hpp"

namespace equicom::membership {

struct MembershipConfig {
    std::uint32_t gossip_interval_ms = 200;
    std::uint32_t ping_interval_ms = 500;
    std::uint32_t failure_timeout_ms = 2000;
};

// Requires failure_timeout_ms >= 2 * ping_interval_ms > 0.
bool membership_config_valid(const MembershipConfig& cfg);

// HELLO / HELLO_ACK / PEERS builders from local state. PEERS carries the full
// table plus the sender itself, so one frame is enough to teach a newcomer
// the whole overlay.
wire::Frame make_hello(const PeerRecord& local);
wire::Frame make_hello_ack(const PeerRecord& local);
wire::Frame make_peers(const PortMappingTable& table, const PeerRecord& local);

struct HandshakeResult {
    PeerRecord remote;
    wire::Frame ack;
};

// Accepts a remote HELLO (or HELLO_ACK treated symmetrically) and produces
// the peer's record plus the HELLO_ACK to send back. Throws
// Error{DuplicateNodeId} when the remote claims the local id, or an id the
// table already holds at a different address; the caller drops the
// connection.
HandshakeResult handshake(const PeerRecord& local, const PortMappingTable& table,
                          const wire::HelloBody& remote_hello, std::uint64_t now_ms);

struct GossipDelta {
    std::vector<std::string> dial;  // addresses of previously unknown ids
    std::uint64_t skipped = 0;      // malformed entries ignored
    bool changed = false;           // any insert or record replacement
};

// Merges a PEERS frame into the table. New ids are inserted with
// last_seen = now and queued for dialing; known ids are replaced only when
// addr or subscriptions differ, keeping the stored last_seen (gossip is
// hearsay, not liveness). Entries for `self`, id 0, or an empty addr are
// skipped.
GossipDelta gossip_merge(PortMappingTable& table, const wire::PeersBody& peers, NodeId self,
                         std::uint64_t now_ms);

// Ids whose silence exceeds the failure timeout; the caller evicts them.
std::vector<NodeId> detect_failures(const PortMappingTable& table, std::uint64_t now_ms,
                                    const MembershipConfig& cfg);

}  // namespace equicom::membership
