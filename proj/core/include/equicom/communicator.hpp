#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "equicom/membership.hpp"
#include "equicom/peers.hpp"
#include "equicom/routing.hpp"
#include "equicom/transport.hpp"
#include "equicom/types.hpp"
#include "equicom/wire.hpp"

namespace equicom {

struct CommunicatorConfig {
    NodeId node_id = 0;
    std::string listen;                     // "sim:a" or "tcp:host:port" (port 0 = ephemeral)
    std::vector<std::string> bootstrap;     // addresses dialed at startup
    membership::MembershipConfig membership;
    std::size_t inbox_capacity = 1024;
};

struct Message {
    std::vector<std::uint8_t> payload;
    std::vector<routing::RoutingDirective> directives;

    static Message text(std::string_view s, std::vector<routing::RoutingDirective> directives) {
        return Message{{s.begin(), s.end()}, std::move(directives)};
    }
};

// What a receiver sees: the single matched (mechanism, tag), never the
// sender's full directive list.
struct Delivery {
    NodeId sender = 0;
    Mechanism mechanism = Mechanism::Broadcast;
    std::string tag;
    std::vector<std::uint8_t> payload;
    std::uint64_t seq = 0;

    std::string text() const { return std::string(payload.begin(), payload.end()); }
};

struct SendReceipt {
    std::size_t recipients = 0;
    std::uint64_t no_recipient_directives = 0;
    std::uint64_t private_tag_conflicts = 0;
    std::uint64_t dedup_suppressed = 0;
};

struct Diagnostics {
    std::uint64_t sent_frames = 0;
    std::uint64_t dropped_no_recipient = 0;
    std::uint64_t private_tag_conflicts = 0;
    std::uint64_t dedup_suppressed = 0;
    std::uint64_t evicted_peers = 0;
};

// The one messaging object a program owns: binds exactly one endpoint for
// its whole lifetime, gossips the overlay together with its peers, and runs
// every delivery mechanism through the one send() below.
//
// Thread model: every public method and every transport callback funnels
// through one internal mutex, so all state mutation is serialized. Over the
// simulated transport the communicator spawns no threads at all — callbacks
// arrive from SimNet::step() on the caller's thread.
class Communicator : public std::enable_shared_from_this<Communicator> {
public:
    // Binds cfg.listen, starts the gossip/liveness timers, and begins
    // dialing the bootstrap addresses; handshakes complete asynchronously.
    // Throws Error{InvalidConfig} / Error{AddressInUse}.
    static std::shared_ptr<Communicator> create(CommunicatorConfig cfg,
                                                transport::Transport& net);

    ~Communicator();

    Communicator(const Communicator&) = delete;
    Communicator& operator=(const Communicator&) = delete;

    NodeId id() const { return cfg_.node_id; }

    // Actual bound address ("tcp:...:0" resolved to the real port).
    std::string listen_address() const { return listen_addr_; }

    // Idempotent; fans a SUB frame out to all connected peers.
    // Throws Error{ShutDown} after shutdown, Error{OversizeField} on a tag
    // over 65535 bytes.
    void subscribe(const std::string& tag);
    void unsubscribe(const std::string& tag);

    // Resolves recipients against the current table and emits one DATA frame
    // per recipient. Fire-and-forget: the receipt reports local routing
    // facts, not remote acknowledgement.
    // Throws Error{ShutDown}, Error{InvalidArgument} (bad directive list),
    // Error{OversizeField} (payload or tag too large, checked before the
    // sequence number is consumed).
    SendReceipt send(const Message& msg);

    // Blocks until a delivery or shutdown; nullopt means shut down and
    // drained. try_recv never blocks.
    std::optional<Delivery> recv();
    std::optional<Delivery> try_recv();

    PortMappingTable peers() const;
    Diagnostics diagnostics() const;

    // Sends BYE to every peer, closes the endpoint and all links, cancels
    // timers, and unblocks pending recv() calls. Idempotent.
    void shutdown();

private:
    struct Link {
        std::shared_ptr<transport::Connection> conn;
        NodeId peer_id = 0;              // 0 until the handshake completes
        std::string peer_listen_addr;    // known after handshake (or = dial_addr)
        std::string dial_addr;           // non-empty iff we dialed this link
        std::vector<std::uint8_t> rbuf;  // frame reassembly buffer
        bool dialed = false;
        bool handshake_done = false;
        bool closing = false;            // canonical-duplicate or local close; no eviction
    };
    using LinkPtr = std::shared_ptr<Link>;

    Communicator(CommunicatorConfig cfg, transport::Transport& net);
    void start();

    PeerRecord local_record_locked() const;
    void attach_link_locked(const LinkPtr& link);
    void dial_peer_locked(const std::string& addr);
    void on_bytes(const LinkPtr& link, std::span<const std::uint8_t> bytes);
    void on_link_closed(const LinkPtr& link);
    void drain_link_locked(const LinkPtr& link);
    void handle_frame_locked(const LinkPtr& link, wire::Frame frame);
    void register_peer_locked(const LinkPtr& link, PeerRecord remote, bool send_ack);
    void evict_peer_locked(NodeId id);
    void drop_link_locked(const LinkPtr& link);
    void send_frame_locked(const LinkPtr& link, const wire::Frame& frame);
    void broadcast_frame_locked(const wire::Frame& frame);
    void broadcast_sub_locked(const wire::Frame& frame);
    void flush_pending_locked(NodeId id);
    void on_gossip_tick();
    void on_ping_tick();
    void resume_paused_locked();
    bool inbox_full_locked() const { return inbox_.size() >= cfg_.inbox_capacity; }

    CommunicatorConfig cfg_;
    transport::Transport& net_;
    const bool blocking_links_;  // tcp: reader threads park on a cv when the inbox is full
    std::string listen_addr_;

    mutable std::mutex mu_;
    std::condition_variable inbox_cv_;
    std::condition_variable space_cv_;
    bool running_ = true;

    std::shared_ptr<transport::Listener> listener_;
    std::vector<LinkPtr> links_;
    std::map<NodeId, LinkPtr> peer_links_;   // canonical link per handshaked peer
    PortMappingTable table_;
    std::set<std::string> my_subs_;
    routing::RoundRobinState rr_;
    mutable routing::SubscriptionTable subs_view_;
    mutable bool subs_dirty_ = true;
    std::map<NodeId, std::uint64_t> last_delivered_seq_;
    // DATA frames addressed to a table-known peer whose link is still mid-
    // handshake wait here; flushed in order the moment the link settles, and
    // discarded if the peer is evicted first.
    std::map<NodeId, std::vector<wire::Frame>> pending_data_;
    std::deque<Delivery> inbox_;
    std::uint64_t next_seq_ = 0;
    std::uint64_t next_nonce_ = 1;
    std::uint64_t gossip_timer_ = 0;
    std::uint64_t ping_timer_ = 0;
    Diagnostics diag_;
};

}  // namespace equicom
