#include "equicom/communicator.hpp"

#include <algorithm>

#include "equicom/errors.hpp"
#include "equicom/log.hpp"

namespace equicom {
namespace {

// Reassembly buffers may hold parsed-but-parked frames under backpressure;
// past this, tcp reader threads stop pulling from the socket.
constexpr std::size_t kRbufHighWater = 1 << 20;

void validate_tag(const std::string& tag) {
    if (tag.size() > wire::kMaxStringLen) {
        throw Error(Errc::OversizeField, "tag of " + std::to_string(tag.size()) +
                                             " bytes exceeds 65535");
    }
    if (!wire::utf8_valid(tag)) {
        throw Error(Errc::InvalidArgument, "tag is not valid UTF-8");
    }
}

}  // namespace

std::shared_ptr<Communicator> Communicator::create(CommunicatorConfig cfg,
                                                   transport::Transport& net) {
    if (cfg.node_id == 0) {
        throw Error(Errc::InvalidConfig, "node_id must be nonzero");
    }
    if (cfg.inbox_capacity < 1) {
        throw Error(Errc::InvalidConfig, "inbox_capacity must be at least 1");
    }
    if (!membership::membership_config_valid(cfg.membership)) {
        throw Error(Errc::InvalidConfig,
                    "membership intervals must satisfy failure_timeout >= 2*ping_interval > 0");
    }
    try {
        transport::parse_address(cfg.listen);
    } catch (const Error& e) {
        throw Error(Errc::InvalidConfig, e.what());
    }

    auto comm = std::shared_ptr<Communicator>(new Communicator(std::move(cfg), net));
    comm->start();
    return comm;
}

Communicator::Communicator(CommunicatorConfig cfg, transport::Transport& net)
    : cfg_(std::move(cfg)),
      net_(net),
      blocking_links_(transport::parse_address(cfg_.listen).scheme == "tcp") {}

Communicator::~Communicator() { shutdown(); }

void Communicator::start() {
    std::lock_guard<std::mutex> lock(mu_);
    listener_ = net_.listen(cfg_.listen);  // the single bind of this communicator's lifetime
    listen_addr_ = listener_->address();

    std::weak_ptr<Communicator> weak = weak_from_this();
    listener_->set_on_accept([weak](std::shared_ptr<transport::Connection> conn) {
        auto self = weak.lock();
        if (!self) {
            conn->close();
            return;
        }
        std::lock_guard<std::mutex> lk(self->mu_);
        if (!self->running_) {
            conn->close();
            return;
        }
        auto link = std::make_shared<Link>();
        link->conn = std::move(conn);
        self->attach_link_locked(link);
    });

    for (const auto& addr : cfg_.bootstrap) dial_peer_locked(addr);

    auto self_weak = weak_from_this();
    gossip_timer_ = net_.schedule(cfg_.membership.gossip_interval_ms, [self_weak]() {
        if (auto self = self_weak.lock()) self->on_gossip_tick();
    });
    ping_timer_ = net_.schedule(cfg_.membership.ping_interval_ms, [self_weak]() {
        if (auto self = self_weak.lock()) self->on_ping_tick();
    });
}

PeerRecord Communicator::local_record_locked() const {
    PeerRecord rec;
    rec.id = cfg_.node_id;
    rec.addr = listen_addr_;
    rec.subscriptions = my_subs_;
    rec.last_seen_ms = net_.now_ms();
    return rec;
}

void Communicator::attach_link_locked(const LinkPtr& link) {
    links_.push_back(link);
    std::weak_ptr<Communicator> weak = weak_from_this();
    link->conn->set_receiver(
        [weak, link](std::span<const std::uint8_t> bytes) {
            if (auto self = weak.lock()) self->on_bytes(link, bytes);
        },
        [weak, link]() {
            if (auto self = weak.lock()) self->on_link_closed(link);
        });
}

void Communicator::dial_peer_locked(const std::string& addr) {
    if (addr == listen_addr_ || addr == cfg_.listen) return;  // never dial self
    for (const auto& link : links_) {
        if (link->closing) continue;
        if (link->dial_addr == addr || link->peer_listen_addr == addr) return;
    }
    std::shared_ptr<transport::Connection> conn;
    try {
        conn = net_.dial(addr);
    } catch (const Error& e) {
        log::debug("node ", cfg_.node_id, ": dial ", addr, " failed: ", e.what());
        return;  // retried on the next gossip tick while the table still names it
    }
    auto link = std::make_shared<Link>();
    link->conn = std::move(conn);
    link->dialed = true;
    link->dial_addr = addr;
    attach_link_locked(link);
    send_frame_locked(link, membership::make_hello(local_record_locked()));
}

void Communicator::on_bytes(const LinkPtr& link, std::span<const std::uint8_t> bytes) {
    std::unique_lock<std::mutex> lock(mu_);
    if (!running_ || link->closing) return;
    link->rbuf.insert(link->rbuf.end(), bytes.begin(), bytes.end());
    drain_link_locked(link);
    if (blocking_links_) {
        // Hold the reader thread here instead of letting the buffer grow:
        // this is what propagates inbox backpressure onto the socket.
        while (running_ && !link->closing && inbox_full_locked() &&
               link->rbuf.size() >= kRbufHighWater) {
            space_cv_.wait(lock);
            if (running_ && !link->closing) drain_link_locked(link);
        }
    }
}

void Communicator::on_link_closed(const LinkPtr& link) {
    std::lock_guard<std::mutex> lock(mu_);
    if (!running_) return;
    const NodeId id = link->peer_id;
    drop_link_locked(link);
    // No eviction here: a silent drop is the failure detector's business,
    // and a BYE already evicted before the close landed. But if the dead
    // link was the canonical one and a spare survives, promote it so the
    // peer stays reachable without waiting for a re-dial.
    if (id != 0 && peer_links_.find(id) == peer_links_.end()) {
        for (const auto& other : links_) {
            if (other->peer_id == id && other->handshake_done && !other->closing) {
                peer_links_[id] = other;
                flush_pending_locked(id);
                break;
            }
        }
    }
}

void Communicator::drop_link_locked(const LinkPtr& link) {
    link->closing = true;
    links_.erase(std::remove(links_.begin(), links_.end(), link), links_.end());
    if (link->handshake_done) {
        auto it = peer_links_.find(link->peer_id);
        if (it != peer_links_.end() && it->second == link) peer_links_.erase(it);
    }
}

void Communicator::drain_link_locked(const LinkPtr& link) {
    std::size_t consumed = 0;
    while (!link->closing) {
        if (inbox_full_locked()) break;  // stop draining this link entirely
        auto res = wire::decode_frame(
            std::span<const std::uint8_t>(link->rbuf.data() + consumed,
                                          link->rbuf.size() - consumed));
        if (res.status == wire::DecodeStatus::Truncated) break;
        if (!res.ok()) {
            log::warn("node ", cfg_.node_id, ": dropping link after ",
                      wire::decode_status_name(res.status));
            auto conn = link->conn;
            drop_link_locked(link);
            conn->close();
            break;
        }
        consumed += res.consumed;
        handle_frame_locked(link, std::move(res.frame));
    }
    if (consumed > 0) {
        link->rbuf.erase(link->rbuf.begin(),
                         link->rbuf.begin() + static_cast<std::ptrdiff_t>(consumed));
    }
}

void Communicator::handle_frame_locked(const LinkPtr& link, wire::Frame frame) {
    // Any frame on a handshaked link is a sign of life.
    if (link->handshake_done) {
        auto it = table_.find(link->peer_id);
        if (it != table_.end()) {
            it->second.last_seen_ms = std::max(it->second.last_seen_ms, net_.now_ms());
        }
    }

    if (!link->handshake_done) {
        const bool expected = (!link->dialed && frame.kind == wire::FrameKind::Hello) ||
                              (link->dialed && frame.kind == wire::FrameKind::HelloAck);
        if (!expected) {
            log::warn("node ", cfg_.node_id, ": unexpected ", wire::frame_kind_name(frame.kind),
                      " before handshake");
            auto conn = link->conn;
            drop_link_locked(link);
            conn->close();
            return;
        }
        const auto& hello = std::get<wire::HelloBody>(frame.body);
        membership::HandshakeResult hs;
        try {
            hs = membership::handshake(local_record_locked(), table_, hello, net_.now_ms());
        } catch (const Error& e) {
            log::warn("node ", cfg_.node_id, ": handshake rejected: ", e.what());
            auto conn = link->conn;
            drop_link_locked(link);
            conn->close();
            return;
        }
        register_peer_locked(link, std::move(hs.remote), !link->dialed);
        return;
    }

    switch (frame.kind) {
        case wire::FrameKind::Peers: {
            auto delta = membership::gossip_merge(table_, std::get<wire::PeersBody>(frame.body),
                                                  cfg_.node_id, net_.now_ms());
            if (delta.changed) subs_dirty_ = true;
            for (const auto& addr : delta.dial) dial_peer_locked(addr);
            break;
        }
        case wire::FrameKind::Sub: {
            const auto& sub = std::get<wire::SubBody>(frame.body);
            auto it = table_.find(sub.node_id);
            if (it != table_.end()) {
                if (sub.op == SubOp::Add) {
                    it->second.subscriptions.insert(sub.tag);
                } else {
                    it->second.subscriptions.erase(sub.tag);
                }
                subs_dirty_ = true;
            }
            break;
        }
        case wire::FrameKind::Data: {
            auto& data = std::get<wire::DataBody>(frame.body);
            auto it = last_delivered_seq_.find(data.sender);
            const bool fresh = (it == last_delivered_seq_.end() || data.seq > it->second);
            log::debug("node ", cfg_.node_id, ": DATA seq ", data.seq, " from ", data.sender,
                       (fresh ? " delivered" : " suppressed as duplicate"));
            if (!fresh) break;  // duplicate or stale: at-most-once gate
            last_delivered_seq_[data.sender] = data.seq;
            Delivery d;
            d.sender = data.sender;
            d.mechanism = data.mechanism;
            d.tag = std::move(data.tag);
            d.payload = std::move(data.payload);
            d.seq = data.seq;
            inbox_.push_back(std::move(d));
            inbox_cv_.notify_one();
            break;
        }
        case wire::FrameKind::Ping:
            send_frame_locked(link, wire::Frame::pong(std::get<wire::PingBody>(frame.body).nonce));
            break;
        case wire::FrameKind::Pong:
            break;  // last_seen already refreshed above
        case wire::FrameKind::Bye: {
            NodeId id = link->peer_id;
            auto conn = link->conn;
            drop_link_locked(link);
            evict_peer_locked(id);
            conn->close();
            break;
        }
        case wire::FrameKind::Hello:
        case wire::FrameKind::HelloAck:
            // Repeated handshake on an established link: refresh the record.
            {
                const auto& hello = std::get<wire::HelloBody>(frame.body);
                auto it = table_.find(hello.node_id);
                if (it != table_.end()) {
                    it->second.subscriptions.insert(hello.subscriptions.begin(),
                                                    hello.subscriptions.end());
                    subs_dirty_ = true;
                }
            }
            break;
    }
}

void Communicator::register_peer_locked(const LinkPtr& link, PeerRecord remote, bool send_ack) {
    link->peer_id = remote.id;
    link->peer_listen_addr = remote.addr;
    link->handshake_done = true;

    auto it = table_.find(remote.id);
    if (it == table_.end()) {
        table_.emplace(remote.id, std::move(remote));
    } else {
        it->second.addr = remote.addr;
        it->second.subscriptions = std::move(remote.subscriptions);
        it->second.last_seen_ms = std::max(it->second.last_seen_ms, remote.last_seen_ms);
    }
    subs_dirty_ = true;

    // Crossing dials make duplicate links inevitable. The first link to
    // complete its handshake stays canonical for as long as it lives; the
    // extra one is kept as an idle spare that only drains reads. Closing
    // duplicates eagerly is tempting but loses frames: while the close is
    // still propagating, the other end may be writing DATA into the very
    // connection this end just condemned.
    auto existing_it = peer_links_.find(link->peer_id);
    if (existing_it == peer_links_.end()) {
        peer_links_[link->peer_id] = link;
    } else if (existing_it->second != link) {
        log::debug("node ", cfg_.node_id, ": duplicate link to ", link->peer_id,
                   ", keeping it as a spare");
    }

    // Even a spare owes the dialer its ACK, or that end would wait on the
    // handshake forever and never consider the address connected.
    if (send_ack) send_frame_locked(link, membership::make_hello_ack(local_record_locked()));
    flush_pending_locked(link->peer_id);
    // Teach the newcomer the whole overlay at once, and tell everyone else
    // about the newcomer — convergence then rides on handshakes, with the
    // periodic gossip as the safety net.
    broadcast_frame_locked(membership::make_peers(table_, local_record_locked()));
}

void Communicator::evict_peer_locked(NodeId id) {
    if (table_.erase(id) == 0) return;
    ++diag_.evicted_peers;
    subs_dirty_ = true;
    pending_data_.erase(id);  // fire-and-forget: the peer took its mail with it
    std::vector<LinkPtr> doomed;  // canonical and spares alike
    for (const auto& link : links_) {
        if (link->peer_id == id) doomed.push_back(link);
    }
    for (const auto& link : doomed) {
        auto conn = link->conn;
        drop_link_locked(link);
        conn->close();
    }
}

void Communicator::send_frame_locked(const LinkPtr& link, const wire::Frame& frame) {
    try {
        auto bytes = wire::encode_frame(frame);
        link->conn->send(std::span<const std::uint8_t>(bytes.data(), bytes.size()));
        ++diag_.sent_frames;
    } catch (const Error& e) {
        log::debug("node ", cfg_.node_id, ": send ", wire::frame_kind_name(frame.kind),
                   " failed: ", e.what());
    }
}

void Communicator::broadcast_frame_locked(const wire::Frame& frame) {
    for (auto& [id, link] : peer_links_) send_frame_locked(link, frame);
}

void Communicator::broadcast_sub_locked(const wire::Frame& frame) {
    broadcast_frame_locked(frame);
    // A dialed link still mid-handshake already carries our HELLO, so the
    // stream's FIFO order lets a SUB follow it safely. Without this, a
    // subscription placed right after create() misses every in-flight
    // bootstrap link and spreads only via periodic gossip.
    for (const auto& link : links_) {
        if (link->dialed && !link->handshake_done && !link->closing) {
            send_frame_locked(link, frame);
        }
    }
}

void Communicator::flush_pending_locked(NodeId id) {
    auto pending = pending_data_.find(id);
    if (pending == pending_data_.end()) return;
    auto canon = peer_links_.find(id);
    if (canon == peer_links_.end()) return;
    for (const auto& frame : pending->second) send_frame_locked(canon->second, frame);
    pending_data_.erase(pending);
}

void Communicator::on_gossip_tick() {
    std::lock_guard<std::mutex> lock(mu_);
    if (!running_) return;
    if (!peer_links_.empty()) {
        broadcast_frame_locked(membership::make_peers(table_, local_record_locked()));
    }
    // Re-dial table entries that lost their link (transient drops heal
    // here), and bootstrap addresses that never connected.
    for (const auto& [id, rec] : table_) {
        if (peer_links_.find(id) == peer_links_.end()) dial_peer_locked(rec.addr);
    }
    for (const auto& addr : cfg_.bootstrap) dial_peer_locked(addr);
    std::weak_ptr<Communicator> weak = weak_from_this();
    gossip_timer_ = net_.schedule(cfg_.membership.gossip_interval_ms, [weak]() {
        if (auto self = weak.lock()) self->on_gossip_tick();
    });
}

void Communicator::on_ping_tick() {
    std::lock_guard<std::mutex> lock(mu_);
    if (!running_) return;
    for (auto& [id, link] : peer_links_) {
        send_frame_locked(link, wire::Frame::ping(next_nonce_++));
    }
    for (NodeId id : membership::detect_failures(table_, net_.now_ms(), cfg_.membership)) {
        log::info("node ", cfg_.node_id, ": peer ", id, " timed out");
        evict_peer_locked(id);
    }
    std::weak_ptr<Communicator> weak = weak_from_this();
    ping_timer_ = net_.schedule(cfg_.membership.ping_interval_ms, [weak]() {
        if (auto self = weak.lock()) self->on_ping_tick();
    });
}

void Communicator::subscribe(const std::string& tag) {
    validate_tag(tag);
    std::lock_guard<std::mutex> lock(mu_);
    if (!running_) throw Error(Errc::ShutDown, "subscribe after shutdown");
    if (!my_subs_.insert(tag).second) return;  // idempotent
    broadcast_sub_locked(
        wire::Frame::sub(wire::SubBody{cfg_.node_id, SubOp::Add, tag}));
}

void Communicator::unsubscribe(const std::string& tag) {
    validate_tag(tag);
    std::lock_guard<std::mutex> lock(mu_);
    if (!running_) throw Error(Errc::ShutDown, "unsubscribe after shutdown");
    if (my_subs_.erase(tag) == 0) return;  // idempotent
    broadcast_sub_locked(
        wire::Frame::sub(wire::SubBody{cfg_.node_id, SubOp::Remove, tag}));
}

SendReceipt Communicator::send(const Message& msg) {
    if (msg.directives.empty()) {
        throw Error(Errc::InvalidArgument, "message carries no routing directives");
    }
    for (const auto& d : msg.directives) {
        if (!routing::directive_valid(d)) {
            throw Error(Errc::InvalidArgument,
                        std::string("invalid directive: ") +
                            std::string(mechanism_name(d.mechanism)) + " with tag \"" + d.tag +
                            "\"");
        }
        validate_tag(d.tag);
    }
    if (msg.payload.size() > wire::kMaxPayloadLen) {
        throw Error(Errc::OversizeField, "payload exceeds 2^32-1 bytes");
    }

    std::lock_guard<std::mutex> lock(mu_);
    if (!running_) throw Error(Errc::ShutDown, "send after shutdown");

    if (subs_dirty_) {
        subs_view_ = routing::subscription_view(table_);
        subs_dirty_ = false;
    }
    const std::uint64_t seq = next_seq_++;
    auto route = routing::resolve_recipients(msg.directives, table_, subs_view_, rr_,
                                             cfg_.node_id);
    diag_.dropped_no_recipient += route.no_recipient_directives;
    diag_.private_tag_conflicts += route.private_tag_conflicts;
    diag_.dedup_suppressed += route.dedup_suppressed;

    for (const auto& entry : route.recipients) {
        wire::DataBody body;
        body.sender = cfg_.node_id;
        body.seq = seq;
        body.mechanism = entry.mechanism;
        body.tag = entry.tag;
        body.payload = msg.payload;
        auto frame = wire::Frame::data(std::move(body));
        auto it = peer_links_.find(entry.node);
        if (it != peer_links_.end()) {
            log::debug("node ", cfg_.node_id, ": DATA seq ", seq, " -> ", entry.node,
                       " on ", (it->second->dialed ? "dialed" : "accepted"), " link");
            send_frame_locked(it->second, frame);
            continue;
        }
        // The table knows this peer but the link is still handshaking (or
        // being re-dialed after a drop). Park the frame; it goes out in seq
        // order when the link settles, or dies with the peer on eviction.
        log::debug("node ", cfg_.node_id, ": no link to recipient ", entry.node,
                   " yet; frame parked");
        pending_data_[entry.node].push_back(std::move(frame));
        auto rec = table_.find(entry.node);
        if (rec != table_.end()) dial_peer_locked(rec->second.addr);
    }

    SendReceipt receipt;
    receipt.recipients = route.recipients.size();
    receipt.no_recipient_directives = route.no_recipient_directives;
    receipt.private_tag_conflicts = route.private_tag_conflicts;
    receipt.dedup_suppressed = route.dedup_suppressed;
    return receipt;
}

std::optional<Delivery> Communicator::recv() {
    std::unique_lock<std::mutex> lock(mu_);
    inbox_cv_.wait(lock, [this]() { return !inbox_.empty() || !running_; });
    if (inbox_.empty()) return std::nullopt;  // shut down and drained
    Delivery d = std::move(inbox_.front());
    inbox_.pop_front();
    resume_paused_locked();
    return d;
}

std::optional<Delivery> Communicator::try_recv() {
    std::lock_guard<std::mutex> lock(mu_);
    if (inbox_.empty()) return std::nullopt;
    Delivery d = std::move(inbox_.front());
    inbox_.pop_front();
    resume_paused_locked();
    return d;
}

void Communicator::resume_paused_locked() {
    if (running_) {
        auto snapshot = links_;  // drain may drop links, invalidating links_
        for (auto& link : snapshot) {
            if (!link->closing && !link->rbuf.empty()) drain_link_locked(link);
        }
    }
    space_cv_.notify_all();
}

PortMappingTable Communicator::peers() const {
    std::lock_guard<std::mutex> lock(mu_);
    return table_;
}

Diagnostics Communicator::diagnostics() const {
    std::lock_guard<std::mutex> lock(mu_);
    return diag_;
}

void Communicator::shutdown() {
    std::vector<LinkPtr> links;
    std::shared_ptr<transport::Listener> listener;
    std::uint64_t gossip_timer = 0;
    std::uint64_t ping_timer = 0;
    {
        std::lock_guard<std::mutex> lock(mu_);
        if (!running_) return;
        running_ = false;
        auto bye = wire::encode_frame(wire::Frame::bye());
        for (auto& [id, link] : peer_links_) {
            try {
                link->conn->send(std::span<const std::uint8_t>(bye.data(), bye.size()));
            } catch (const Error&) {
            }
        }
        for (auto& link : links_) link->closing = true;
        links.swap(links_);
        peer_links_.clear();
        pending_data_.clear();
        listener = std::move(listener_);
        gossip_timer = gossip_timer_;
        ping_timer = ping_timer_;
        inbox_cv_.notify_all();
        space_cv_.notify_all();
    }
    // Everything that can block or call back runs outside the lock.
    net_.cancel(gossip_timer);
    net_.cancel(ping_timer);
    if (listener) listener->close();
    for (auto& link : links) {
        link->closing = true;
        link->conn->close();
    }
}

}  // namespace equicom
