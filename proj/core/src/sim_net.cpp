#include "equicom/sim_net.hpp"

#include <algorithm>

#include "equicom/errors.hpp"

namespace equicom::transport {

Address parse_address(const std::string& text) {
    auto pos = text.find(':');
    if (pos == std::string::npos) {
        throw Error(Errc::UnsupportedScheme, "address \"" + text + "\" has no scheme prefix");
    }
    Address addr{text.substr(0, pos), text.substr(pos + 1)};
    if (addr.scheme != "sim" && addr.scheme != "tcp") {
        throw Error(Errc::UnsupportedScheme, "unknown scheme \"" + addr.scheme + "\"");
    }
    if (addr.locator.empty()) {
        throw Error(Errc::InvalidArgument, "address \"" + text + "\" has an empty locator");
    }
    return addr;
}

// In-sim duplex stream. last_arrival_ clamps the arrival times of everything
// this side sends, so one direction can never reorder; it starts at the
// accept event's time, so no byte outruns the accept.
class SimConnection : public Connection, public std::enable_shared_from_this<SimConnection> {
public:
    SimConnection(SimNet* net, std::string peer_addr)
        : net_(net), peer_addr_(std::move(peer_addr)) {}

    void send(std::span<const std::uint8_t> bytes) override {
        if (!open_) {
            throw Error(Errc::ConnectionClosed, "send on closed connection to " + peer_addr_);
        }
        auto peer = peer_.lock();
        if (!peer) return;
        std::uint64_t arrival =
            std::max(net_->now_ + net_->draw_latency(), last_arrival_ + 1);
        last_arrival_ = arrival;
        std::vector<std::uint8_t> copy(bytes.begin(), bytes.end());
        net_->push_event(arrival, [peer, copy = std::move(copy)]() { peer->deliver_bytes(copy); });
    }

    void set_receiver(std::function<void(std::span<const std::uint8_t>)> on_bytes,
                      std::function<void()> on_close) override {
        on_bytes_ = std::move(on_bytes);
        on_close_ = std::move(on_close);
        if (on_bytes_) {
            for (auto& chunk : pending_) on_bytes_(chunk);
            pending_.clear();
        }
        if (pending_close_ && on_close_) {
            pending_close_ = false;
            on_close_();
        }
    }

    void close() override {
        if (!open_) return;
        open_ = false;
        auto peer = peer_.lock();
        if (!peer) return;
        std::uint64_t arrival =
            std::max(net_->now_ + net_->draw_latency(), last_arrival_ + 1);
        last_arrival_ = arrival;
        net_->push_event(arrival, [peer]() { peer->deliver_close(); });
    }

    bool is_open() const override { return open_; }
    std::string peer_address() const override { return peer_addr_; }

private:
    friend class SimNet;

    void deliver_bytes(const std::vector<std::uint8_t>& bytes) {
        if (!open_) return;  // closed locally; late bytes vanish
        if (on_bytes_) {
            on_bytes_(bytes);
        } else {
            pending_.push_back(bytes);
        }
    }

    void deliver_close() {
        if (!open_) return;
        open_ = false;
        if (on_close_) {
            on_close_();
        } else {
            pending_close_ = true;
        }
    }

    SimNet* net_;
    std::weak_ptr<SimConnection> peer_;
    std::string peer_addr_;
    bool open_ = true;
    bool pending_close_ = false;
    std::uint64_t last_arrival_ = 0;
    std::vector<std::vector<std::uint8_t>> pending_;
    std::function<void(std::span<const std::uint8_t>)> on_bytes_;
    std::function<void()> on_close_;
};

class SimListener : public Listener, public std::enable_shared_from_this<SimListener> {
public:
    SimListener(SimNet* net, std::string locator) : net_(net), locator_(std::move(locator)) {}

    ~SimListener() override { close(); }

    void set_on_accept(std::function<void(std::shared_ptr<Connection>)> on_accept) override {
        on_accept_ = std::move(on_accept);
    }

    std::string address() const override { return "sim:" + locator_; }

    void close() override {
        if (!open_) return;
        open_ = false;
        net_->unbind(locator_);
    }

private:
    friend class SimNet;

    SimNet* net_;
    std::string locator_;
    bool open_ = true;
    std::function<void(std::shared_ptr<Connection>)> on_accept_;
};

SimNet::SimNet(Config cfg) : cfg_(cfg), rng_(cfg.seed) {
    if (cfg_.latency_lo_ms == 0 || cfg_.latency_hi_ms < cfg_.latency_lo_ms) {
        throw Error(Errc::InvalidConfig, "latency bounds must satisfy 1 <= lo <= hi");
    }
}

std::shared_ptr<Listener> SimNet::listen(const std::string& addr) {
    Address parsed = parse_address(addr);
    if (parsed.scheme != "sim") {
        throw Error(Errc::UnsupportedScheme, "SimNet cannot bind " + addr);
    }
    if (auto it = listeners_.find(parsed.locator); it != listeners_.end()) {
        if (auto live = it->second.lock(); live && live->open_) {
            throw Error(Errc::AddressInUse, addr + " already bound");
        }
    }
    auto listener = std::make_shared<SimListener>(this, parsed.locator);
    listeners_[parsed.locator] = listener;
    record_listen(addr);
    return listener;
}

std::shared_ptr<Connection> SimNet::dial(const std::string& addr) {
    Address parsed = parse_address(addr);
    if (parsed.scheme != "sim") {
        throw Error(Errc::UnsupportedScheme, "SimNet cannot dial " + addr);
    }
    std::shared_ptr<SimListener> listener;
    if (auto it = listeners_.find(parsed.locator); it != listeners_.end()) {
        listener = it->second.lock();
    }
    if (!listener || !listener->open_) {
        throw Error(Errc::ConnectionRefused, "nothing listening at " + addr);
    }

    auto dialer = std::make_shared<SimConnection>(this, addr);
    auto accepted =
        std::make_shared<SimConnection>(this, "sim:dial#" + std::to_string(next_conn_seq_++));
    dialer->peer_ = accepted;
    accepted->peer_ = dialer;

    std::uint64_t accept_time = now_ + draw_latency();
    dialer->last_arrival_ = accept_time;
    accepted->last_arrival_ = accept_time;
    std::weak_ptr<SimListener> weak_listener = listener;
    push_event(accept_time, [weak_listener, accepted]() {
        auto live = weak_listener.lock();
        if (!live || !live->open_ || !live->on_accept_) {
            accepted->close();  // refused after the fact; dialer sees a close
            return;
        }
        live->on_accept_(accepted);
    });
    return dialer;
}

std::uint64_t SimNet::schedule(std::uint64_t delay_ms, std::function<void()> fn) {
    std::uint64_t id = next_timer_id_++;
    push_event(now_ + delay_ms, std::move(fn), id);
    return id;
}

void SimNet::cancel(std::uint64_t timer_id) { cancelled_timers_.insert(timer_id); }

void SimNet::push_event(std::uint64_t time, std::function<void()> fn, std::uint64_t timer_id) {
    events_.push(Event{time, rng_(), next_seq_++, timer_id, std::move(fn)});
}

std::uint64_t SimNet::draw_latency() {
    return std::uniform_int_distribution<std::uint32_t>(cfg_.latency_lo_ms,
                                                        cfg_.latency_hi_ms)(rng_);
}

void SimNet::unbind(const std::string& locator) { listeners_.erase(locator); }

bool SimNet::step() { return apply_one(~std::uint64_t{0}); }

std::size_t SimNet::run_for(std::uint64_t duration_ms) {
    std::uint64_t target = now_ + duration_ms;
    std::size_t applied = 0;
    while (apply_one(target)) ++applied;
    now_ = std::max(now_, target);
    return applied;
}

bool SimNet::run_until(const std::function<bool()>& done, std::uint64_t budget_ms) {
    std::uint64_t deadline = now_ + budget_ms;
    while (true) {
        if (done()) return true;
        if (!apply_one(deadline)) {
            now_ = std::max(now_, deadline);
            return done();
        }
    }
}

bool SimNet::apply_one(std::uint64_t limit) {
    while (!events_.empty() && events_.top().time <= limit) {
        Event ev = events_.top();
        events_.pop();
        if (ev.timer_id != 0 && cancelled_timers_.erase(ev.timer_id) > 0) continue;
        now_ = std::max(now_, ev.time);
        ev.fn();
        return true;
    }
    return false;
}

}  // namespace equicom::transport
