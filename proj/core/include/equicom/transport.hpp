#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace equicom::transport {

// "scheme:locator" — "sim:a" or "tcp:127.0.0.1:7000".
struct Address {
    std::string scheme;
    std::string locator;

    std::string str() const { return scheme + ":" + locator; }

    bool operator==(const Address&) const = default;
};

// Throws Error{UnsupportedScheme} for anything but sim/tcp and
// Error{InvalidArgument} for a missing locator.
Address parse_address(const std::string& text);

// One direction-ordered, reliable duplex byte stream. Inbound bytes are
// pushed to the receiver callback in arbitrary chunking; peer close is pushed
// as on_close after all preceding bytes.
class Connection {
public:
    virtual ~Connection() = default;

    // Queues bytes toward the peer. Throws Error{ConnectionClosed} after
    // close() on this side; bytes racing a remote close are silently lost.
    virtual void send(std::span<const std::uint8_t> bytes) = 0;

    // Installs the inbound callbacks; delivery starts only after this.
    // Callbacks may block to exert backpressure on the link.
    virtual void set_receiver(std::function<void(std::span<const std::uint8_t>)> on_bytes,
                              std::function<void()> on_close) = 0;

    virtual void close() = 0;
    virtual bool is_open() const = 0;
    virtual std::string peer_address() const = 0;
};

class Listener {
public:
    virtual ~Listener() = default;

    virtual void set_on_accept(std::function<void(std::shared_ptr<Connection>)> on_accept) = 0;

    // Actual bound address ("tcp:...:0" resolves the real port).
    virtual std::string address() const = 0;

    virtual void close() = 0;
};

// A backend: either the in-process simulated network or real stream sockets.
// Also the home of the timer facility, so the simulated clock and the wall
// clock stay interchangeable, and of the listen-call trace used by the
// single-port assertions.
class Transport {
public:
    virtual ~Transport() = default;

    // Throws Error{AddressInUse} on a taken address, Error{UnsupportedScheme}
    // on a foreign scheme.
    virtual std::shared_ptr<Listener> listen(const std::string& addr) = 0;

    // Throws Error{ConnectionRefused} when nothing listens at addr.
    virtual std::shared_ptr<Connection> dial(const std::string& addr) = 0;

    // One-shot timer; returns a handle for cancel(). Handles are never 0.
    virtual std::uint64_t schedule(std::uint64_t delay_ms, std::function<void()> fn) = 0;
    virtual void cancel(std::uint64_t timer_id) = 0;

    virtual std::uint64_t now_ms() const = 0;

    // Every successful listen()'s requested address, in call order; failed
    // binds leave no trace.
    std::vector<std::string> listen_log() const {
        std::lock_guard<std::mutex> lock(listen_log_mu_);
        return listen_log_;
    }

protected:
    void record_listen(const std::string& addr) {
        std::lock_guard<std::mutex> lock(listen_log_mu_);
        listen_log_.push_back(addr);
    }

private:
    mutable std::mutex listen_log_mu_;
    std::vector<std::string> listen_log_;
};

}  // namespace equicom::transport
