#include "equicom/tcp_transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "equicom/errors.hpp"
#include "equicom/log.hpp"

namespace equicom::transport {
namespace {

struct HostPort {
    std::string host;
    std::uint16_t port = 0;
};

// locator "host:port", numeric IPv4 host ("localhost" accepted as loopback).
HostPort split_host_port(const std::string& locator) {
    auto pos = locator.rfind(':');
    if (pos == std::string::npos || pos == 0 || pos + 1 == locator.size()) {
        throw Error(Errc::InvalidArgument, "tcp locator \"" + locator + "\" is not host:port");
    }
    HostPort hp;
    hp.host = locator.substr(0, pos);
    if (hp.host == "localhost") hp.host = "127.0.0.1";
    unsigned long port = 0;
    try {
        port = std::stoul(locator.substr(pos + 1));
    } catch (const std::exception&) {
        throw Error(Errc::InvalidArgument, "bad port in \"" + locator + "\"");
    }
    if (port > 65535) {
        throw Error(Errc::InvalidArgument, "port out of range in \"" + locator + "\"");
    }
    hp.port = static_cast<std::uint16_t>(port);
    return hp;
}

sockaddr_in make_sockaddr(const HostPort& hp) {
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(hp.port);
    if (::inet_pton(AF_INET, hp.host.c_str(), &sa.sin_addr) != 1) {
        throw Error(Errc::InvalidArgument, "bad IPv4 host \"" + hp.host + "\"");
    }
    return sa;
}

std::string addr_of(const sockaddr_in& sa) {
    char buf[INET_ADDRSTRLEN] = {};
    ::inet_ntop(AF_INET, &sa.sin_addr, buf, sizeof(buf));
    return std::string("tcp:") + buf + ":" + std::to_string(ntohs(sa.sin_port));
}

void set_nodelay(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

}  // namespace

class TcpConnection : public Connection, public std::enable_shared_from_this<TcpConnection> {
public:
    TcpConnection(TcpTransport* transport, int fd, std::string peer_addr)
        : transport_(transport), fd_(fd), peer_addr_(std::move(peer_addr)) {}

    ~TcpConnection() override {
        closed_.store(true);
        if (fd_ >= 0) ::close(fd_);
    }

    void send(std::span<const std::uint8_t> bytes) override {
        std::lock_guard<std::mutex> lock(write_mu_);
        if (closed_.load()) {
            throw Error(Errc::ConnectionClosed, "send on closed connection to " + peer_addr_);
        }
        const std::uint8_t* p = bytes.data();
        std::size_t left = bytes.size();
        while (left > 0) {
            ssize_t n = ::send(fd_, p, left, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                // Peer went away mid-write; the bytes are lost, the close
                // will surface through the reader.
                return;
            }
            p += n;
            left -= static_cast<std::size_t>(n);
        }
    }

    void set_receiver(std::function<void(std::span<const std::uint8_t>)> on_bytes,
                      std::function<void()> on_close) override {
        on_bytes_ = std::move(on_bytes);
        on_close_ = std::move(on_close);
        auto self = shared_from_this();
        transport_->spawn([self]() { self->reader_main(); });
    }

    void close() override {
        if (closed_.exchange(true)) return;
        ::shutdown(fd_, SHUT_RDWR);
    }

    bool is_open() const override { return !closed_.load(); }
    std::string peer_address() const override { return peer_addr_; }

private:
    friend class TcpTransport;

    void reader_main() {
        std::vector<std::uint8_t> buf(64 * 1024);
        while (true) {
            ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
            if (n > 0) {
                if (on_bytes_) on_bytes_(std::span<const std::uint8_t>(buf.data(),
                                                                       static_cast<std::size_t>(n)));
                continue;
            }
            if (n < 0 && errno == EINTR) continue;
            break;
        }
        // Only a remote close reports up; a local close() already told the owner.
        if (!closed_.exchange(true) && on_close_) on_close_();
    }

    TcpTransport* transport_;
    int fd_;
    std::string peer_addr_;
    std::atomic<bool> closed_{false};
    std::mutex write_mu_;
    std::function<void(std::span<const std::uint8_t>)> on_bytes_;
    std::function<void()> on_close_;
};

class TcpListener : public Listener, public std::enable_shared_from_this<TcpListener> {
public:
    TcpListener(TcpTransport* transport, int fd, std::string bound_addr)
        : transport_(transport), fd_(fd), bound_addr_(std::move(bound_addr)) {}

    ~TcpListener() override {
        close();
        if (fd_ >= 0) ::close(fd_);
    }

    void set_on_accept(std::function<void(std::shared_ptr<Connection>)> on_accept) override {
        on_accept_ = std::move(on_accept);
        auto self = shared_from_this();
        transport_->spawn([self]() { self->acceptor_main(); });
    }

    std::string address() const override { return bound_addr_; }

    void close() override {
        if (closed_.exchange(true)) return;
        // shutdown() unblocks a pending accept (Linux); the fd itself is
        // closed in the destructor once the acceptor has exited.
        ::shutdown(fd_, SHUT_RDWR);
    }

private:
    friend class TcpTransport;

    void acceptor_main() {
        while (!closed_.load() && !transport_->stopping()) {
            sockaddr_in peer{};
            socklen_t len = sizeof(peer);
            int cfd = ::accept(fd_, reinterpret_cast<sockaddr*>(&peer), &len);
            if (cfd < 0) {
                if (errno == EINTR) continue;
                break;
            }
            if (closed_.load() || transport_->stopping() || !on_accept_) {
                ::close(cfd);
                continue;
            }
            set_nodelay(cfd);
            auto conn = std::make_shared<TcpConnection>(transport_, cfd, addr_of(peer));
            transport_->track(conn);
            on_accept_(conn);
        }
    }

    TcpTransport* transport_;
    int fd_;
    std::string bound_addr_;
    std::atomic<bool> closed_{false};
    std::function<void(std::shared_ptr<Connection>)> on_accept_;
};

TcpTransport::TcpTransport() : epoch_(std::chrono::steady_clock::now()) {}

TcpTransport::~TcpTransport() {
    stop_.store(true);
    timer_cv_.notify_all();
    // Threads can still be spawning (an acceptor finishing one last accept),
    // so close and join in rounds until nothing new appears.
    while (true) {
        close_all_live();
        std::vector<std::thread> batch;
        {
            std::lock_guard<std::mutex> lock(threads_mu_);
            batch.swap(threads_);
        }
        if (batch.empty()) break;
        for (auto& t : batch) t.join();
    }
}

std::shared_ptr<Listener> TcpTransport::listen(const std::string& addr) {
    Address parsed = parse_address(addr);
    if (parsed.scheme != "tcp") {
        throw Error(Errc::UnsupportedScheme, "TcpTransport cannot bind " + addr);
    }
    HostPort hp = split_host_port(parsed.locator);
    sockaddr_in sa = make_sockaddr(hp);

    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw Error(Errc::IoError, std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) < 0) {
        int err = errno;
        ::close(fd);
        if (err == EADDRINUSE) throw Error(Errc::AddressInUse, addr + " already bound");
        throw Error(Errc::IoError, std::string("bind ") + addr + ": " + std::strerror(err));
    }
    if (::listen(fd, 128) < 0) {
        int err = errno;
        ::close(fd);
        throw Error(Errc::IoError, std::string("listen ") + addr + ": " + std::strerror(err));
    }
    sockaddr_in actual{};
    socklen_t len = sizeof(actual);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&actual), &len);

    auto listener = std::make_shared<TcpListener>(this, fd, addr_of(actual));
    track(listener);
    record_listen(addr);
    return listener;
}

std::shared_ptr<Connection> TcpTransport::dial(const std::string& addr) {
    Address parsed = parse_address(addr);
    if (parsed.scheme != "tcp") {
        throw Error(Errc::UnsupportedScheme, "TcpTransport cannot dial " + addr);
    }
    sockaddr_in sa = make_sockaddr(split_host_port(parsed.locator));

    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw Error(Errc::IoError, std::string("socket: ") + std::strerror(errno));
    while (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) < 0) {
        if (errno == EINTR) continue;
        int err = errno;
        ::close(fd);
        if (err == ECONNREFUSED) {
            throw Error(Errc::ConnectionRefused, "nothing listening at " + addr);
        }
        throw Error(Errc::IoError, std::string("connect ") + addr + ": " + std::strerror(err));
    }
    set_nodelay(fd);
    auto conn = std::make_shared<TcpConnection>(this, fd, addr);
    track(conn);
    return conn;
}

std::uint64_t TcpTransport::schedule(std::uint64_t delay_ms, std::function<void()> fn) {
    std::lock_guard<std::mutex> lock(timer_mu_);
    std::uint64_t id = next_timer_id_++;
    timers_.emplace(now_ms() + delay_ms, std::make_pair(id, std::move(fn)));
    if (!timer_thread_started_) {
        timer_thread_started_ = true;
        spawn([this]() { timer_main(); });
    }
    timer_cv_.notify_all();
    return id;
}

void TcpTransport::cancel(std::uint64_t timer_id) {
    std::lock_guard<std::mutex> lock(timer_mu_);
    for (auto it = timers_.begin(); it != timers_.end(); ++it) {
        if (it->second.first == timer_id) {
            timers_.erase(it);
            return;
        }
    }
}

std::uint64_t TcpTransport::now_ms() const {
    return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                          std::chrono::steady_clock::now() - epoch_)
                                          .count());
}

void TcpTransport::timer_main() {
    std::unique_lock<std::mutex> lock(timer_mu_);
    while (!stop_.load()) {
        if (timers_.empty()) {
            timer_cv_.wait(lock);
            continue;
        }
        std::uint64_t due = timers_.begin()->first;
        if (now_ms() < due) {
            timer_cv_.wait_until(lock, epoch_ + std::chrono::milliseconds(due));
            continue;
        }
        auto node = timers_.extract(timers_.begin());
        auto fn = std::move(node.mapped().second);
        lock.unlock();
        try {
            fn();
        } catch (const std::exception& e) {
            log::warn("timer callback threw: ", e.what());
        }
        lock.lock();
    }
}

void TcpTransport::spawn(std::function<void()> fn) {
    std::lock_guard<std::mutex> lock(threads_mu_);
    threads_.emplace_back(std::move(fn));
}

void TcpTransport::track(std::shared_ptr<TcpConnection> conn) {
    std::lock_guard<std::mutex> lock(track_mu_);
    conns_.emplace_back(std::move(conn));
}

void TcpTransport::track(std::shared_ptr<TcpListener> listener) {
    std::lock_guard<std::mutex> lock(track_mu_);
    listeners_.emplace_back(std::move(listener));
}

void TcpTransport::close_all_live() {
    std::vector<std::shared_ptr<TcpListener>> ls;
    std::vector<std::shared_ptr<TcpConnection>> cs;
    {
        std::lock_guard<std::mutex> lock(track_mu_);
        for (auto& w : listeners_) {
            if (auto l = w.lock()) ls.push_back(std::move(l));
        }
        for (auto& w : conns_) {
            if (auto c = w.lock()) cs.push_back(std::move(c));
        }
    }
    for (auto& l : ls) l->close();
    for (auto& c : cs) c->close();
}

}  // namespace equicom::transport
