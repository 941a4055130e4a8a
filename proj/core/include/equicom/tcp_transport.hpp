#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "equicom/transport.hpp"

namespace equicom::transport {

class TcpConnection;
class TcpListener;

// Real stream sockets (loopback-oriented). One acceptor thread per listener,
// one reader thread per connection, one timer thread per transport; all of
// them are tracked and joined when the transport is destroyed. Frames go on
// the wire back-to-back with no extra delimiters.
class TcpTransport : public Transport {
public:
    TcpTransport();
    ~TcpTransport() override;

    TcpTransport(const TcpTransport&) = delete;
    TcpTransport& operator=(const TcpTransport&) = delete;

    std::shared_ptr<Listener> listen(const std::string& addr) override;
    std::shared_ptr<Connection> dial(const std::string& addr) override;
    std::uint64_t schedule(std::uint64_t delay_ms, std::function<void()> fn) override;
    void cancel(std::uint64_t timer_id) override;
    std::uint64_t now_ms() const override;

private:
    friend class TcpConnection;
    friend class TcpListener;

    void spawn(std::function<void()> fn);
    void track(std::shared_ptr<TcpConnection> conn);
    void track(std::shared_ptr<TcpListener> listener);
    void close_all_live();
    bool stopping() const { return stop_.load(); }
    void timer_main();

    std::chrono::steady_clock::time_point epoch_;
    std::atomic<bool> stop_{false};

    std::mutex threads_mu_;
    std::vector<std::thread> threads_;

    std::mutex track_mu_;
    std::vector<std::weak_ptr<TcpConnection>> conns_;
    std::vector<std::weak_ptr<TcpListener>> listeners_;

    std::mutex timer_mu_;
    std::condition_variable timer_cv_;
    std::multimap<std::uint64_t, std::pair<std::uint64_t, std::function<void()>>> timers_;
    std::uint64_t next_timer_id_ = 1;
    bool timer_thread_started_ = false;
};

}  // namespace equicom::transport
